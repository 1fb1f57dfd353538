#include "hfl/parameters.hpp"

#include <cstring>
#include <fstream>

namespace hfl {

namespace {

constexpr char kMagic[4] = {'H', 'F', 'N', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size())
      throw IoError("parameter container truncated at byte " +
                    std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::int64_t ModelParameters::total_size() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.weights.size() + e.biases.size();
  return n;
}

void ModelParameters::validate(const std::string& what) const {
  for (const auto& e : entries) {
    e.weights.validate(what + "." + e.name + ".weight");
    e.biases.validate(what + "." + e.name + ".bias");
  }
}

bool congruent(const ModelParameters& a, const ModelParameters& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& ea = a.entries[i];
    const auto& eb = b.entries[i];
    if (ea.name != eb.name) return false;
    if (ea.weights.shape != eb.weights.shape) return false;
    if (ea.biases.shape != eb.biases.shape) return false;
  }
  return true;
}

void require_congruent(const ModelParameters& a, const ModelParameters& b,
                       const std::string& context) {
  if (!congruent(a, b))
    throw StructuralError(context + ": parameter sets are not congruent");
}

ModelParameters zeros_like(const ModelParameters& p) {
  ModelParameters out;
  out.round = p.round;
  out.entries.reserve(p.entries.size());
  for (const auto& e : p.entries)
    out.entries.push_back({e.name, Tensor(e.weights.shape), Tensor(e.biases.shape)});
  return out;
}

std::vector<std::uint8_t> serialize_tensors(
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
    for (Index d : t->shape) put_u64(out, static_cast<std::uint64_t>(d));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(t->values.data());
    static_assert(sizeof(Scalar) == 8);
    out.insert(out.end(), raw, raw + t->values.size() * sizeof(Scalar));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> deserialize_tensors(
    const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("bad magic: not a parameter container");
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw IoError("unsupported container format version " +
                  std::to_string(version));
  std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    std::uint32_t rank = r.u32();
    std::vector<Index> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<Index>(r.u64());
    Index n = shape_product(shape);
    r.need(static_cast<std::size_t>(n) * sizeof(Scalar));
    Vector v(n);
    std::memcpy(v.data(), bytes.data() + r.pos, n * sizeof(Scalar));
    r.pos += static_cast<std::size_t>(n) * sizeof(Scalar);
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(v)));
  }
  if (r.pos != bytes.size())
    throw IoError("trailing bytes after last container entry");
  return out;
}

std::vector<std::uint8_t> serialize(const ModelParameters& params) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  tensors.reserve(params.entries.size() * 2);
  for (const auto& e : params.entries) {
    tensors.emplace_back(e.name + ".weight", &e.weights);
    tensors.emplace_back(e.name + ".bias", &e.biases);
  }
  return serialize_tensors(tensors);
}

ModelParameters deserialize(const std::vector<std::uint8_t>& bytes) {
  auto tensors = deserialize_tensors(bytes);
  if (tensors.size() % 2 != 0)
    throw IoError("parameter container must hold weight/bias pairs");
  ModelParameters out;
  out.entries.reserve(tensors.size() / 2);
  for (std::size_t i = 0; i + 1 < tensors.size(); i += 2) {
    auto& [wname, w] = tensors[i];
    auto& [bname, b] = tensors[i + 1];
    const auto strip = [](const std::string& s, const char* suffix) {
      std::string_view sv(s);
      std::string_view suf(suffix);
      if (sv.size() <= suf.size() || sv.substr(sv.size() - suf.size()) != suf)
        throw IoError("unexpected container entry name: " + s);
      return std::string(sv.substr(0, sv.size() - suf.size()));
    };
    std::string base = strip(wname, ".weight");
    if (strip(bname, ".bias") != base)
      throw IoError("weight/bias pair mismatch: " + wname + " vs " + bname);
    out.entries.push_back({std::move(base), std::move(w), std::move(b)});
  }
  return out;
}

namespace {

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

void save_parameters(const std::string& path, const ModelParameters& params) {
  write_file(path, serialize(params));
}

ModelParameters load_parameters(const std::string& path) {
  return deserialize(read_file(path));
}

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  write_file(path, serialize_tensors(tensors));
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
  return deserialize_tensors(read_file(path));
}

std::uint64_t checksum(const ModelParameters& params) {
  auto bytes = serialize(params);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace hfl
