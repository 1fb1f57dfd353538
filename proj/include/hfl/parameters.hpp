#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hfl/tensor.hpp"

namespace hfl {

// Ordered, named weight/bias pairs. This is the unit exchanged by the
// federation protocol: client models, cluster aggregates, and the global
// model all share one structure.
struct ParameterEntry {
  std::string name;
  Tensor weights;
  Tensor biases;
};

struct ModelParameters {
  std::vector<ParameterEntry> entries;
  std::uint32_t round = 0;  // version tag: federation round index

  std::int64_t total_size() const;
  void validate(const std::string& what) const;
};

// Structural congruence: identical names, order, and shapes.
bool congruent(const ModelParameters& a, const ModelParameters& b);
void require_congruent(const ModelParameters& a, const ModelParameters& b,
                       const std::string& context);

ModelParameters zeros_like(const ModelParameters& p);

// Flat binary tensor container.
// Header: magic "HFND", format version u32, entry count u32.
// Per entry: name length u32 + UTF-8 name, rank u32, dims u64 each,
// raw little-endian 64-bit floats. Round-trips are bit-exact.
std::vector<std::uint8_t> serialize_tensors(
    const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> deserialize_tensors(
    const std::vector<std::uint8_t>& bytes);

// ModelParameters are stored as one container entry per tensor, named
// "<entry>.weight" / "<entry>.bias" in entry order.
std::vector<std::uint8_t> serialize(const ModelParameters& params);
ModelParameters deserialize(const std::vector<std::uint8_t>& bytes);

void save_parameters(const std::string& path, const ModelParameters& params);
ModelParameters load_parameters(const std::string& path);

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path);

// FNV-1a over the serialized container bytes; recomputable from any saved file.
std::uint64_t checksum(const ModelParameters& params);

}  // namespace hfl
