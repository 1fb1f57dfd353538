#include "hfl/common.hpp"

namespace hfl {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = master ^ fnv1a64(tag.data(), tag.size());
  splitmix64(state);
  state ^= 0x510e527fade682d1ULL + a;
  splitmix64(state);
  state ^= 0x9b05688c2b3e6c1fULL + b;
  return splitmix64(state);
}

Scalar open_unit(Rng& rng) {
  // 53 mantissa bits, offset by half an ulp: never exactly 0 or 1.
  return (static_cast<Scalar>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace hfl
