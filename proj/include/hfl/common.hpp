#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfl {

using Scalar = double;

// Error taxonomy. Validation and ingestion errors indicate bad input or
// configuration (CLI exit code 1); the rest are runtime failures (exit 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit hash; also used as the parameter checksum over serialized bytes.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

// Every random stream in the project is derived from one master seed as
//   derive_seed(master, purpose_tag, a, b)
// where a/b are context indices (round, client id, epoch, ...). The tag is
// hashed with FNV-1a and the result mixed through splitmix64 so distinct
// purposes never share a stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

using Rng = std::mt19937_64;

// Uniform draw strictly inside (0, 1).
Scalar open_unit(Rng& rng);

}  // namespace hfl
