#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qcseg {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream of a root seed, so each
/// pipeline stage can be re-run on its own and still reproduce.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

/// FNV-1a, used for config fingerprints and stream derivation.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace qcseg
