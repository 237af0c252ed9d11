#pragma once

// Shared string-action machinery for dense state vectors.  Site s of a
// string maps to bit (n_sites - 1 - s) of the basis index, so the leftmost
// site of the text form is the most significant qubit.

#include <complex>
#include <cstdint>

#include "agpforge/pauli.hpp"

namespace agpforge::detail {

struct IndexMasks {
  std::uint64_t x = 0, z = 0;
  std::complex<double> phase;  // i^{#Y}
};

inline IndexMasks index_masks(const PauliString& s) {
  static constexpr std::complex<double> kIPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const int n = s.n_sites();
  IndexMasks m;
  int y_count = 0;
  for (int site = 0; site < n; ++site) {
    const std::uint64_t bit = std::uint64_t{1} << (n - 1 - site);
    if (s.x_bit(site)) m.x |= bit;
    if (s.z_bit(site)) m.z |= bit;
    if (s.x_bit(site) && s.z_bit(site)) ++y_count;
  }
  m.phase = kIPowers[y_count % 4];
  return m;
}

}  // namespace agpforge::detail
