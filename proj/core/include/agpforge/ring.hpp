#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agpforge/agp.hpp"
#include "agpforge/pauli.hpp"

namespace agpforge {

// Translation-reduced operator algebra on a periodic chain.  An operator is
// stored as a map from canonical patterns p to coefficients c_p with the
// meaning  Op = sum_p c_p * orbit_sum(p),  orbit_sum(p) = sum_{i=0}^{L-1} T^i p
// (repetitions included for patterns with period < L).  Commutators and
// traces then cost O(poly(pattern count)) instead of O(L * string count),
// which is what makes the L ~ 10^2..10^3 scans affordable.

/// Rotation of `s` with the smallest text form; `shift_out` receives the
/// applied shift.
PauliString canonical_rotation(const PauliString& s, int* shift_out = nullptr);

/// Smallest period d | L with T^d p = p.
int pattern_period(const PauliString& p);

class RingOperator {
 public:
  RingOperator() = default;
  explicit RingOperator(int n_sites) : n_sites_(n_sites) {}

  int n_sites() const { return n_sites_; }
  bool empty() const { return patterns_.empty(); }
  std::size_t pattern_count() const { return patterns_.size(); }
  const std::map<PauliString, double>& patterns() const { return patterns_; }

  /// Accumulate onto the canonical rotation of `p`.
  void add_pattern(const PauliString& p, double coeff);

  RingOperator& operator+=(const RingOperator& rhs);
  RingOperator& operator*=(double factor);
  friend RingOperator operator*(double f, RingOperator a) { return a *= f; }

  double max_abs_coeff() const;
  void prune(double rel = PauliOperator::kPruneRel);

  /// Expand to the plain string representation (small L only).
  PauliOperator expand() const;

 private:
  int n_sites_ = 0;
  std::map<PauliString, double> patterns_;
};

/// -i[A, B] in the ring representation.  `prune_rel` as in op_commutator.
RingOperator ring_commutator(const RingOperator& a, const RingOperator& b,
                             double prune_rel = PauliOperator::kPruneRel);

/// (1/2^L) Tr(A B); equals the expanded normalized_trace_product.
double ring_ntp(const RingOperator& a, const RingOperator& b);

/// Transverse Ising chain pieces as ring operators.
RingOperator ring_ising(int n_sites, double g);
RingOperator ring_ising_derivative(int n_sites);

struct RingBasis {
  int n_sites = 0;
  std::vector<PauliString> patterns;              // canonical, sorted
  std::vector<std::vector<std::size_t>> orbits;   // reflection pairing
  int depth_generated = 0;

  std::size_t orbit_count() const { return orbits.size(); }
  /// Pure-X count of the orbit representative (the K-restriction order).
  int orbit_order(std::size_t orbit) const;
  RingBasis restricted_to_order(int k_max_order) const;
  RingOperator orbit_operator(std::size_t orbit) const;
};

/// Odd-nested-commutator basis in pattern space, grouped under reflection
/// when it preserves the Hamiltonian.  Patterns must be aperiodic (period L);
/// a periodic pattern in the basis aborts, since orbit-sum weights would
/// then differ from the plain grouped solve.
RingBasis ring_generate_basis(const RingOperator& h, const RingOperator& dh,
                              BasisOptions opt = {});

struct RingSolution {
  RingBasis basis;
  Eigen::VectorXd alpha;    // one coefficient per orbit
  int rank = 0;
  double residual_norm = 0.0;
  double g_norm = 0.0;
  SolveMode mode = SolveMode::exact;

  RingOperator operator_ring() const;
  /// Sum over strings of squared coefficients: ||A||_HS^2 / 2^L.
  double hs_norm_per_dim_sq() const;
};

/// Grouped exact solve in the ring representation (same convention and
/// repair ladder as solve_exact).
RingSolution ring_solve(const RingOperator& h, const RingOperator& dh, const RingBasis& basis);

/// Expand a ring basis into the plain grouped basis (strings plus orbit map),
/// for use with the generic solvers and the dense-evolution drivers.
AgpBasis to_agp_basis(const RingBasis& basis);

}  // namespace agpforge
