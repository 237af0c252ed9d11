#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agpforge/model.hpp"
#include "agpforge/pauli.hpp"

namespace agpforge {

/// Operator basis for the gauge potential: the union of Pauli strings
/// appearing in the odd nested commutators [H,[H,...,[H,dH]...]].
struct AgpBasis {
  std::vector<PauliString> strings;        // distinct, sorted
  std::optional<SymmetryGrouping> grouping;
  int depth_generated = 0;                 // odd nesting levels consumed
  int n_sites = 0;

  std::size_t orbit_count() const {
    return grouping ? grouping->orbit_count() : strings.size();
  }
  /// Sum of basis strings in one orbit (coefficient 1 each).
  PauliOperator orbit_operator(std::size_t orbit) const;
  /// Smallest member string of the orbit; used as its label.
  std::string orbit_label(std::size_t orbit) const;
  /// Pure-X site count of the orbit's representative (the "order" used for
  /// K-restriction of Ising-chain bases).
  int orbit_order(std::size_t orbit) const;
  /// Basis restricted to the given orbits (grouping renumbered).
  AgpBasis restricted_to(const std::vector<std::size_t>& orbits) const;
};

struct BasisOptions {
  int k_max = 0;                 // 0 -> 2 * n_sites odd levels
  std::size_t string_cap = 1'000'000;
};

/// Generate the AGP basis at one parameter point.  Stops early once an odd
/// nesting level contributes no new string (closure); strings that commute
/// with every Hamiltonian term are dropped, as is the identity.  Throws when
/// the basis exceeds `string_cap`.
AgpBasis generate_basis(const PauliOperator& h, const PauliOperator& dh, BasisOptions opt = {});
AgpBasis generate_basis(const ParametricHamiltonian& h, double lambda, BasisOptions opt = {});

/// Union of bases generated at several probe points (special parameter values
/// can close on a strict subset of the generic basis).
AgpBasis generate_basis_multi(const ParametricHamiltonian& h, std::span<const double> probes,
                              BasisOptions opt = {});

/// The linear system M alpha = u projected on the (orbit-grouped) basis,
/// in the normalized-trace convention: M_ij = ntp(-i[H,S_i], -i[H,S_j]) and
/// u_j = ntp(-i[H,dH], S_j) with S_i the orbit-summed basis operators.  This
/// rescales the unnormalized-trace system by -1/N and leaves the solution
/// coefficients unchanged; M is symmetric positive semidefinite.
struct LinearSystem {
  Eigen::MatrixXd m;
  Eigen::VectorXd u;
  Eigen::VectorXd h_in_basis;    // orbit-summed Hamiltonian coefficients
};

LinearSystem assemble_system(const PauliOperator& h, const PauliOperator& dh,
                             const AgpBasis& basis);

enum class SolveMode { exact, constrained, restricted };
std::string to_string(SolveMode);

struct AgpSolution {
  AgpBasis basis;
  Eigen::VectorXd alpha;       // one coefficient per orbit
  int rank = 0;
  double residual_norm = 0.0;  // normalized HS norm of -i[H, G]; ~0 iff exact up to diagonal part
  double g_norm = 0.0;         // normalized HS norm of G = dH - i[H,A]; the variational objective
  SolveMode mode = SolveMode::exact;
};

/// Exact solve with the repair ladder: direct solve when M is full rank
/// (singular values below 1e-10 of the largest count as zero); otherwise the
/// Tr(H A) = 0 constraint is appended by shifting M along the Hamiltonian
/// direction (mode `constrained`); otherwise the minimum-norm least-squares
/// solution is returned (mode `restricted`).  Residuals are always reported.
AgpSolution solve_exact(const PauliOperator& h, const PauliOperator& dh, const AgpBasis& basis);

/// Variational solve on a restricted basis: least-squares minimizer of the
/// Hilbert-Schmidt norm of G = dH - i[H,A] over the restricted coefficients.
/// Unless `allow_exploratory`, the restricted strings must be a subset of
/// `full` (or of a freshly generated basis when `full` is null).
AgpSolution solve_restricted(const PauliOperator& h, const PauliOperator& dh,
                             const AgpBasis& restricted, const AgpBasis* full = nullptr,
                             bool allow_exploratory = false);

/// Copy coefficients for the kept orbits, zero the rest, recompute residuals.
AgpSolution truncate_exact(const PauliOperator& h, const PauliOperator& dh,
                           const AgpSolution& full, const std::vector<std::size_t>& keep);

/// Expand orbit coefficients onto strings: A = sum_o alpha_o S_o.
PauliOperator agp_operator(const AgpSolution& sol);

/// Normalized HS norm of [H, G] with G = dH - i[H,A]; zero (up to roundoff)
/// iff A solves the commutator condition up to a diagonal part.
double residual(const PauliOperator& h, const PauliOperator& dh, const PauliOperator& a);

/// Normalized HS norm of G itself (the least-squares objective).
double g_norm(const PauliOperator& h, const PauliOperator& dh, const PauliOperator& a);

/// Numerical-rank cutoff used by the solvers.
inline constexpr double kRankRel = 1e-10;

std::string serialize_json(const AgpSolution& sol);

/// Precompiled grouped solver for a fixed Hamiltonian string family and AGP
/// basis: every trace tensor is lambda-independent, so the per-point system
/// is a cheap contraction with the coefficient vectors.  Used on the hot
/// paths (counterdiabatic fields inside the integrator, bound grids); agrees
/// with solve_exact coefficient-for-coefficient.
class CompiledAgpSolver {
 public:
  CompiledAgpSolver(std::vector<PauliString> h_strings, AgpBasis basis);

  /// Minimum-norm solve with the same rank rules as solve_exact; `h` and
  /// `dh` are aligned with the string family.  The diagonal-constraint
  /// repair applies unless `constraint_repair` is off (restricted solves
  /// stay plain least squares).
  Eigen::VectorXd solve(std::span<const double> h, std::span<const double> dh,
                        SolveMode* mode_out = nullptr, bool constraint_repair = true) const;

  const AgpBasis& basis() const { return basis_; }

 private:
  std::vector<PauliString> h_strings_;
  AgpBasis basis_;
  Eigen::Index n_orbits_ = 0, n_terms_ = 0;
  std::vector<Eigen::MatrixXd> q_;  // per (mu,nu): M contribution, n_orbits^2
  std::vector<Eigen::VectorXd> u_;  // per (mu,nu): u contribution, n_orbits
  Eigen::MatrixXd h_in_;            // (orbit, mu): ntp(B_mu, S_o)
};

/// lambda -> A_app callables for counterdiabatic driving, with a small cache
/// keyed on lambda (stage values repeat within an integrator step).
using AgpField = std::function<PauliOperator(double)>;
AgpField make_exact_cd(const ParametricHamiltonian& h, AgpBasis basis);
AgpField make_truncated_cd(const ParametricHamiltonian& h, AgpBasis basis,
                           std::vector<std::size_t> keep);
AgpField make_restricted_cd(const ParametricHamiltonian& h, AgpBasis restricted);

}  // namespace agpforge
