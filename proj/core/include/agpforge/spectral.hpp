#pragma once

#include <complex>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "agpforge/model.hpp"
#include "agpforge/pauli.hpp"

namespace agpforge {

using DenseMatrix = Eigen::MatrixXcd;

/// Dense-matrix cap: 2^14 x 2^14 is the largest matrix we will form.
inline constexpr int kDenseSiteCap = 14;

/// Kronecker expansion of a Pauli operator.  Site 1 (leftmost character of
/// the text form) is the most significant qubit of the basis index.
/// Throws when n_sites exceeds `site_cap`.
DenseMatrix to_dense(const PauliOperator& op, int site_cap = kDenseSiteCap);

/// Apply the operator to a dense state without forming the matrix.
Eigen::VectorXcd apply_operator(const PauliOperator& op, const Eigen::VectorXcd& psi);

/// Eigendecomposition of a Hermitian matrix, energies ascending.
struct Spectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd states;      // column n is |n>
  bool degenerate = false;      // some consecutive gap below the tolerance
  double min_gap = 0.0;

  int dimension() const { return static_cast<int>(energies.size()); }
};

/// Diagonalize `h`.  With `gauge_ref`, each eigenvector's phase is fixed so
/// that its overlap with the reference vector of largest |overlap| is real
/// and positive (the matching handles level reorderings along a path).
/// Consecutive levels closer than `gap_tol` set the `degenerate` flag.
Spectrum diagonalize(const DenseMatrix& h, const Spectrum* gauge_ref = nullptr,
                     double gap_tol = 1e-9);

/// Eigenstate-based gauge potential A = i sum_n (1-|n><n|) |d n><n| from a
/// central finite difference: `below` and `above` are spectra at
/// lambda -+ dlambda, internally gauge-matched to each other.  The result is
/// Hermitian with zero diagonal in the eigenbasis, accurate to O(dlambda^2).
/// Throws std::invalid_argument when either spectrum is degenerate-flagged.
DenseMatrix exact_agp(const Spectrum& below, const Spectrum& above, double dlambda);

/// First-order perturbation-theory route: A_mn = i <m|dH|n> / (E_n - E_m)
/// for m != n.  Exact in exact arithmetic; preferred for small gaps.
DenseMatrix exact_agp_perturbative(const Spectrum& center, const DenseMatrix& dh);

/// sum_n <d n|(1 - |n><n|)|d n>, the eigenstate-summed quantum geometric
/// tensor per unit dlambda^2; equals Tr(A^2) of the gauge potential.  Exact
/// level multiplets (within multiplet_tol_rel of the spectral range) are
/// projected out of each derivative: within-multiplet components are pure
/// gauge (any eigensolver returns an arbitrary basis there), and symmetric
/// systems such as the periodic Ising chain carry degenerate excited
/// multiplets at every coupling.
double geometric_tensor_sum(const Spectrum& below, const Spectrum& above, double dlambda,
                            double multiplet_tol_rel = 1e-8);

struct OracleOptions {
  double dlambda = 0.0;        // 0 -> 1e-5 * max(1, |lambda|)
  double small_gap = 1e-4;     // below this, switch to the perturbative route
  bool richardson_check = true;
};

/// Convenience oracle: builds spectra around `lambda` for H(lambda) and
/// returns the eigenstate-construction AGP, choosing the finite-difference or
/// perturbative route and (optionally) Richardson-checking the step.
DenseMatrix oracle_agp(const ParametricHamiltonian& h, double lambda, OracleOptions opt = {});

/// CSV dump "lambda,E_0,...,E_{N-1}" for a list of (lambda, spectrum) rows.
std::string spectrum_csv(const std::vector<std::pair<double, Spectrum>>& rows);

}  // namespace agpforge
