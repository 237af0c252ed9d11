#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agpforge/pauli.hpp"

namespace agpforge {

/// A time -> parameter path lambda(t) on [0, t_final], with its time
/// derivative.  Schedule functions must be pure.
struct Schedule {
  std::function<double(double)> lambda_of_t;
  std::function<double(double)> dlambda_dt;
  double t_final = 1.0;

  /// lambda = a + (b-a) t/T.
  static Schedule linear(double a, double b, double t_final);
  /// Annealing ramp: lambda = t/T (0 at start, 1 at the end).
  static Schedule annealing(double t_final);
  /// Smooth sweep lambda = a + (b-a)(1 - cos(pi t/T))/2; for a=-2, b=2 this is
  /// the swept field -2 cos(pi t/T).
  static Schedule cosine(double a, double b, double t_final);
  static Schedule constant(double value, double t_final);
};

/// Hamiltonian family H(lambda) = sum_i h_i(lambda) L_i over a fixed ordered
/// string basis, together with the coefficient derivatives dh_i/dlambda.
/// When `dcoeffs` is not supplied, a central finite difference of `coeffs`
/// with step 1e-6 * max(1, |lambda|) is used.
class ParametricHamiltonian {
 public:
  using CoeffFn = std::function<std::vector<double>(double)>;

  ParametricHamiltonian() = default;
  ParametricHamiltonian(std::vector<PauliString> basis, CoeffFn coeffs, CoeffFn dcoeffs = nullptr);

  int n_sites() const { return n_sites_; }
  const std::vector<PauliString>& basis() const { return basis_; }

  std::vector<double> coeffs_at(double lambda) const;
  std::vector<double> dcoeffs_at(double lambda) const;

  PauliOperator operator_at(double lambda) const;
  PauliOperator derivative_at(double lambda) const;

 private:
  std::vector<PauliString> basis_;
  CoeffFn coeffs_, dcoeffs_;
  int n_sites_ = 0;
};

/// Scalar coefficient function h(lambda) with analytic derivative; the named
/// primitives accepted in JSON system descriptions.
struct CoeffSchedule {
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static CoeffSchedule constant(double c);
  static CoeffSchedule linear(double a, double b);            // a + b*lambda
  static CoeffSchedule cosine(double amp, double freq, double phase);  // amp*cos(freq*lambda+phase)
  static CoeffSchedule identity();                            // h = lambda
};

/// h^x X + h^y Y + h^z Z on one site.
ParametricHamiltonian single_spin_system(CoeffSchedule h_x, CoeffSchedule h_y, CoeffSchedule h_z);

/// chi0 Z1 Z2 + delta(lambda) (Z1 + Z2) + omega0 (X1 + X2).  Only the
/// longitudinal field varies with lambda.
ParametricHamiltonian two_spin_system(double chi0, CoeffSchedule delta, double omega0);

/// -g(lambda) sum_i Z_i Z_{i+1} - (1 - g(lambda)) sum_i X_i on a ring of L
/// sites (Z_{L+1} = Z_1).  Requires L >= 3.  Default g is the identity, so
/// lambda is the annealing parameter g_t itself.
ParametricHamiltonian transverse_ising_chain(int n_sites, CoeffSchedule g = CoeffSchedule::identity());

using SitePermutation = std::vector<int>;

/// Partition of an operator basis into orbits sharing one coefficient.
struct SymmetryGrouping {
  std::vector<std::vector<std::size_t>> orbits;  // indices into the basis

  std::size_t orbit_count() const { return orbits.size(); }
  static SymmetryGrouping singletons(std::size_t basis_size);
};

/// Orbits of `basis` under the group generated by `generators`.  Every
/// generator must map `hamiltonian` onto itself term-by-term (coefficients
/// included, tolerance 1e-12 relative); offenders are rejected with
/// std::invalid_argument.  A generator mapping a basis string outside the
/// basis is likewise rejected.
SymmetryGrouping detect_orbits(std::span<const PauliString> basis,
                               const std::vector<SitePermutation>& generators,
                               const PauliOperator& hamiltonian);

/// Cyclic shift by one site and spatial inversion on n sites.
SitePermutation shift_permutation(int n_sites);
SitePermutation reflection_permutation(int n_sites);

}  // namespace agpforge
