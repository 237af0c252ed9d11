#include "agpforge/spectral.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pauli_action.hpp"

namespace agpforge {

namespace {

using Complex = std::complex<double>;
using detail::IndexMasks;
using detail::index_masks;

}  // namespace

DenseMatrix to_dense(const PauliOperator& op, int site_cap) {
  const int n = op.n_sites();
  if (n > site_cap) throw std::invalid_argument("to_dense: n_sites exceeds the dense cap");
  const std::int64_t dim = std::int64_t{1} << n;
  DenseMatrix m = DenseMatrix::Zero(dim, dim);
  for (const auto& [s, c] : op.terms()) {
    const IndexMasks im = index_masks(s);
    for (std::int64_t col = 0; col < dim; ++col) {
      const auto row = static_cast<std::int64_t>(static_cast<std::uint64_t>(col) ^ im.x);
      const int zpar = std::popcount(static_cast<std::uint64_t>(col) & im.z) & 1;
      m(row, col) += c * im.phase * (zpar ? -1.0 : 1.0);
    }
  }
  return m;
}

Eigen::VectorXcd apply_operator(const PauliOperator& op, const Eigen::VectorXcd& psi) {
  const auto dim = psi.size();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
  for (const auto& [s, c] : op.terms()) {
    const IndexMasks im = index_masks(s);
    const Complex factor = c * im.phase;
    for (std::int64_t b = 0; b < dim; ++b) {
      const int zpar = std::popcount(static_cast<std::uint64_t>(b) & im.z) & 1;
      out(static_cast<std::int64_t>(static_cast<std::uint64_t>(b) ^ im.x)) +=
          factor * (zpar ? -psi(b) : psi(b));
    }
  }
  return out;
}

namespace {

// Fix phases of `spec.states` so the overlap with the best-matching reference
// column is real positive.
void gauge_match(Spectrum& spec, const Spectrum& ref) {
  const int dim = spec.dimension();
  for (int j = 0; j < dim; ++j) {
    int best = 0;
    double best_mag = -1.0;
    for (int k = 0; k < dim; ++k) {
      const double mag = std::abs(ref.states.col(k).dot(spec.states.col(j)));
      if (mag > best_mag) {
        best_mag = mag;
        best = k;
      }
    }
    const Complex ov = ref.states.col(best).dot(spec.states.col(j));
    if (std::abs(ov) > 0.0) spec.states.col(j) *= std::conj(ov) / std::abs(ov);
  }
}

}  // namespace

Spectrum diagonalize(const DenseMatrix& h, const Spectrum* gauge_ref, double gap_tol) {
  if (h.rows() != h.cols()) throw std::invalid_argument("diagonalize: matrix not square");
  const double herm_err = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("diagonalize: input is not Hermitian");

  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("diagonalize: solver failed");

  Spectrum spec;
  spec.energies = solver.eigenvalues();
  spec.states = solver.eigenvectors();
  spec.min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i + 1 < spec.dimension(); ++i)
    spec.min_gap = std::min(spec.min_gap, spec.energies(i + 1) - spec.energies(i));
  spec.degenerate = spec.dimension() > 1 && spec.min_gap < gap_tol;
  if (gauge_ref != nullptr) gauge_match(spec, *gauge_ref);
  return spec;
}

DenseMatrix exact_agp(const Spectrum& below, const Spectrum& above, double dlambda) {
  if (below.degenerate || above.degenerate)
    throw std::invalid_argument("exact_agp: degenerate spectrum (gauge matching unreliable)");
  if (below.dimension() != above.dimension())
    throw std::invalid_argument("exact_agp: dimension mismatch");
  Spectrum matched = above;
  gauge_match(matched, below);

  const int dim = below.dimension();
  DenseMatrix a = DenseMatrix::Zero(dim, dim);
  const Complex i_unit(0.0, 1.0);
  for (int n = 0; n < dim; ++n) {
    Eigen::VectorXcd mid = below.states.col(n) + matched.states.col(n);
    mid.normalize();
    const Eigen::VectorXcd dn = (matched.states.col(n) - below.states.col(n)) / (2.0 * dlambda);
    const Eigen::VectorXcd proj = dn - mid * mid.dot(dn);
    a += i_unit * proj * mid.adjoint();
  }
  return 0.5 * (a + a.adjoint().eval());
}

DenseMatrix exact_agp_perturbative(const Spectrum& center, const DenseMatrix& dh) {
  const int dim = center.dimension();
  const DenseMatrix dh_eig = center.states.adjoint() * dh * center.states;
  DenseMatrix a_eig = DenseMatrix::Zero(dim, dim);
  const Complex i_unit(0.0, 1.0);
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n < dim; ++n) {
      if (m == n) continue;
      const double denom = center.energies(n) - center.energies(m);
      if (denom == 0.0)
        throw std::invalid_argument("exact_agp_perturbative: exactly degenerate levels");
      a_eig(m, n) = i_unit * dh_eig(m, n) / denom;
    }
  }
  return center.states * a_eig * center.states.adjoint();
}

double geometric_tensor_sum(const Spectrum& below, const Spectrum& above, double dlambda,
                            double multiplet_tol_rel) {
  const int dim = below.dimension();
  if (above.dimension() != dim)
    throw std::invalid_argument("geometric_tensor_sum: dimension mismatch");

  // Reassemble the operators: the symmetric difference of H(lambda -+ d) is a
  // smooth O(d^2)-accurate derivative regardless of any level structure, and
  // the average pins the midpoint Hamiltonian.  The tensor then follows from
  // first-order perturbation theory with machine-accurate gaps, which stays
  // finite through level crossings inside the difference window.
  const DenseMatrix h_below =
      below.states * below.energies.asDiagonal().toDenseMatrix().cast<Complex>() *
      below.states.adjoint();
  const DenseMatrix h_above =
      above.states * above.energies.asDiagonal().toDenseMatrix().cast<Complex>() *
      above.states.adjoint();
  const DenseMatrix dh = (h_above - h_below) / (2.0 * dlambda);
  const Spectrum mid = diagonalize(0.5 * (h_above + h_below));

  const DenseMatrix dh_eig = mid.states.adjoint() * dh * mid.states;
  const double range = std::max(mid.energies(dim - 1) - mid.energies(0), 1e-300);
  double sum = 0.0;
  for (int n = 0; n < dim; ++n) {
    for (int m = 0; m < dim; ++m) {
      const double gap = mid.energies(m) - mid.energies(n);
      // exact multiplets are excluded: their internal elements are pure gauge
      if (std::abs(gap) <= multiplet_tol_rel * range) continue;
      sum += std::norm(dh_eig(m, n)) / (gap * gap);
    }
  }
  return sum;
}

DenseMatrix oracle_agp(const ParametricHamiltonian& h, double lambda, OracleOptions opt) {
  const double dl = opt.dlambda > 0.0 ? opt.dlambda : 1e-5 * std::max(1.0, std::abs(lambda));
  const Spectrum center = diagonalize(to_dense(h.operator_at(lambda)));

  if (center.min_gap < opt.small_gap) {
    return exact_agp_perturbative(center, to_dense(h.derivative_at(lambda)));
  }

  auto fd = [&](double step) {
    const Spectrum below = diagonalize(to_dense(h.operator_at(lambda - step)));
    const Spectrum above = diagonalize(to_dense(h.operator_at(lambda + step)));
    return exact_agp(below, above, step);
  };
  DenseMatrix a = fd(dl);
  if (opt.richardson_check) {
    const DenseMatrix a_half = fd(0.5 * dl);
    const double diff = (a - a_half).cwiseAbs().maxCoeff();
    const double scale = std::max(1e-12, a_half.cwiseAbs().maxCoeff());
    // O(dlambda^2) convergence: halving the step should shrink the error ~4x.
    if (diff > 1e-3 * scale)
      throw std::runtime_error("oracle_agp: finite-difference step failed the Richardson check");
    a = a_half;
  }
  return a;
}

std::string spectrum_csv(const std::vector<std::pair<double, Spectrum>>& rows) {
  std::string out = "lambda";
  if (!rows.empty())
    for (int n = 0; n < rows.front().second.dimension(); ++n)
      out += ",E_" + std::to_string(n);
  out += "\n";
  char buf[64];
  for (const auto& [lambda, spec] : rows) {
    std::snprintf(buf, sizeof(buf), "%.12g", lambda);
    out += buf;
    for (int n = 0; n < spec.dimension(); ++n) {
      std::snprintf(buf, sizeof(buf), ",%.12g", spec.energies(n));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace agpforge
