#include "agpforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace agpforge {

Schedule Schedule::linear(double a, double b, double t_final) {
  return {[a, b, t_final](double t) { return a + (b - a) * t / t_final; },
          [a, b, t_final](double) { return (b - a) / t_final; }, t_final};
}

Schedule Schedule::annealing(double t_final) { return linear(0.0, 1.0, t_final); }

Schedule Schedule::cosine(double a, double b, double t_final) {
  const double pi = std::numbers::pi;
  return {[=](double t) { return a + 0.5 * (b - a) * (1.0 - std::cos(pi * t / t_final)); },
          [=](double t) { return 0.5 * (b - a) * (pi / t_final) * std::sin(pi * t / t_final); },
          t_final};
}

Schedule Schedule::constant(double value, double t_final) {
  return {[value](double) { return value; }, [](double) { return 0.0; }, t_final};
}

ParametricHamiltonian::ParametricHamiltonian(std::vector<PauliString> basis, CoeffFn coeffs,
                                             CoeffFn dcoeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)), dcoeffs_(std::move(dcoeffs)) {
  if (basis_.empty()) throw std::invalid_argument("ParametricHamiltonian: empty basis");
  n_sites_ = basis_.front().n_sites();
  for (const auto& s : basis_)
    if (s.n_sites() != n_sites_)
      throw std::invalid_argument("ParametricHamiltonian: mixed site counts in basis");
}

std::vector<double> ParametricHamiltonian::coeffs_at(double lambda) const {
  auto h = coeffs_(lambda);
  if (h.size() != basis_.size())
    throw std::runtime_error("ParametricHamiltonian: coeffs length != basis length");
  return h;
}

std::vector<double> ParametricHamiltonian::dcoeffs_at(double lambda) const {
  if (dcoeffs_) {
    auto dh = dcoeffs_(lambda);
    if (dh.size() != basis_.size())
      throw std::runtime_error("ParametricHamiltonian: dcoeffs length != basis length");
    return dh;
  }
  const double step = 1e-6 * std::max(1.0, std::abs(lambda));
  auto hp = coeffs_at(lambda + step);
  auto hm = coeffs_at(lambda - step);
  std::vector<double> dh(hp.size());
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] = (hp[i] - hm[i]) / (2.0 * step);
  return dh;
}

PauliOperator ParametricHamiltonian::operator_at(double lambda) const {
  PauliOperator op(n_sites_);
  const auto h = coeffs_at(lambda);
  for (std::size_t i = 0; i < basis_.size(); ++i) op.add_term(basis_[i], h[i]);
  op.prune();
  return op;
}

PauliOperator ParametricHamiltonian::derivative_at(double lambda) const {
  PauliOperator op(n_sites_);
  const auto dh = dcoeffs_at(lambda);
  for (std::size_t i = 0; i < basis_.size(); ++i) op.add_term(basis_[i], dh[i]);
  op.prune();
  return op;
}

CoeffSchedule CoeffSchedule::constant(double c) {
  return {[c](double) { return c; }, [](double) { return 0.0; }};
}

CoeffSchedule CoeffSchedule::linear(double a, double b) {
  return {[a, b](double x) { return a + b * x; }, [b](double) { return b; }};
}

CoeffSchedule CoeffSchedule::cosine(double amp, double freq, double phase) {
  return {[=](double x) { return amp * std::cos(freq * x + phase); },
          [=](double x) { return -amp * freq * std::sin(freq * x + phase); }};
}

CoeffSchedule CoeffSchedule::identity() { return linear(0.0, 1.0); }

ParametricHamiltonian single_spin_system(CoeffSchedule h_x, CoeffSchedule h_y, CoeffSchedule h_z) {
  std::vector<PauliString> basis = {PauliString::from_text("X"), PauliString::from_text("Y"),
                                    PauliString::from_text("Z")};
  auto coeffs = [h_x, h_y, h_z](double l) {
    return std::vector<double>{h_x.value(l), h_y.value(l), h_z.value(l)};
  };
  auto dcoeffs = [h_x, h_y, h_z](double l) {
    return std::vector<double>{h_x.derivative(l), h_y.derivative(l), h_z.derivative(l)};
  };
  return ParametricHamiltonian(std::move(basis), coeffs, dcoeffs);
}

ParametricHamiltonian two_spin_system(double chi0, CoeffSchedule delta, double omega0) {
  std::vector<PauliString> basis = {
      PauliString::from_text("ZZ"), PauliString::from_text("ZI"), PauliString::from_text("IZ"),
      PauliString::from_text("XI"), PauliString::from_text("IX")};
  auto coeffs = [chi0, delta, omega0](double l) {
    const double d = delta.value(l);
    return std::vector<double>{chi0, d, d, omega0, omega0};
  };
  auto dcoeffs = [delta](double l) {
    const double dd = delta.derivative(l);
    return std::vector<double>{0.0, dd, dd, 0.0, 0.0};
  };
  return ParametricHamiltonian(std::move(basis), coeffs, dcoeffs);
}

ParametricHamiltonian transverse_ising_chain(int n_sites, CoeffSchedule g) {
  if (n_sites < 3) throw std::invalid_argument("transverse_ising_chain: L must be >= 3");
  std::vector<PauliString> basis;
  basis.reserve(2 * static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) {
    PauliString zz(n_sites);
    zz.set_pauli(i, 'Z');
    zz.set_pauli((i + 1) % n_sites, 'Z');
    basis.push_back(zz);
  }
  for (int i = 0; i < n_sites; ++i) basis.push_back(PauliString::single(n_sites, i, 'X'));
  const int L = n_sites;
  auto coeffs = [g, L](double l) {
    const double gv = g.value(l);
    std::vector<double> h(static_cast<std::size_t>(2 * L));
    for (int i = 0; i < L; ++i) h[static_cast<std::size_t>(i)] = -gv;
    for (int i = 0; i < L; ++i) h[static_cast<std::size_t>(L + i)] = -(1.0 - gv);
    return h;
  };
  auto dcoeffs = [g, L](double l) {
    const double dg = g.derivative(l);
    std::vector<double> dh(static_cast<std::size_t>(2 * L));
    for (int i = 0; i < L; ++i) dh[static_cast<std::size_t>(i)] = -dg;
    for (int i = 0; i < L; ++i) dh[static_cast<std::size_t>(L + i)] = dg;
    return dh;
  };
  return ParametricHamiltonian(std::move(basis), coeffs, dcoeffs);
}

SymmetryGrouping SymmetryGrouping::singletons(std::size_t basis_size) {
  SymmetryGrouping g;
  g.orbits.reserve(basis_size);
  for (std::size_t i = 0; i < basis_size; ++i) g.orbits.push_back({i});
  return g;
}

namespace {

bool preserves_operator(const PauliOperator& op, const SitePermutation& perm) {
  const double tol = 1e-12 * std::max(1.0, op.max_abs_coeff());
  for (const auto& [s, c] : op.terms()) {
    const PauliString mapped = permute_sites(s, perm);
    if (std::abs(op.coeff(mapped) - c) > tol) return false;
  }
  return true;
}

}  // namespace

SymmetryGrouping detect_orbits(std::span<const PauliString> basis,
                               const std::vector<SitePermutation>& generators,
                               const PauliOperator& hamiltonian) {
  for (const auto& perm : generators) {
    if (static_cast<int>(perm.size()) != hamiltonian.n_sites())
      throw std::invalid_argument("detect_orbits: permutation size != n_sites");
    SitePermutation sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] != static_cast<int>(i))
        throw std::invalid_argument("detect_orbits: generator is not a permutation");
    if (!preserves_operator(hamiltonian, perm))
      throw std::invalid_argument("detect_orbits: generator does not preserve the Hamiltonian");
  }

  std::map<PauliString, std::size_t> index;
  for (std::size_t i = 0; i < basis.size(); ++i) index.emplace(basis[i], i);
  if (index.size() != basis.size())
    throw std::invalid_argument("detect_orbits: basis contains duplicates");

  std::vector<bool> seen(basis.size(), false);
  SymmetryGrouping grouping;
  for (std::size_t start = 0; start < basis.size(); ++start) {
    if (seen[start]) continue;
    // BFS closure of {start} under the generators.
    std::vector<std::size_t> orbit = {start};
    seen[start] = true;
    for (std::size_t head = 0; head < orbit.size(); ++head) {
      for (const auto& perm : generators) {
        const PauliString mapped = permute_sites(basis[orbit[head]], perm);
        auto it = index.find(mapped);
        if (it == index.end())
          throw std::invalid_argument(
              "detect_orbits: generator maps a basis string outside the basis");
        if (!seen[it->second]) {
          seen[it->second] = true;
          orbit.push_back(it->second);
        }
      }
    }
    std::sort(orbit.begin(), orbit.end());
    grouping.orbits.push_back(std::move(orbit));
  }
  return grouping;
}

SitePermutation shift_permutation(int n_sites) {
  SitePermutation p(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) p[static_cast<std::size_t>(i)] = (i + 1) % n_sites;
  return p;
}

SitePermutation reflection_permutation(int n_sites) {
  SitePermutation p(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) p[static_cast<std::size_t>(i)] = n_sites - 1 - i;
  return p;
}

}  // namespace agpforge
