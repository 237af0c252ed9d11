#include "agpforge/ring.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "linear_solve.hpp"

namespace agpforge {

namespace {

// Per-site symbol codes for rotation-order comparisons.
std::vector<std::uint8_t> site_symbols(const PauliString& s) {
  const int n = s.n_sites();
  std::vector<std::uint8_t> sym(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    sym[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>((s.z_bit(i) << 1) | static_cast<int>(s.x_bit(i)));
  return sym;
}

// Booth's least-rotation: index k so that the rotation starting at k is
// lexicographically minimal.
int least_rotation(const std::vector<std::uint8_t>& s) {
  const int n = static_cast<int>(s.size());
  std::vector<int> f(static_cast<std::size_t>(2 * n), -1);
  int k = 0;
  for (int j = 1; j < 2 * n; ++j) {
    const std::uint8_t sj = s[static_cast<std::size_t>(j % n)];
    int i = f[static_cast<std::size_t>(j - k - 1)];
    while (i != -1 && sj != s[static_cast<std::size_t>((k + i + 1) % n)]) {
      if (sj < s[static_cast<std::size_t>((k + i + 1) % n)]) k = j - i - 1;
      i = f[static_cast<std::size_t>(i)];
    }
    if (sj != s[static_cast<std::size_t>((k + i + 1) % n)]) {
      if (sj < s[static_cast<std::size_t>((k + i + 1) % n)]) k = j;
      f[static_cast<std::size_t>(j - k)] = -1;
    } else {
      f[static_cast<std::size_t>(j - k)] = i + 1;
    }
  }
  return k % n;
}

bool masks_overlap(const PauliString& a, const PauliString& b) {
  auto ax = a.x_words(), az = a.z_words(), bx = b.x_words(), bz = b.z_words();
  for (std::size_t w = 0; w < ax.size(); ++w)
    if ((ax[w] | az[w]) & (bx[w] | bz[w])) return true;
  return false;
}

}  // namespace

PauliString canonical_rotation(const PauliString& s, int* shift_out) {
  const int n = s.n_sites();
  const int k = least_rotation(site_symbols(s));
  const int shift = (n - k) % n;
  if (shift_out != nullptr) *shift_out = shift;
  return rotate_sites(s, shift);
}

int pattern_period(const PauliString& p) {
  const int n = p.n_sites();
  for (int d = 1; d < n; ++d) {
    if (n % d != 0) continue;
    if (rotate_sites(p, d) == p) return d;
  }
  return n;
}

void RingOperator::add_pattern(const PauliString& p, double coeff) {
  if (p.n_sites() != n_sites_) throw std::invalid_argument("RingOperator: site-count mismatch");
  patterns_[canonical_rotation(p)] += coeff;
}

RingOperator& RingOperator::operator+=(const RingOperator& rhs) {
  if (rhs.n_sites_ != n_sites_) throw std::invalid_argument("RingOperator: site-count mismatch");
  for (const auto& [p, c] : rhs.patterns_) patterns_[p] += c;
  prune();
  return *this;
}

RingOperator& RingOperator::operator*=(double factor) {
  for (auto& [p, c] : patterns_) c *= factor;
  return *this;
}

double RingOperator::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [p, c] : patterns_) m = std::max(m, std::abs(c));
  return m;
}

void RingOperator::prune(double rel) {
  const double cutoff = rel * max_abs_coeff();
  for (auto it = patterns_.begin(); it != patterns_.end();) {
    if (std::abs(it->second) <= cutoff) {
      it = patterns_.erase(it);
    } else {
      ++it;
    }
  }
}

PauliOperator RingOperator::expand() const {
  PauliOperator out(n_sites_);
  for (const auto& [p, c] : patterns_)
    for (int i = 0; i < n_sites_; ++i) out.add_term(rotate_sites(p, i), c);
  out.prune();
  return out;
}

RingOperator ring_commutator(const RingOperator& a, const RingOperator& b, double prune_rel) {
  if (a.n_sites() != b.n_sites())
    throw std::invalid_argument("ring_commutator: site-count mismatch");
  const int n = a.n_sites();
  RingOperator out(n);
  for (const auto& [pb, cb] : b.patterns()) {
    // all ring placements of the b pattern, built once
    std::vector<PauliString> placed;
    placed.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) placed.push_back(rotate_sites(pb, k));
    for (const auto& [pa, ca] : a.patterns()) {
      for (int k = 0; k < n; ++k) {
        const PauliString& bk = placed[static_cast<std::size_t>(k)];
        if (!masks_overlap(pa, bk)) continue;  // disjoint supports commute
        if (commutes(pa, bk)) continue;
        const PhasedString prod = multiply(pa, bk);
        const double sign = (prod.phase_power == 1) ? 2.0 : -2.0;
        out.add_pattern(prod.string, sign * ca * cb);
      }
    }
  }
  out.prune(prune_rel);
  return out;
}

double ring_ntp(const RingOperator& a, const RingOperator& b) {
  if (a.n_sites() != b.n_sites()) throw std::invalid_argument("ring_ntp: site-count mismatch");
  const double n = a.n_sites();
  const auto& small = a.pattern_count() <= b.pattern_count() ? a : b;
  const auto& large = a.pattern_count() <= b.pattern_count() ? b : a;
  double sum = 0.0;
  for (const auto& [p, c] : small.patterns()) {
    auto it = large.patterns().find(p);
    if (it == large.patterns().end()) continue;
    sum += c * it->second * n * (n / pattern_period(p));
  }
  return sum;
}

RingOperator ring_ising(int n_sites, double g) {
  if (n_sites < 3) throw std::invalid_argument("ring_ising: L must be >= 3");
  RingOperator h(n_sites);
  PauliString zz(n_sites);
  zz.set_pauli(0, 'Z');
  zz.set_pauli(1, 'Z');
  h.add_pattern(zz, -g);
  h.add_pattern(PauliString::single(n_sites, 0, 'X'), -(1.0 - g));
  h.prune();
  return h;
}

RingOperator ring_ising_derivative(int n_sites) {
  RingOperator dh(n_sites);
  PauliString zz(n_sites);
  zz.set_pauli(0, 'Z');
  zz.set_pauli(1, 'Z');
  dh.add_pattern(zz, -1.0);
  dh.add_pattern(PauliString::single(n_sites, 0, 'X'), 1.0);
  return dh;
}

int RingBasis::orbit_order(std::size_t orbit) const {
  return patterns.at(orbits.at(orbit).front()).x_count();
}

RingBasis RingBasis::restricted_to_order(int k_max_order) const {
  RingBasis out;
  out.n_sites = n_sites;
  out.depth_generated = depth_generated;
  std::vector<std::vector<PauliString>> kept;
  for (std::size_t o = 0; o < orbits.size(); ++o) {
    if (orbit_order(o) > k_max_order) continue;
    auto& group = kept.emplace_back();
    for (std::size_t i : orbits[o]) group.push_back(patterns[i]);
  }
  std::set<PauliString> all;
  for (const auto& group : kept) all.insert(group.begin(), group.end());
  out.patterns.assign(all.begin(), all.end());
  for (const auto& group : kept) {
    std::vector<std::size_t> idx;
    for (const auto& p : group) {
      const auto it = std::lower_bound(out.patterns.begin(), out.patterns.end(), p);
      idx.push_back(static_cast<std::size_t>(it - out.patterns.begin()));
    }
    std::sort(idx.begin(), idx.end());
    out.orbits.push_back(std::move(idx));
  }
  return out;
}

RingOperator RingBasis::orbit_operator(std::size_t orbit) const {
  RingOperator op(n_sites);
  for (std::size_t i : orbits.at(orbit)) op.add_pattern(patterns[i], 1.0);
  return op;
}

RingBasis ring_generate_basis(const RingOperator& h, const RingOperator& dh, BasisOptions opt) {
  const int n = h.n_sites();
  const int k_max = opt.k_max > 0 ? opt.k_max : 2 * n;

  std::set<PauliString> collected;
  RingOperator current = dh;
  int depth = 0;
  for (int level = 1; level <= 2 * k_max - 1; ++level) {
    current = ring_commutator(h, current, 0.0);
    if (current.empty()) break;
    current *= 1.0 / current.max_abs_coeff();
    if (level % 2 == 0) continue;
    ++depth;
    bool added = false;
    for (const auto& [p, c] : current.patterns()) {
      if (p.is_identity()) continue;
      if (collected.insert(p).second) added = true;
    }
    if (collected.size() * static_cast<std::size_t>(n) > opt.string_cap)
      throw std::runtime_error("ring_generate_basis: basis exceeded the string cap");
    if (!added) break;
  }

  RingBasis basis;
  basis.n_sites = n;
  basis.depth_generated = depth;
  for (const auto& p : collected) {
    // keep patterns whose orbit-sum actually moves under H
    bool moves = false;
    for (const auto& [hp, c] : h.patterns()) {
      for (int k = 0; k < n && !moves; ++k) {
        const PauliString hk = rotate_sites(hp, k);
        if (masks_overlap(p, hk) && !commutes(p, hk)) moves = true;
      }
      if (moves) break;
    }
    if (!moves) continue;
    if (pattern_period(p) != n)
      throw std::runtime_error(
          "ring_generate_basis: periodic basis pattern " + p.text() +
          "; orbit-sum weights would diverge from the plain grouped solve");
    basis.patterns.push_back(p);
  }

  // reflection pairing when spatial inversion preserves the Hamiltonian
  bool reflection_ok = true;
  for (const auto& [hp, c] : h.patterns()) {
    const PauliString r = canonical_rotation(reflect_sites(hp));
    auto it = h.patterns().find(r);
    if (it == h.patterns().end() || std::abs(it->second - c) > 1e-12 * std::max(1.0, std::abs(c))) {
      reflection_ok = false;
      break;
    }
  }
  std::vector<bool> seen(basis.patterns.size(), false);
  for (std::size_t i = 0; i < basis.patterns.size(); ++i) {
    if (seen[i]) continue;
    std::vector<std::size_t> orbit = {i};
    seen[i] = true;
    if (reflection_ok) {
      const PauliString partner = canonical_rotation(reflect_sites(basis.patterns[i]));
      const auto it = std::lower_bound(basis.patterns.begin(), basis.patterns.end(), partner);
      if (it != basis.patterns.end() && *it == partner) {
        const auto j = static_cast<std::size_t>(it - basis.patterns.begin());
        if (j != i && !seen[j]) {
          seen[j] = true;
          orbit.push_back(j);
        }
      }
    }
    std::sort(orbit.begin(), orbit.end());
    basis.orbits.push_back(std::move(orbit));
  }
  return basis;
}

RingOperator RingSolution::operator_ring() const {
  RingOperator a(basis.n_sites);
  for (std::size_t o = 0; o < basis.orbit_count(); ++o) {
    const double c = alpha(static_cast<Eigen::Index>(o));
    if (c == 0.0) continue;
    for (std::size_t i : basis.orbits[o]) a.add_pattern(basis.patterns[i], c);
  }
  a.prune();
  return a;
}

double RingSolution::hs_norm_per_dim_sq() const {
  const RingOperator a = operator_ring();
  return ring_ntp(a, a);
}

AgpBasis to_agp_basis(const RingBasis& basis) {
  AgpBasis out;
  out.n_sites = basis.n_sites;
  out.depth_generated = basis.depth_generated;
  std::set<PauliString> all;
  std::vector<std::vector<PauliString>> orbit_strings;
  for (const auto& orbit : basis.orbits) {
    auto& group = orbit_strings.emplace_back();
    for (std::size_t i : orbit)
      for (int k = 0; k < basis.n_sites; ++k) {
        const PauliString s = rotate_sites(basis.patterns[i], k);
        all.insert(s);
        group.push_back(s);
      }
  }
  out.strings.assign(all.begin(), all.end());
  SymmetryGrouping grouping;
  for (const auto& group : orbit_strings) {
    std::vector<std::size_t> idx;
    for (const auto& s : group) {
      const auto it = std::lower_bound(out.strings.begin(), out.strings.end(), s);
      idx.push_back(static_cast<std::size_t>(it - out.strings.begin()));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    grouping.orbits.push_back(std::move(idx));
  }
  out.grouping = std::move(grouping);
  return out;
}

RingSolution ring_solve(const RingOperator& h, const RingOperator& dh, const RingBasis& basis) {
  RingSolution sol;
  sol.basis = basis;
  const auto n_orbits = static_cast<Eigen::Index>(basis.orbit_count());
  if (n_orbits == 0) {
    sol.mode = SolveMode::exact;
    const RingOperator r = ring_commutator(h, dh);
    sol.residual_norm = std::sqrt(std::max(0.0, ring_ntp(r, r)));
    sol.g_norm = std::sqrt(std::max(0.0, ring_ntp(dh, dh)));
    return sol;
  }

  const RingOperator d = ring_commutator(h, dh);
  std::vector<RingOperator> c_ops;
  c_ops.reserve(static_cast<std::size_t>(n_orbits));
  Eigen::VectorXd u(n_orbits), h_in(n_orbits);
  for (Eigen::Index o = 0; o < n_orbits; ++o) {
    const RingOperator s = basis.orbit_operator(static_cast<std::size_t>(o));
    c_ops.push_back(ring_commutator(h, s));
    u(o) = ring_ntp(d, s);
    h_in(o) = ring_ntp(h, s);
  }
  Eigen::MatrixXd m(n_orbits, n_orbits);
  for (Eigen::Index i = 0; i < n_orbits; ++i)
    for (Eigen::Index j = i; j < n_orbits; ++j) {
      const double v =
          ring_ntp(c_ops[static_cast<std::size_t>(i)], c_ops[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }

  detail::RankedSolve direct = detail::pinv_solve(m, u);
  sol.alpha = direct.alpha;
  sol.rank = direct.rank;
  sol.mode = SolveMode::exact;
  if (direct.rank < n_orbits) {
    const double h_norm2 = h_in.squaredNorm();
    bool repaired = false;
    if (h_norm2 > 0.0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
      const double scale = std::max(eig.eigenvalues().maxCoeff(), 1.0);
      const Eigen::MatrixXd shifted = m + (scale / h_norm2) * (h_in * h_in.transpose());
      if (detail::numerical_rank(shifted) == n_orbits) {
        sol.alpha = detail::pinv_solve(shifted, u).alpha;
        sol.mode = SolveMode::constrained;
        repaired = true;
      }
    }
    if (!repaired) sol.mode = SolveMode::restricted;
  }

  RingOperator g = dh;
  for (Eigen::Index o = 0; o < n_orbits; ++o) {
    if (sol.alpha(o) == 0.0) continue;
    RingOperator scaled = c_ops[static_cast<std::size_t>(o)];
    scaled *= sol.alpha(o);
    g += scaled;
  }
  const RingOperator r = ring_commutator(h, g);
  sol.residual_norm = std::sqrt(std::max(0.0, ring_ntp(r, r)));
  sol.g_norm = std::sqrt(std::max(0.0, ring_ntp(g, g)));
  return sol;
}

}  // namespace agpforge
