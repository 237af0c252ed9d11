#include "agpforge/agp.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "linear_solve.hpp"

namespace agpforge {

PauliOperator AgpBasis::orbit_operator(std::size_t orbit) const {
  PauliOperator op(n_sites);
  if (grouping) {
    for (std::size_t i : grouping->orbits.at(orbit)) op.add_term(strings.at(i), 1.0);
  } else {
    op.add_term(strings.at(orbit), 1.0);
  }
  return op;
}

std::string AgpBasis::orbit_label(std::size_t orbit) const {
  if (!grouping) return strings.at(orbit).text();
  const auto& members = grouping->orbits.at(orbit);
  std::string best = strings[members.front()].text();
  for (std::size_t i : members) best = std::min(best, strings[i].text());
  return best;
}

int AgpBasis::orbit_order(std::size_t orbit) const {
  const std::size_t rep = grouping ? grouping->orbits.at(orbit).front() : orbit;
  return strings.at(rep).x_count();
}

AgpBasis AgpBasis::restricted_to(const std::vector<std::size_t>& orbits) const {
  AgpBasis out;
  out.depth_generated = depth_generated;
  out.n_sites = n_sites;
  if (!grouping) {
    for (std::size_t o : orbits) out.strings.push_back(strings.at(o));
    std::sort(out.strings.begin(), out.strings.end());
    return out;
  }
  std::set<PauliString> kept;
  std::vector<std::vector<PauliString>> orbit_strings;
  for (std::size_t o : orbits) {
    auto& group = orbit_strings.emplace_back();
    for (std::size_t i : grouping->orbits.at(o)) {
      kept.insert(strings.at(i));
      group.push_back(strings.at(i));
    }
  }
  out.strings.assign(kept.begin(), kept.end());
  SymmetryGrouping g;
  for (const auto& group : orbit_strings) {
    std::vector<std::size_t> idx;
    for (const auto& s : group) {
      const auto it = std::lower_bound(out.strings.begin(), out.strings.end(), s);
      idx.push_back(static_cast<std::size_t>(it - out.strings.begin()));
    }
    std::sort(idx.begin(), idx.end());
    g.orbits.push_back(std::move(idx));
  }
  out.grouping = std::move(g);
  return out;
}

AgpBasis generate_basis(const PauliOperator& h, const PauliOperator& dh, BasisOptions opt) {
  if (h.n_sites() != dh.n_sites())
    throw std::invalid_argument("generate_basis: site-count mismatch");
  const int k_max = opt.k_max > 0 ? opt.k_max : 2 * h.n_sites();

  std::set<PauliString> collected;
  PauliOperator current = dh;  // zero nestings
  int depth = 0;
  for (int level = 1; level <= 2 * k_max - 1; ++level) {
    // unpruned: frontier strings carry exponentially small but legitimate
    // weights relative to the level maximum
    current = op_commutator(h, current, 0.0);
    if (current.empty()) break;
    current *= 1.0 / current.max_abs_coeff();  // only string membership matters
    if (level % 2 == 0) continue;
    ++depth;
    bool added = false;
    for (const auto& [s, c] : current.terms()) {
      if (s.is_identity()) continue;
      if (collected.insert(s).second) added = true;
    }
    if (collected.size() > opt.string_cap)
      throw std::runtime_error("generate_basis: basis exceeded the string cap (" +
                               std::to_string(opt.string_cap) + " strings) at nesting level " +
                               std::to_string(level));
    if (!added) break;  // closure: this odd level brought nothing new
  }

  AgpBasis basis;
  basis.depth_generated = depth;
  basis.n_sites = h.n_sites();
  for (const auto& s : collected) {
    bool moves = false;
    for (const auto& [t, c] : h.terms()) {
      if (!commutes(s, t)) {
        moves = true;
        break;
      }
    }
    if (moves) basis.strings.push_back(s);
  }
  return basis;
}

AgpBasis generate_basis(const ParametricHamiltonian& h, double lambda, BasisOptions opt) {
  return generate_basis(h.operator_at(lambda), h.derivative_at(lambda), opt);
}

AgpBasis generate_basis_multi(const ParametricHamiltonian& h, std::span<const double> probes,
                              BasisOptions opt) {
  std::set<PauliString> merged;
  int depth = 0;
  for (double lambda : probes) {
    AgpBasis b = generate_basis(h, lambda, opt);
    merged.insert(b.strings.begin(), b.strings.end());
    depth = std::max(depth, b.depth_generated);
  }
  AgpBasis out;
  out.strings.assign(merged.begin(), merged.end());
  out.depth_generated = depth;
  out.n_sites = h.n_sites();
  return out;
}

LinearSystem assemble_system(const PauliOperator& h, const PauliOperator& dh,
                             const AgpBasis& basis) {
  const auto n_orbits = static_cast<Eigen::Index>(basis.orbit_count());
  LinearSystem sys;
  sys.m.resize(n_orbits, n_orbits);
  sys.u.resize(n_orbits);
  sys.h_in_basis.resize(n_orbits);

  const PauliOperator d = op_commutator(h, dh);
  std::vector<PauliOperator> c_ops;
  c_ops.reserve(static_cast<std::size_t>(n_orbits));
  for (Eigen::Index o = 0; o < n_orbits; ++o) {
    const PauliOperator s = basis.orbit_operator(static_cast<std::size_t>(o));
    c_ops.push_back(op_commutator(h, s));
    sys.u(o) = normalized_trace_product(d, s);
    sys.h_in_basis(o) = normalized_trace_product(h, s);
  }
  for (Eigen::Index i = 0; i < n_orbits; ++i) {
    for (Eigen::Index j = i; j < n_orbits; ++j) {
      const double v = normalized_trace_product(c_ops[static_cast<std::size_t>(i)],
                                                c_ops[static_cast<std::size_t>(j)]);
      sys.m(i, j) = v;
      sys.m(j, i) = v;
    }
  }
  return sys;
}

std::string to_string(SolveMode mode) {
  switch (mode) {
    case SolveMode::exact: return "exact";
    case SolveMode::constrained: return "constrained";
    case SolveMode::restricted: return "restricted";
  }
  return "?";
}

namespace {

using detail::numerical_rank;
using detail::pinv_solve;

void attach_residuals(AgpSolution& sol, const PauliOperator& h, const PauliOperator& dh) {
  const PauliOperator a = agp_operator(sol);
  sol.residual_norm = residual(h, dh, a);
  sol.g_norm = g_norm(h, dh, a);
}

}  // namespace

AgpSolution solve_exact(const PauliOperator& h, const PauliOperator& dh, const AgpBasis& basis) {
  AgpSolution sol;
  sol.basis = basis;
  if (basis.strings.empty()) {
    // dH commutes with H up to diagonal parts; the zero operator is exact.
    sol.alpha.resize(0);
    sol.mode = SolveMode::exact;
    attach_residuals(sol, h, dh);
    return sol;
  }

  const LinearSystem sys = assemble_system(h, dh, basis);
  const auto dim = sys.u.size();

  detail::RankedSolve direct = pinv_solve(sys.m, sys.u);
  if (direct.rank == dim) {
    sol.alpha = direct.alpha;
    sol.rank = direct.rank;
    sol.mode = SolveMode::exact;
    attach_residuals(sol, h, dh);
    return sol;
  }

  // Deficient system (grouping, if any, is already folded into `basis`).
  // Repair: fix the diagonal part with Tr(H A) = 0 by shifting M along the
  // in-basis Hamiltonian direction, which leaves solutions obeying the
  // constraint untouched.
  const double h_norm2 = sys.h_in_basis.squaredNorm();
  if (h_norm2 > 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.m, Eigen::EigenvaluesOnly);
    const double scale = std::max(eig.eigenvalues().maxCoeff(), 1.0);
    const Eigen::MatrixXd shifted =
        sys.m + (scale / h_norm2) * (sys.h_in_basis * sys.h_in_basis.transpose());
    if (numerical_rank(shifted) == dim) {
      detail::RankedSolve repaired = pinv_solve(shifted, sys.u);
      sol.alpha = repaired.alpha;
      sol.rank = direct.rank;
      sol.mode = SolveMode::constrained;
      attach_residuals(sol, h, dh);
      return sol;
    }
  }

  sol.alpha = direct.alpha;
  sol.rank = direct.rank;
  sol.mode = SolveMode::restricted;
  attach_residuals(sol, h, dh);
  return sol;
}

AgpSolution solve_restricted(const PauliOperator& h, const PauliOperator& dh,
                             const AgpBasis& restricted, const AgpBasis* full,
                             bool allow_exploratory) {
  if (restricted.strings.empty() && restricted.orbit_count() == 0)
    throw std::invalid_argument("solve_restricted: empty basis");
  if (!allow_exploratory) {
    AgpBasis generated;
    const AgpBasis* reference = full;
    if (reference == nullptr) {
      generated = generate_basis(h, dh);
      reference = &generated;
    }
    for (const auto& s : restricted.strings) {
      if (!std::binary_search(reference->strings.begin(), reference->strings.end(), s))
        throw std::invalid_argument("solve_restricted: string " + s.text() +
                                    " is not part of the AGP basis (pass allow_exploratory to "
                                    "override)");
    }
  }

  const LinearSystem sys = assemble_system(h, dh, restricted);
  detail::RankedSolve ls = pinv_solve(sys.m, sys.u);
  AgpSolution sol;
  sol.basis = restricted;
  sol.alpha = ls.alpha;
  sol.rank = ls.rank;
  sol.mode = SolveMode::restricted;
  attach_residuals(sol, h, dh);
  return sol;
}

AgpSolution truncate_exact(const PauliOperator& h, const PauliOperator& dh,
                           const AgpSolution& full, const std::vector<std::size_t>& keep) {
  if (full.mode == SolveMode::restricted)
    throw std::invalid_argument("truncate_exact: input solution is not an exact AGP");
  AgpSolution out = full;
  out.alpha = Eigen::VectorXd::Zero(full.alpha.size());
  for (std::size_t o : keep) {
    if (o >= static_cast<std::size_t>(full.alpha.size()))
      throw std::out_of_range("truncate_exact: orbit index out of range");
    out.alpha(static_cast<Eigen::Index>(o)) = full.alpha(static_cast<Eigen::Index>(o));
  }
  out.mode = SolveMode::restricted;
  attach_residuals(out, h, dh);
  return out;
}

namespace {

PauliOperator expand_alpha(const AgpBasis& basis, const Eigen::VectorXd& alpha) {
  PauliOperator a(std::max(1, basis.n_sites));
  for (std::size_t o = 0; o < basis.orbit_count(); ++o) {
    const double c = alpha(static_cast<Eigen::Index>(o));
    if (c == 0.0) continue;
    if (basis.grouping) {
      for (std::size_t i : basis.grouping->orbits[o]) a.add_term(basis.strings[i], c);
    } else {
      a.add_term(basis.strings[o], c);
    }
  }
  a.prune();
  return a;
}

}  // namespace

PauliOperator agp_operator(const AgpSolution& sol) { return expand_alpha(sol.basis, sol.alpha); }

double residual(const PauliOperator& h, const PauliOperator& dh, const PauliOperator& a) {
  PauliOperator g = dh;
  if (!a.empty()) g += op_commutator(h, a);
  return hs_norm_per_dim(op_commutator(h, g));
}

double g_norm(const PauliOperator& h, const PauliOperator& dh, const PauliOperator& a) {
  PauliOperator g = dh;
  if (!a.empty()) g += op_commutator(h, a);
  return hs_norm_per_dim(g);
}

std::string serialize_json(const AgpSolution& sol) {
  nlohmann::json j;
  j["basis"] = nlohmann::json::array();
  for (const auto& s : sol.basis.strings) j["basis"].push_back(s.text());
  j["orbits"] = nlohmann::json::array();
  if (sol.basis.grouping) {
    for (const auto& orbit : sol.basis.grouping->orbits) j["orbits"].push_back(orbit);
  } else {
    for (std::size_t i = 0; i < sol.basis.strings.size(); ++i)
      j["orbits"].push_back(std::vector<std::size_t>{i});
  }
  j["alpha"] = std::vector<double>(sol.alpha.data(), sol.alpha.data() + sol.alpha.size());
  j["rank"] = sol.rank;
  j["residual_norm"] = sol.residual_norm;
  j["g_norm"] = sol.g_norm;
  j["mode"] = to_string(sol.mode);
  j["depth_generated"] = sol.basis.depth_generated;
  return j.dump();
}

CompiledAgpSolver::CompiledAgpSolver(std::vector<PauliString> h_strings, AgpBasis basis)
    : h_strings_(std::move(h_strings)), basis_(std::move(basis)) {
  n_orbits_ = static_cast<Eigen::Index>(basis_.orbit_count());
  n_terms_ = static_cast<Eigen::Index>(h_strings_.size());
  const int n = basis_.n_sites;

  // C_{mu,o} = -i[B_mu, S_o]; all lambda dependence is in the coefficients.
  std::vector<PauliOperator> c(static_cast<std::size_t>(n_terms_ * n_orbits_),
                               PauliOperator(n));
  std::vector<PauliOperator> orbit_ops;
  for (Eigen::Index o = 0; o < n_orbits_; ++o)
    orbit_ops.push_back(basis_.orbit_operator(static_cast<std::size_t>(o)));
  for (Eigen::Index m = 0; m < n_terms_; ++m) {
    PauliOperator bm(n);
    bm.add_term(h_strings_[static_cast<std::size_t>(m)], 1.0);
    for (Eigen::Index o = 0; o < n_orbits_; ++o)
      c[static_cast<std::size_t>(m * n_orbits_ + o)] =
          op_commutator(bm, orbit_ops[static_cast<std::size_t>(o)]);
  }

  q_.assign(static_cast<std::size_t>(n_terms_ * n_terms_),
            Eigen::MatrixXd::Zero(n_orbits_, n_orbits_));
  u_.assign(static_cast<std::size_t>(n_terms_ * n_terms_), Eigen::VectorXd::Zero(n_orbits_));
  for (Eigen::Index m = 0; m < n_terms_; ++m) {
    PauliOperator bm(n);
    bm.add_term(h_strings_[static_cast<std::size_t>(m)], 1.0);
    for (Eigen::Index v = 0; v < n_terms_; ++v) {
      auto& q = q_[static_cast<std::size_t>(m * n_terms_ + v)];
      for (Eigen::Index i = 0; i < n_orbits_; ++i)
        for (Eigen::Index j = 0; j < n_orbits_; ++j)
          q(i, j) = normalized_trace_product(c[static_cast<std::size_t>(m * n_orbits_ + i)],
                                             c[static_cast<std::size_t>(v * n_orbits_ + j)]);
      PauliOperator bv(n);
      bv.add_term(h_strings_[static_cast<std::size_t>(v)], 1.0);
      const PauliOperator k = op_commutator(bm, bv);
      auto& u = u_[static_cast<std::size_t>(m * n_terms_ + v)];
      for (Eigen::Index o = 0; o < n_orbits_; ++o)
        u(o) = normalized_trace_product(k, orbit_ops[static_cast<std::size_t>(o)]);
    }
  }

  h_in_.resize(n_orbits_, n_terms_);
  for (Eigen::Index o = 0; o < n_orbits_; ++o)
    for (Eigen::Index m = 0; m < n_terms_; ++m) {
      PauliOperator bm(n);
      bm.add_term(h_strings_[static_cast<std::size_t>(m)], 1.0);
      h_in_(o, m) = normalized_trace_product(bm, orbit_ops[static_cast<std::size_t>(o)]);
    }
}

Eigen::VectorXd CompiledAgpSolver::solve(std::span<const double> h, std::span<const double> dh,
                                         SolveMode* mode_out, bool constraint_repair) const {
  if (static_cast<Eigen::Index>(h.size()) != n_terms_ ||
      static_cast<Eigen::Index>(dh.size()) != n_terms_)
    throw std::invalid_argument("CompiledAgpSolver: coefficient length mismatch");

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_orbits_, n_orbits_);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n_orbits_);
  for (Eigen::Index a = 0; a < n_terms_; ++a) {
    if (h[static_cast<std::size_t>(a)] == 0.0) continue;
    for (Eigen::Index b = 0; b < n_terms_; ++b) {
      const double hh = h[static_cast<std::size_t>(a)] * h[static_cast<std::size_t>(b)];
      if (hh != 0.0) m.noalias() += hh * q_[static_cast<std::size_t>(a * n_terms_ + b)];
      const double hd = h[static_cast<std::size_t>(a)] * dh[static_cast<std::size_t>(b)];
      if (hd != 0.0) u.noalias() += hd * u_[static_cast<std::size_t>(a * n_terms_ + b)];
    }
  }

  detail::RankedSolve direct = detail::pinv_solve(m, u);
  SolveMode mode = SolveMode::exact;
  Eigen::VectorXd alpha = direct.alpha;
  if (direct.rank < n_orbits_ && constraint_repair) {
    mode = SolveMode::restricted;
    const Eigen::VectorXd h_vec =
        h_in_ * Eigen::Map<const Eigen::VectorXd>(h.data(), n_terms_);
    const double h_norm2 = h_vec.squaredNorm();
    if (h_norm2 > 0.0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
      const double scale = std::max(eig.eigenvalues().maxCoeff(), 1.0);
      const Eigen::MatrixXd shifted = m + (scale / h_norm2) * (h_vec * h_vec.transpose());
      if (detail::numerical_rank(shifted) == n_orbits_) {
        alpha = detail::pinv_solve(shifted, u).alpha;
        mode = SolveMode::constrained;
      }
    }
  }
  if (direct.rank < n_orbits_ && !constraint_repair) mode = SolveMode::restricted;
  if (mode_out != nullptr) *mode_out = mode;
  return alpha;
}

namespace {

AgpField cached_field(std::function<PauliOperator(double)> compute) {
  auto cache = std::make_shared<std::vector<std::pair<double, PauliOperator>>>();
  return [cache, compute = std::move(compute)](double lambda) {
    for (const auto& [l, op] : *cache)
      if (l == lambda) return op;
    PauliOperator op = compute(lambda);
    if (cache->size() >= 8) cache->erase(cache->begin());
    cache->emplace_back(lambda, op);
    return op;
  };
}

}  // namespace

AgpField make_exact_cd(const ParametricHamiltonian& h, AgpBasis basis) {
  auto solver = std::make_shared<CompiledAgpSolver>(h.basis(), std::move(basis));
  return cached_field([h, solver](double lambda) {
    const Eigen::VectorXd alpha = solver->solve(h.coeffs_at(lambda), h.dcoeffs_at(lambda));
    return expand_alpha(solver->basis(), alpha);
  });
}

AgpField make_truncated_cd(const ParametricHamiltonian& h, AgpBasis basis,
                           std::vector<std::size_t> keep) {
  auto solver = std::make_shared<CompiledAgpSolver>(h.basis(), std::move(basis));
  return cached_field([h, solver, keep = std::move(keep)](double lambda) {
    const Eigen::VectorXd full = solver->solve(h.coeffs_at(lambda), h.dcoeffs_at(lambda));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(full.size());
    for (std::size_t o : keep) alpha(static_cast<Eigen::Index>(o)) = full(static_cast<Eigen::Index>(o));
    return expand_alpha(solver->basis(), alpha);
  });
}

AgpField make_restricted_cd(const ParametricHamiltonian& h, AgpBasis restricted) {
  // Bases handed to this factory come from restricted_to() on a generated
  // basis, so the subset precondition holds by construction.  The compiled
  // minimum-norm solve on the sub-basis is exactly the variational solution.
  auto solver = std::make_shared<CompiledAgpSolver>(h.basis(), std::move(restricted));
  return cached_field([h, solver](double lambda) {
    const Eigen::VectorXd alpha = solver->solve(h.coeffs_at(lambda), h.dcoeffs_at(lambda),
                                                nullptr, /*constraint_repair=*/false);
    return expand_alpha(solver->basis(), alpha);
  });
}

}  // namespace agpforge
