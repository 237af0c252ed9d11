#include "agpforge/qsl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agpforge {

namespace {

double state_sigma(const PauliOperator& diff, const Eigen::VectorXcd& state) {
  if (diff.empty()) return 0.0;
  const Eigen::VectorXcd applied = apply_operator(diff, state);
  const double norm2 = state.squaredNorm();
  const double mean_sq = applied.squaredNorm() / norm2;      // <O^2>
  const double mean = state.dot(applied).real() / norm2;     // <O>
  return std::sqrt(std::max(0.0, mean_sq - mean * mean));
}

PauliOperator difference_operator(const PauliOperator& a_exact, const PauliOperator& a_app) {
  PauliOperator diff = a_exact;
  if (!a_app.empty()) diff -= a_app;
  return diff;
}

double simpson(const std::vector<double>& f, double dt) {
  const std::size_t n = f.size() - 1;  // panels
  double sum = f.front() + f.back();
  for (std::size_t i = 1; i < n; ++i) sum += f[i] * (i % 2 ? 4.0 : 2.0);
  return sum * dt / 3.0;
}

double operator_norm(const DenseMatrix& m) {
  // power iteration on the Hermitian matrix; |largest eigenvalue|
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(m.rows()).normalized();
  double prev = 0.0;
  for (int it = 0; it < 500; ++it) {
    v = (m * v).eval();
    const double norm = v.norm();
    if (norm == 0.0) return 0.0;
    v /= norm;
    if (std::abs(norm - prev) <= 1e-12 * std::max(1.0, norm)) return norm;
    prev = norm;
  }
  return prev;
}

BoundResult finish(BoundResult r) {
  r.fidelity_floor = r.bound <= std::numbers::pi / 2 ? std::cos(r.bound) * std::cos(r.bound) : 0.0;
  return r;
}

}  // namespace

double integrand_at(const PauliOperator& diff, double dlambda_dt, const Eigen::VectorXcd& state) {
  return std::abs(dlambda_dt) * state_sigma(diff, state);
}

double integrand_at(const AgpSolution& exact_sol, const PauliOperator& a_app, double dlambda_dt,
                    const Eigen::VectorXcd& state) {
  if (exact_sol.mode == SolveMode::restricted)
    throw std::invalid_argument("integrand_at: the reference gauge potential must be exact");
  return integrand_at(difference_operator(agp_operator(exact_sol), a_app), dlambda_dt, state);
}

double integrand_at(const DenseMatrix& a_exact, const PauliOperator& a_app, double dlambda_dt,
                    const Eigen::VectorXcd& state) {
  DenseMatrix diff = a_exact;
  if (!a_app.empty()) diff -= to_dense(a_app);
  const double norm2 = state.squaredNorm();
  const Eigen::VectorXcd applied = diff * state;
  const double mean_sq = applied.squaredNorm() / norm2;
  const double mean = state.dot(applied).real() / norm2;
  return std::abs(dlambda_dt) * std::sqrt(std::max(0.0, mean_sq - mean * mean));
}

BoundGrid build_bound_grid(const BoundProblem& problem) {
  if (problem.h == nullptr) throw std::invalid_argument("build_bound_grid: missing Hamiltonian");
  if (problem.n_panels < 10 || problem.n_panels % 2 != 0)
    throw std::invalid_argument("build_bound_grid: n_panels must be even and at least 10");

  BoundGrid grid;
  grid.level = problem.level;
  const int nodes = problem.n_panels + 1;
  grid.times.resize(static_cast<std::size_t>(nodes));
  grid.lambdas.resize(static_cast<std::size_t>(nodes));
  grid.dlambda_dts.resize(static_cast<std::size_t>(nodes));
  grid.exact.reserve(static_cast<std::size_t>(nodes));
  grid.states.reserve(static_cast<std::size_t>(nodes));

  Spectrum prev;
  bool have_prev = false;
  int tracked = problem.level;
  for (int j = 0; j < nodes; ++j) {
    const double t = problem.sched.t_final * j / problem.n_panels;
    const double lambda = problem.sched.lambda_of_t(t);
    grid.times[static_cast<std::size_t>(j)] = t;
    grid.lambdas[static_cast<std::size_t>(j)] = lambda;
    grid.dlambda_dts[static_cast<std::size_t>(j)] = problem.sched.dlambda_dt(t);

    const PauliOperator hop = problem.h->operator_at(lambda);
    // tracking and the deviation only use overlap magnitudes; skip phase fixes
    const Spectrum spec = diagonalize(to_dense(hop));
    if (have_prev) {
      int best = 0;
      double best_mag = -1.0;
      for (int m = 0; m < spec.dimension(); ++m) {
        const double mag = std::abs(prev.states.col(tracked).dot(spec.states.col(m)));
        if (mag > best_mag) {
          best_mag = mag;
          best = m;
        }
      }
      tracked = best;
    }
    grid.states.push_back(spec.states.col(tracked));
    grid.exact.push_back(solve_exact(hop, problem.h->derivative_at(lambda), problem.basis));
    prev = spec;
    have_prev = true;
  }
  return grid;
}

BoundResult bound_for(const BoundGrid& grid, const AgpField& a_app) {
  BoundResult r;
  r.times = grid.times;
  r.lambda_grid = grid.lambdas;
  r.integrand.resize(grid.times.size());
  for (std::size_t j = 0; j < grid.times.size(); ++j) {
    const PauliOperator app =
        a_app ? a_app(grid.lambdas[j]) : PauliOperator(grid.exact[j].basis.n_sites);
    r.integrand[j] = integrand_at(grid.exact[j], app, grid.dlambda_dts[j], grid.states[j]);
  }
  const double dt = grid.times[1] - grid.times[0];
  r.bound = simpson(r.integrand, dt);
  return finish(r);
}

BoundResult bound_integral(const BoundProblem& problem, const AgpField& a_app) {
  BoundProblem p = problem;
  BoundResult result = bound_for(build_bound_grid(p), a_app);
  if (!problem.refine) return result;
  for (int doubling = 0; doubling < problem.max_doublings; ++doubling) {
    p.n_panels *= 2;
    const BoundResult refined = bound_for(build_bound_grid(p), a_app);
    const double rel =
        std::abs(refined.bound - result.bound) / std::max(std::abs(refined.bound), 1e-12);
    const bool both_tiny = refined.bound < 1e-9 && result.bound < 1e-9;
    result = refined;
    if (rel <= problem.refine_rel || both_tiny) return result;
  }
  throw std::runtime_error("bound_integral: quadrature did not converge after the doubling cap");
}

BoundResult loose_bound_integral(const BoundProblem& problem, const AgpField& a_app,
                                 NormKind kind) {
  const BoundGrid grid = build_bound_grid(problem);
  BoundResult r;
  r.times = grid.times;
  r.lambda_grid = grid.lambdas;
  r.integrand.resize(grid.times.size());
  const int n_sites = problem.h->n_sites();
  for (std::size_t j = 0; j < grid.times.size(); ++j) {
    const PauliOperator app = a_app ? a_app(grid.lambdas[j]) : PauliOperator(n_sites);
    const PauliOperator diff = difference_operator(agp_operator(grid.exact[j]), app);
    double norm = 0.0;
    if (kind == NormKind::operator_norm) {
      norm = diff.empty() ? 0.0 : operator_norm(to_dense(diff));
    } else {
      // ||O||_HS = sqrt(Tr O^2) = sqrt(2^n * ntp(O,O)); dominates the deviation
      norm = std::sqrt(std::pow(2.0, n_sites)) * hs_norm_per_dim(diff);
    }
    r.integrand[j] = std::abs(grid.dlambda_dts[j]) * norm;
  }
  const double dt = grid.times[1] - grid.times[0];
  r.bound = simpson(r.integrand, dt);
  return finish(r);
}

std::vector<std::pair<std::size_t, double>> rank_terms(const BoundProblem& problem,
                                                       const AgpSolution& full) {
  if (full.mode == SolveMode::restricted)
    throw std::invalid_argument("rank_terms: the full solution must be exact");
  const BoundGrid grid = build_bound_grid(problem);
  std::vector<std::pair<std::size_t, double>> ranked;
  for (std::size_t o = 0; o < full.basis.orbit_count(); ++o) {
    const AgpField single = make_truncated_cd(*problem.h, full.basis, {o});
    ranked.emplace_back(o, bound_for(grid, single).bound);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  return ranked;
}

}  // namespace agpforge
