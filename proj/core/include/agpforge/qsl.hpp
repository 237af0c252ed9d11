#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "agpforge/agp.hpp"
#include "agpforge/model.hpp"
#include "agpforge/spectral.hpp"

namespace agpforge {

struct BoundResult {
  std::vector<double> times;
  std::vector<double> lambda_grid;
  std::vector<double> integrand;       // sigma values, dlambda/dt factor included
  double bound = 0.0;                  // B = integral of the integrand over t
  double fidelity_floor = 0.0;         // cos^2(B) for B <= pi/2, else 0
  bool includes_dlambda_factor = true; // recorded in emitted metadata
};

/// Standard deviation of dlambda_dt * (A_exact - A_app) in `state`.  The
/// solution carrying A_exact must not be a restricted one.
double integrand_at(const AgpSolution& exact_sol, const PauliOperator& a_app,
                    double dlambda_dt, const Eigen::VectorXcd& state);

/// Low-level form on a precomputed difference operator.
double integrand_at(const PauliOperator& diff, double dlambda_dt, const Eigen::VectorXcd& state);

/// Oracle route: dense exact gauge potential.
double integrand_at(const DenseMatrix& a_exact, const PauliOperator& a_app, double dlambda_dt,
                    const Eigen::VectorXcd& state);

/// Per-node context shared by every A_app evaluated on the same system,
/// schedule and tracked level: spectra are gauge-matched along the path and
/// the exact solve is done once per node.
struct BoundGrid {
  std::vector<double> times;
  std::vector<double> lambdas;
  std::vector<double> dlambda_dts;
  std::vector<AgpSolution> exact;        // per node
  std::vector<Eigen::VectorXcd> states;  // tracked eigenstate per node
  int level = 0;
};

struct BoundProblem {
  const ParametricHamiltonian* h = nullptr;
  AgpBasis basis;                        // basis for the per-node exact solves
  Schedule sched;
  int level = 0;
  int n_panels = 1024;                   // composite-Simpson panels (even)
  bool refine = true;                    // one doubling check, repeated on failure
  double refine_rel = 1e-6;
  int max_doublings = 20;
};

BoundGrid build_bound_grid(const BoundProblem& problem);

/// Composite-Simpson integral of the integrand over t for one approximate
/// gauge potential (an empty AgpField means A_app = 0).
BoundResult bound_for(const BoundGrid& grid, const AgpField& a_app);

/// Full pipeline: grid construction, quadrature and the panel-doubling
/// convergence check.  Throws when B keeps moving by more than refine_rel
/// after max_doublings refinements.
BoundResult bound_integral(const BoundProblem& problem, const AgpField& a_app);

enum class NormKind { operator_norm, hilbert_schmidt };

/// Eq.-(26) variant with the standard deviation replaced by an operator norm
/// (power iteration on the dense difference) or the Hilbert-Schmidt norm
/// (symbolic, no eigenstates needed).  Always >= the deviation-based bound.
BoundResult loose_bound_integral(const BoundProblem& problem, const AgpField& a_app,
                                 NormKind kind);

/// Bounds with A_app set to each single-orbit truncation of the exact AGP,
/// sorted ascending by B (small B = dominant term).
std::vector<std::pair<std::size_t, double>> rank_terms(const BoundProblem& problem,
                                                       const AgpSolution& full);

}  // namespace agpforge
