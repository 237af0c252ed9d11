#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "agpforge/agp.hpp"
#include "agpforge/model.hpp"
#include "agpforge/spectral.hpp"

namespace agpforge {

/// Dense cap for real-time evolution.
inline constexpr int kEvolveSiteCap = 12;

struct StateVector {
  Eigen::VectorXcd amps;

  double norm() const { return amps.norm(); }
  int n_sites() const;
};

/// Ground state of a dense-diagonalizable operator.
StateVector ground_state(const PauliOperator& h);

struct EvolutionResult {
  std::vector<double> times;
  std::vector<double> fidelities;   // p_n at the sample times
  StateVector final_state;
  double norm_drift = 0.0;          // max | ||psi|| - 1 | seen
};

struct EvolveOptions {
  int n_steps = 0;             // 0 -> max(10^4, ceil(100 * T * coeff scale))
  int fidelity_samples = 0;    // 0 -> by system size (101 / 21 / 5)
  int track_level = 0;         // eigenstate followed by overlap continuity
  double norm_drift_abort = 1e-6;
  /// Relative width (of the spectral range) within which levels count as one
  /// multiplet when sampling fidelity; the classical Ising endpoint needs it.
  double degeneracy_tol = 1e-8;
};

/// Integrate i d|psi>/dt = [H(lambda_t) + dlambda_dt * A_app(lambda_t)] |psi>
/// with a fixed-step 4th-order Runge-Kutta scheme, applying every Pauli
/// string directly to the amplitudes.  Fidelity to the gauge-matched
/// instantaneous eigenstate of H (not H_tot) is sampled on a uniform grid.
/// Throws when the norm drifts past `norm_drift_abort` (with a step-size
/// diagnostic) or when n_sites exceeds the dense evolution cap.
EvolutionResult evolve(const ParametricHamiltonian& h, const AgpField& a_app,
                       const Schedule& sched, const StateVector& psi0, EvolveOptions opt = {});

/// |<n|psi>|^2 on the normalized state; phase-gauge independent.
double fidelity(const StateVector& psi, const Spectrum& spec, int n);

/// Max |fidelity difference| over the shared sample times of two runs of the
/// same setup (used to certify the step count).
double convergence_check(const EvolutionResult& coarse, const EvolutionResult& fine);

}  // namespace agpforge
