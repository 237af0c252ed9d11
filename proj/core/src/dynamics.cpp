#include "agpforge/dynamics.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "pauli_action.hpp"

namespace agpforge {

namespace {

using Complex = std::complex<double>;

int sites_of_dim(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  return n;
}

// One Pauli string compiled for repeated application: target permutation,
// i^{#Y} phase and a precomputed Z-parity sign table.
struct CompiledString {
  std::uint64_t x_bits = 0;
  Complex phase;
  std::vector<std::int8_t> sign;
};

CompiledString compile_string(const PauliString& s, Eigen::Index dim) {
  const auto masks = detail::index_masks(s);
  CompiledString c;
  c.x_bits = masks.x;
  c.phase = masks.phase;
  c.sign.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index b = 0; b < dim; ++b)
    c.sign[static_cast<std::size_t>(b)] =
        (std::popcount(static_cast<std::uint64_t>(b) & masks.z) & 1) ? -1 : 1;
  return c;
}

struct StringHash {
  std::size_t operator()(const PauliString& s) const { return s.hash(); }
};

// Slot-compiled H_tot application shared by all integrator stages.
class CompiledOperator {
 public:
  CompiledOperator(int n_sites, Eigen::Index dim) : n_sites_(n_sites), dim_(dim) {}

  std::size_t slot_of(const PauliString& s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    const std::size_t slot = strings_.size();
    index_.emplace(s, slot);
    strings_.push_back(compile_string(s, dim_));
    return slot;
  }

  void clear_coeffs() { coeffs_.assign(strings_.size(), Complex(0, 0)); }

  void accumulate(std::size_t slot, double coeff) {
    if (coeffs_.size() < strings_.size()) coeffs_.resize(strings_.size(), Complex(0, 0));
    coeffs_[slot] += coeff * strings_[slot].phase;
  }

  // y = -i * Op * psi
  void apply_minus_i(const Eigen::VectorXcd& psi, Eigen::VectorXcd& y) const {
    y.setZero();
    for (std::size_t s = 0; s < strings_.size(); ++s) {
      const Complex factor = Complex(0, -1) * coeffs_[s];
      if (factor == Complex(0, 0)) continue;
      const auto& cs = strings_[s];
      for (Eigen::Index b = 0; b < dim_; ++b) {
        const auto tgt =
            static_cast<Eigen::Index>(static_cast<std::uint64_t>(b) ^ cs.x_bits);
        y(tgt) += factor * static_cast<double>(cs.sign[static_cast<std::size_t>(b)]) * psi(b);
      }
    }
  }

  double coeff_l1() const {
    double sum = 0.0;
    for (const auto& c : coeffs_) sum += std::abs(c);
    return sum;
  }

  int n_sites() const { return n_sites_; }

 private:
  int n_sites_;
  Eigen::Index dim_;
  std::vector<CompiledString> strings_;
  std::vector<Complex> coeffs_;
  std::unordered_map<PauliString, std::size_t, StringHash> index_;
};

}  // namespace

int StateVector::n_sites() const { return sites_of_dim(amps.size()); }

StateVector ground_state(const PauliOperator& h) {
  const Spectrum spec = diagonalize(to_dense(h));
  return StateVector{spec.states.col(0)};
}

double fidelity(const StateVector& psi, const Spectrum& spec, int n) {
  if (psi.amps.size() != spec.states.rows())
    throw std::invalid_argument("fidelity: dimension mismatch");
  const double norm2 = psi.amps.squaredNorm();
  if (norm2 == 0.0) throw std::invalid_argument("fidelity: zero state");
  return std::norm(spec.states.col(n).dot(psi.amps)) / norm2;
}

EvolutionResult evolve(const ParametricHamiltonian& h, const AgpField& a_app,
                       const Schedule& sched, const StateVector& psi0, EvolveOptions opt) {
  const int n = h.n_sites();
  if (n > kEvolveSiteCap)
    throw std::invalid_argument("evolve: n_sites exceeds the dense evolution cap; "
                                "use the algebraic scans for larger chains");
  const Eigen::Index dim = Eigen::Index{1} << n;
  if (psi0.amps.size() != dim) throw std::invalid_argument("evolve: state dimension mismatch");
  const double t_final = sched.t_final;

  CompiledOperator op(n, dim);
  std::vector<std::size_t> h_slots;
  h_slots.reserve(h.basis().size());
  for (const auto& s : h.basis()) h_slots.push_back(op.slot_of(s));

  auto load_coeffs = [&](double t) {
    const double lambda = sched.lambda_of_t(t);
    const double dldt = sched.dlambda_dt(t);
    op.clear_coeffs();
    const auto hc = h.coeffs_at(lambda);
    for (std::size_t i = 0; i < h_slots.size(); ++i) op.accumulate(h_slots[i], hc[i]);
    if (a_app) {
      const PauliOperator a = a_app(lambda);
      for (const auto& [s, c] : a.terms()) op.accumulate(op.slot_of(s), dldt * c);
    }
  };

  int n_steps = opt.n_steps;
  if (n_steps <= 0) {
    double scale = 0.0;
    for (int probe = 0; probe <= 8; ++probe) {
      load_coeffs(t_final * probe / 8.0);
      scale = std::max(scale, op.coeff_l1());
    }
    n_steps = std::max(10000, static_cast<int>(std::ceil(100.0 * t_final * scale)));
  }
  if (n_steps < 100) throw std::invalid_argument("evolve: n_steps must be at least 100");

  int samples = opt.fidelity_samples;
  if (samples <= 0) samples = n <= 6 ? 101 : (n <= 8 ? 33 : (n <= 10 ? 5 : 3));
  samples = std::max(2, samples);
  // align steps so every sample time is hit exactly
  const int per = (n_steps + samples - 2) / (samples - 1);
  n_steps = per * (samples - 1);
  const double dt = t_final / n_steps;

  EvolutionResult result;
  result.times.reserve(static_cast<std::size_t>(samples));
  result.fidelities.reserve(static_cast<std::size_t>(samples));

  Eigen::VectorXcd psi = psi0.amps;
  Eigen::VectorXcd k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);

  Spectrum prev_spec;
  int tracked = opt.track_level;
  bool have_prev = false;

  auto sample_fidelity = [&](double t) {
    const double lambda = sched.lambda_of_t(t);
    // no gauge matching: fidelity and level tracking only use |overlap|
    const Spectrum spec = diagonalize(to_dense(h.operator_at(lambda)));
    if (have_prev) {
      // follow the state through level reorderings by overlap with the
      // previously tracked eigenvector
      int best = 0;
      double best_mag = -1.0;
      for (int m = 0; m < spec.dimension(); ++m) {
        const double mag = std::abs(prev_spec.states.col(tracked).dot(spec.states.col(m)));
        if (mag > best_mag) {
          best_mag = mag;
          best = m;
        }
      }
      tracked = best;
    }
    const double norm2 = psi.squaredNorm();
    const double drift = std::abs(std::sqrt(norm2) - 1.0);
    result.norm_drift = std::max(result.norm_drift, drift);
    if (drift > opt.norm_drift_abort)
      throw std::runtime_error(
          "evolve: norm drift " + std::to_string(drift) + " after t=" + std::to_string(t) +
          " exceeds the tolerance; increase n_steps (currently " + std::to_string(n_steps) + ")");

    // sum the multiplet within the degeneracy window around the tracked level
    const double range =
        std::max(1e-300, spec.energies(spec.dimension() - 1) - spec.energies(0));
    const double e0 = spec.energies(tracked);
    double p = 0.0;
    for (int m = 0; m < spec.dimension(); ++m)
      if (std::abs(spec.energies(m) - e0) <= opt.degeneracy_tol * range)
        p += std::norm(spec.states.col(m).dot(psi));
    p /= norm2;
    result.times.push_back(t);
    result.fidelities.push_back(std::min(1.0, p));
    prev_spec = spec;
    have_prev = true;
  };

  sample_fidelity(0.0);
  for (int step = 0; step < n_steps; ++step) {
    const double t = step * dt;
    load_coeffs(t);
    op.apply_minus_i(psi, k1);
    load_coeffs(t + 0.5 * dt);
    tmp = psi + (0.5 * dt) * k1;
    op.apply_minus_i(tmp, k2);
    tmp = psi + (0.5 * dt) * k2;
    op.apply_minus_i(tmp, k3);
    load_coeffs(t + dt);
    tmp = psi + dt * k3;
    op.apply_minus_i(tmp, k4);
    psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((step + 1) % per == 0) sample_fidelity((step + 1) * dt);
  }

  result.final_state = StateVector{psi};
  return result;
}

double convergence_check(const EvolutionResult& coarse, const EvolutionResult& fine) {
  if (coarse.times.size() != fine.times.size())
    throw std::invalid_argument("convergence_check: sample grids differ");
  double max_diff = 0.0;
  for (std::size_t i = 0; i < coarse.times.size(); ++i) {
    if (std::abs(coarse.times[i] - fine.times[i]) > 1e-12 * std::max(1.0, std::abs(fine.times[i])))
      throw std::invalid_argument("convergence_check: sample times differ");
    max_diff = std::max(max_diff, std::abs(coarse.fidelities[i] - fine.fidelities[i]));
  }
  return max_diff;
}

}  // namespace agpforge
