#include "agpforge/qpt.hpp"

#include <cmath>
#include <stdexcept>

namespace agpforge {

double hs_norm_per_dim_sq(const AgpSolution& sol, double dlambda) {
  const PauliOperator a = agp_operator(sol);
  double sum = 0.0;
  for (const auto& [s, c] : a.terms()) sum += c * c;
  return dlambda * dlambda * sum;
}

double hs_norm_per_dim_sq(const RingSolution& sol, double dlambda) {
  return dlambda * dlambda * sol.hs_norm_per_dim_sq();
}

namespace {

ScanRecord record_for(double g, int n_sites, const RingSolution& sol, std::optional<int> k) {
  ScanRecord rec;
  rec.g = g;
  rec.n_sites = n_sites;
  rec.k = k;
  rec.hs_norm_per_dim = hs_norm_per_dim_sq(sol);
  if (k) rec.restriction_rate = static_cast<double>(*k + 1) / (n_sites - 1);
  rec.rank = sol.rank;
  rec.residual_norm = sol.residual_norm;
  rec.mode = to_string(sol.mode);
  return rec;
}

}  // namespace

std::vector<ScanRecord> size_scan(double g, std::span<const int> l_list, KPolicy policy, int k) {
  if (policy == KPolicy::fixed && k < 0)
    throw std::invalid_argument("size_scan: fixed-K policy needs K >= 0");
  std::vector<ScanRecord> records;
  records.reserve(l_list.size());
  for (int l : l_list) {
    if (l < 3) throw std::invalid_argument("size_scan: L must be >= 3");
    const RingOperator h = ring_ising(l, g);
    const RingOperator dh = ring_ising_derivative(l);
    // the basis is g-independent at generic couplings; generate per L
    RingBasis basis = ring_generate_basis(ring_ising(l, 0.37), dh);
    std::optional<int> k_used;
    if (policy == KPolicy::fixed) {
      const int k_eff = std::min(k, l - 2);
      basis = basis.restricted_to_order(k_eff);
      k_used = k_eff;
    }
    records.push_back(record_for(g, l, ring_solve(h, dh, basis), k_used));
  }
  return records;
}

std::vector<ScanRecord> restriction_scan(double g, int n_sites, std::span<const int> k_list) {
  if (n_sites < 3) throw std::invalid_argument("restriction_scan: L must be >= 3");
  for (int k : k_list)
    if (k < 0 || k > n_sites - 2)
      throw std::invalid_argument("restriction_scan: K must lie in [0, L-2]");
  const RingOperator h = ring_ising(n_sites, g);
  const RingOperator dh = ring_ising_derivative(n_sites);
  const RingBasis full = ring_generate_basis(ring_ising(n_sites, 0.37), dh);
  std::vector<ScanRecord> records;
  records.reserve(k_list.size());
  for (int k : k_list)
    records.push_back(record_for(g, n_sites, ring_solve(h, dh, full.restricted_to_order(k)), k));
  return records;
}

FitResult fit_scaling(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_scaling: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("fit_scaling: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_scaling: degenerate abscissae");
  FitResult fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.intercept + fit.slope * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  fit.r_squared = ss_tot == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : 1.0 - ss_res / ss_tot;
  return fit;
}

}  // namespace agpforge
