#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agpforge/agp.hpp"
#include "agpforge/ring.hpp"

namespace agpforge {

struct ScanRecord {
  double g = 0.0;
  int n_sites = 0;
  std::optional<int> k;                  // restriction order, when restricted
  double hs_norm_per_dim = 0.0;          // ||dlambda A||_HS^2 / 2^L
  std::optional<double> restriction_rate;  // (K+1)/(L-1)
  int rank = 0;
  double residual_norm = 0.0;
  std::string mode;
};

/// Sum over basis strings of (dlambda * coefficient)^2, i.e. the squared
/// HS norm per Hilbert-space dimension.  Purely algebraic.
double hs_norm_per_dim_sq(const AgpSolution& sol, double dlambda = 1.0);
double hs_norm_per_dim_sq(const RingSolution& sol, double dlambda = 1.0);

enum class KPolicy { exact, fixed };

/// Ising-chain norm scan over system sizes at fixed coupling g, on the
/// translation-reduced path ((L-1)-dimensional grouped solves).  With
/// KPolicy::fixed the solve and the norm sum are restricted to order <= K.
std::vector<ScanRecord> size_scan(double g, std::span<const int> l_list,
                                  KPolicy policy = KPolicy::exact, int k = -1);

/// Ising-chain norm scan over restriction orders K at fixed (g, L).
std::vector<ScanRecord> restriction_scan(double g, int n_sites, std::span<const int> k_list);

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (x, y) points; throws below 3 points.
FitResult fit_scaling(std::span<const double> x, std::span<const double> y);

}  // namespace agpforge
