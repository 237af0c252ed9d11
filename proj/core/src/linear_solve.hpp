#pragma once

// Shared rank-aware solver for the positive-semidefinite AGP systems.

#include <Eigen/Dense>

#include "agpforge/agp.hpp"

namespace agpforge::detail {

struct RankedSolve {
  Eigen::VectorXd alpha;
  int rank = 0;
};

// Minimum-norm least-squares solution; eigenvalues below kRankRel * largest
// count as zero.
inline RankedSolve pinv_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& u) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& evals = eig.eigenvalues();
  const double cutoff = kRankRel * std::max(0.0, evals.size() ? evals.maxCoeff() : 0.0);
  RankedSolve out;
  out.alpha = Eigen::VectorXd::Zero(u.size());
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals(i) > cutoff && evals(i) > 0.0) {
      out.alpha += eig.eigenvectors().col(i) * (eig.eigenvectors().col(i).dot(u) / evals(i));
      ++out.rank;
    }
  }
  return out;
}

inline int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& evals = eig.eigenvalues();
  const double cutoff = kRankRel * std::max(0.0, evals.size() ? evals.maxCoeff() : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    if (evals(i) > cutoff && evals(i) > 0.0) ++rank;
  return rank;
}

}  // namespace agpforge::detail
