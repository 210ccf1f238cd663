#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <vector>

namespace ccs {

// Closed axis-aligned box used for admissible state/input sets. Entries may be
// +-inf for unbounded directions.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box unbounded(int n);
  static Box centered(int n, double half_width);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const;
  // Uniform sample; requires finite bounds.
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
};

// Reciprocal condition number sigma_min/sigma_max from a full SVD. Returns 0
// for rank-deficient or empty matrices. Intended for the small dense systems
// this library solves; do not call on large matrices in hot loops.
double rcond(const Eigen::MatrixXd& m);

// Indices of rows that are not identically zero. Structural zero rows (e.g.
// the velocity rows of a mechanical system in normal form) are exactly zero;
// the tolerance only guards against harmless round-off in user-built maps.
std::vector<int> nonzero_rows(const Eigen::MatrixXd& m, double rel_tol = 1e-14);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const std::vector<int>& rows);

// Central-difference Jacobian of f at x with the given step.
Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step);

// Central-difference gradient of a scalar function.
Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step);

}  // namespace ccs
