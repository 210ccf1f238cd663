#include "ccs/numeric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccs {

Box Box::unbounded(int n) {
  Box b;
  const double inf = std::numeric_limits<double>::infinity();
  b.lo = Eigen::VectorXd::Constant(n, -inf);
  b.hi = Eigen::VectorXd::Constant(n, inf);
  return b;
}

Box Box::centered(int n, double half_width) {
  Box b;
  b.lo = Eigen::VectorXd::Constant(n, -half_width);
  b.hi = Eigen::VectorXd::Constant(n, half_width);
  return b;
}

bool Box::contains(const Eigen::VectorXd& v, double tol) const {
  if (v.size() != lo.size()) return false;
  return (v.array() >= lo.array() - tol).all() && (v.array() <= hi.array() + tol).all();
}

Eigen::VectorXd Box::sample(std::mt19937_64& rng) const {
  Eigen::VectorXd out(lo.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw std::invalid_argument("Box::sample requires finite bounds");
    out[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
  }
  return out;
}

double rcond(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0.0;
  if (m.rows() != m.cols()) return sv[sv.size() - 1] / sv[0];
  return sv[sv.size() - 1] / sv[0];
}

std::vector<int> nonzero_rows(const Eigen::MatrixXd& m, double rel_tol) {
  const double scale = std::max(1.0, m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0);
  std::vector<int> rows;
  for (int r = 0; r < m.rows(); ++r) {
    if (m.row(r).cwiseAbs().maxCoeff() > rel_tol * scale) rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<int>(rows.size()), m.cols());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<int>(rows.size()));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) out[i] = v[rows[i]];
  return out;
}

Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd xp = x;
  Eigen::MatrixXd jac;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    Eigen::VectorXd hi = f(xp);
    xp[i] = x[i] - step;
    Eigen::VectorXd lo = f(xp);
    xp[i] = x[i];
    if (jac.size() == 0) jac.resize(hi.size(), x.size());
    jac.col(i) = (hi - lo) / (2.0 * step);
  }
  if (jac.size() == 0) jac.resize(static_cast<int>(f(x).size()), 0);
  return jac;
}

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double hi = f(xp);
    xp[i] = x[i] - step;
    const double lo = f(xp);
    xp[i] = x[i];
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

}  // namespace ccs
