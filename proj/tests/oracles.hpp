// Test-only reference implementations, deliberately written as plain loops
// independent of the library's vectorized/precomputed code paths.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "pgs/grid.hpp"
#include "pgs/peridynamic.hpp"
#include "pgs/rk_basis.hpp"

namespace oracle {

// Direct-sum moment matrix: loop over every center, no support lists.
inline Eigen::MatrixXd brute_moment(const Eigen::Vector2d& x, const pgs::NodeGrid& grid,
                                    double a, int n) {
  const int m = pgs::rk::monomial_count(n);
  Eigen::MatrixXd mom = Eigen::MatrixXd::Zero(m, m);
  for (const auto& c : grid.kernel_centers) {
    const Eigen::Vector2d d = x - c;
    const double w = pgs::rk::window_eval(d.norm(), a);
    if (w == 0.0) continue;
    const Eigen::VectorXd h = pgs::rk::monomial_basis(d, n);
    mom += w * h * h.transpose();
  }
  return mom;
}

// Geometric support count for one evaluation point.
inline int support_count(const Eigen::Vector2d& x, const pgs::NodeGrid& grid, double a) {
  int count = 0;
  for (const auto& c : grid.kernel_centers) {
    if ((x - c).norm() < a) ++count;
  }
  return count;
}

// Per-point reconstruction by direct summation over shape_function calls.
inline Eigen::Vector2d direct_reconstruct(const Eigen::Vector2d& x,
                                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& coeffs,
                                          const pgs::NodeGrid& grid,
                                          const pgs::rk::Params& params) {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  for (int i = 0; i < grid.num_centers(); ++i) {
    u += pgs::rk::shape_function(x, i, grid, params) * coeffs.row(i).transpose();
  }
  return u;
}

// Scalar Adam reference, one coordinate at a time.
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  long t = 0;

  double step(double param, double grad, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8) {
    t += 1;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(beta1, double(t)));
    const double vhat = v / (1.0 - std::pow(beta2, double(t)));
    return param - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Dense double-loop peridynamic operator: for each node, scan all points.
inline Eigen::Matrix<double, Eigen::Dynamic, 2> brute_operator(
    const std::vector<Eigen::Vector2d>& points,
    const Eigen::Matrix<double, Eigen::Dynamic, 2>& u, double dx, double delta,
    const pgs::peri::ForceStateModel& model) {
  const int n = static_cast<int>(points.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  if (model.uses_dilatation) {
    for (int i = 0; i < n; ++i) {
      double num = 0.0, den = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const Eigen::Vector2d xi = points[j] - points[i];
        const double r = xi.norm();
        if (r >= delta) continue;
        const double w = dx * dx * std::min(1.0, (delta - r) / dx + 0.5);
        const Eigen::Vector2d y = xi + (u.row(j) - u.row(i)).transpose();
        const double e = y.norm() - r;
        num += model.omega(xi) * e * r * w;
        den += model.omega(xi) * r * r * w;
      }
      theta(i) = den > 0.0 ? num / den : 0.0;
    }
  }
  Eigen::Matrix<double, Eigen::Dynamic, 2> g =
      Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(n, 2);
  for (int i = 0; i < n; ++i) {
    const double ax = model.alpha(points[i]);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Eigen::Vector2d xi = points[j] - points[i];
      const double r = xi.norm();
      if (r >= delta) continue;
      const double w = dx * dx * std::min(1.0, (delta - r) / dx + 0.5);
      const Eigen::Vector2d y = xi + (u.row(j) - u.row(i)).transpose();
      const double e = y.norm() - r;
      const double tx = model.t(model.omega(pgs::peri::rotate_bond(xi, ax)), theta(i), e, r);
      const double tq = model.t(
          model.omega(pgs::peri::rotate_bond(-xi, model.alpha(points[j]))), theta(j), e, r);
      g.row(i) += ((tx + tq) * w / y.norm()) * y.transpose();
    }
  }
  return g;
}

}  // namespace oracle
