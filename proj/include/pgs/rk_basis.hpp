#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pgs/errors.hpp"
#include "pgs/grid.hpp"

namespace pgs::rk {

enum class Window { cubic_bspline };

/// Number of 2D monomials of degree <= n.
inline int monomial_count(int n) {
  if (n < 0 || n > 2) {
    throw InvalidParameterError("monomial_count: order must be in {0, 1, 2}");
  }
  return (n + 1) * (n + 2) / 2;
}

/// Cubic B-spline window, normalized so w(0) = 2/3; support |r| < a.
/// Piecewise on s = r/a with half-open intervals [0,1/2), [1/2,1); the
/// spline is C^2 so the pieces agree at the breakpoints.
inline double window_eval(double r, double a) {
  if (a <= 0.0 || !std::isfinite(a)) {
    throw InvalidParameterError("window_eval: support size must be positive");
  }
  const double s = r / a;
  if (s < 0.5) return 2.0 / 3.0 - 4.0 * s * s + 4.0 * s * s * s;
  if (s < 1.0) {
    const double t = 1.0 - s;
    return 4.0 / 3.0 * t * t * t;
  }
  return 0.0;
}

/// d/dr of window_eval, same half-open piece convention.
inline double window_deriv(double r, double a) {
  if (a <= 0.0 || !std::isfinite(a)) {
    throw InvalidParameterError("window_deriv: support size must be positive");
  }
  const double s = r / a;
  if (s < 0.5) return (-8.0 * s + 12.0 * s * s) / a;
  if (s < 1.0) {
    const double t = 1.0 - s;
    return -4.0 * t * t / a;
  }
  return 0.0;
}

/// Monomials of d = (d1, d2) up to degree n in graded lexicographic order:
/// [1], [1, d1, d2], [1, d1, d2, d1^2, d1*d2, d2^2].
inline Eigen::VectorXd monomial_basis(const Eigen::Vector2d& d, int n) {
  const int m = monomial_count(n);
  Eigen::VectorXd h(m);
  h(0) = 1.0;
  if (n >= 1) {
    h(1) = d.x();
    h(2) = d.y();
  }
  if (n >= 2) {
    h(3) = d.x() * d.x();
    h(4) = d.x() * d.y();
    h(5) = d.y() * d.y();
  }
  return h;
}

/// Columns are (dH/dd1, dH/dd2), matching monomial_basis ordering.
inline Eigen::MatrixXd monomial_gradient(const Eigen::Vector2d& d, int n) {
  const int m = monomial_count(n);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, 2);
  if (n >= 1) {
    g(1, 0) = 1.0;
    g(2, 1) = 1.0;
  }
  if (n >= 2) {
    g(3, 0) = 2.0 * d.x();
    g(4, 0) = d.y();
    g(4, 1) = d.x();
    g(5, 1) = 2.0 * d.y();
  }
  return g;
}

struct Params {
  int order = 1;
  double support = 0.0;  // absolute length
  Window window = Window::cubic_bspline;
};

/// Weighted Gram matrix of the monomials over the centers inside B_a(x).
struct MomentMatrix {
  Eigen::MatrixXd entries;
  double condition = 0.0;
};

namespace detail {

/// Everything needed to evaluate all shape functions and their gradients at
/// one point x: support list, correction coefficients c = M^{-1} H(0) and
/// their spatial derivatives via dc = -M^{-1} (dM) c.
struct PointContext {
  std::vector<int> support;       // center indices with |x - center| < a
  std::vector<double> w;          // window values per support center
  std::vector<Eigen::Vector2d> dw;  // window gradients w.r.t. x
  Eigen::MatrixXd moment;         // m×m
  double condition = 0.0;
  Eigen::VectorXd c;              // m
  Eigen::MatrixXd dc;             // m×2
};

inline constexpr double kMaxCondition = 1e12;

inline PointContext point_context(const Eigen::Vector2d& x, const NodeGrid& grid,
                                  const Params& p, int point_index) {
  if (!x.allFinite()) throw InvalidParameterError("rk: evaluation point not finite");
  if (p.support <= 0.0) throw InvalidParameterError("rk: support size must be positive");
  const int m = monomial_count(p.order);
  const double a = p.support;

  PointContext ctx;
  for (int i = 0; i < grid.num_centers(); ++i) {
    const Eigen::Vector2d d = x - grid.kernel_centers[i];
    const double r = d.norm();
    if (r >= a) continue;
    const double wv = window_eval(r, a);
    ctx.support.push_back(i);
    ctx.w.push_back(wv);
    // d|d|/dx = d/r; the window slope vanishes at r = 0.
    ctx.dw.push_back(r > 0.0 ? Eigen::Vector2d(window_deriv(r, a) / r * d)
                             : Eigen::Vector2d::Zero());
  }

  const int k = static_cast<int>(ctx.support.size());
  if (k < m) {
    throw SingularMomentError("moment matrix: only " + std::to_string(k) +
                                  " centers in support, need " + std::to_string(m),
                              point_index, 0.0);
  }

  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd dmx = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd dmy = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < k; ++j) {
    const Eigen::Vector2d d = x - grid.kernel_centers[ctx.support[j]];
    const Eigen::VectorXd h = monomial_basis(d, p.order);
    const Eigen::MatrixXd dh = monomial_gradient(d, p.order);
    const Eigen::MatrixXd hht = h * h.transpose();
    moment.noalias() += ctx.w[j] * hht;
    dmx.noalias() += ctx.w[j] * (dh.col(0) * h.transpose() + h * dh.col(0).transpose());
    dmx.noalias() += ctx.dw[j].x() * hht;
    dmy.noalias() += ctx.w[j] * (dh.col(1) * h.transpose() + h * dh.col(1).transpose());
    dmy.noalias() += ctx.dw[j].y() * hht;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moment);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  ctx.condition = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 0.0) || ctx.condition > kMaxCondition) {
    throw SingularMomentError("moment matrix singular or ill-conditioned (cond est " +
                                  std::to_string(ctx.condition) + ")",
                              point_index, ctx.condition);
  }

  Eigen::LLT<Eigen::MatrixXd> chol(moment);
  Eigen::VectorXd h0 = Eigen::VectorXd::Zero(m);
  h0(0) = 1.0;  // H_n(0)
  ctx.moment = std::move(moment);
  ctx.c = chol.solve(h0);
  ctx.dc.resize(m, 2);
  ctx.dc.col(0) = -chol.solve(dmx * ctx.c);
  ctx.dc.col(1) = -chol.solve(dmy * ctx.c);
  return ctx;
}

}  // namespace detail

inline MomentMatrix moment_matrix(const Eigen::Vector2d& x, const NodeGrid& grid,
                                  double a, int n, int point_index = -1) {
  Params p;
  p.order = n;
  p.support = a;
  const auto ctx = detail::point_context(x, grid, p, point_index);
  return MomentMatrix{ctx.moment, ctx.condition};
}

/// Shape function of center `center_index` evaluated at x; exactly zero
/// outside the support ball.
inline double shape_function(const Eigen::Vector2d& x, int center_index,
                             const NodeGrid& grid, const Params& p) {
  if (center_index < 0 || center_index >= grid.num_centers()) {
    throw InvalidParameterError("shape_function: center index out of range");
  }
  const Eigen::Vector2d d = x - grid.kernel_centers[center_index];
  if (d.norm() >= p.support) return 0.0;
  const auto ctx = detail::point_context(x, grid, p, -1);
  return monomial_basis(d, p.order).dot(ctx.c) * window_eval(d.norm(), p.support);
}

/// Full analytic gradient, including the correction-coefficient term
/// dc = -M^{-1} (dM) c and the product-rule terms on H and the window.
inline Eigen::Vector2d shape_gradient(const Eigen::Vector2d& x, int center_index,
                                      const NodeGrid& grid, const Params& p) {
  if (center_index < 0 || center_index >= grid.num_centers()) {
    throw InvalidParameterError("shape_gradient: center index out of range");
  }
  const Eigen::Vector2d d = x - grid.kernel_centers[center_index];
  const double r = d.norm();
  if (r >= p.support) return Eigen::Vector2d::Zero();
  const auto ctx = detail::point_context(x, grid, p, -1);
  const Eigen::VectorXd h = monomial_basis(d, p.order);
  const Eigen::MatrixXd dh = monomial_gradient(d, p.order);
  const double wv = window_eval(r, p.support);
  const Eigen::Vector2d dwv = r > 0.0
                                  ? Eigen::Vector2d(window_deriv(r, p.support) / r * d)
                                  : Eigen::Vector2d::Zero();
  const double hc = h.dot(ctx.c);
  Eigen::Vector2d g;
  for (int k = 0; k < 2; ++k) {
    g(k) = (dh.col(k).dot(ctx.c) + h.dot(ctx.dc.col(k))) * wv + hc * dwv(k);
  }
  return g;
}

/// Shape matrix and gradient matrices evaluated at every measurement point.
/// Rows sum to one (partition of unity); gradient rows sum to zero.
struct RKBasis {
  Params params;
  Eigen::MatrixXd shape;   // N_NP × N_RK
  Eigen::MatrixXd grad_x;  // ∂/∂x1
  Eigen::MatrixXd grad_y;  // ∂/∂x2

  int num_points() const { return static_cast<int>(shape.rows()); }
  int num_centers() const { return static_cast<int>(shape.cols()); }
};

inline RKBasis assemble_basis(const NodeGrid& grid, double a, int n,
                              Window window = Window::cubic_bspline) {
  validate_grid(grid, monomial_count(n));
  Params p;
  p.order = n;
  p.support = a;
  p.window = window;

  const int np = grid.num_points();
  const int nc = grid.num_centers();
  RKBasis basis;
  basis.params = p;
  basis.shape = Eigen::MatrixXd::Zero(np, nc);
  basis.grad_x = Eigen::MatrixXd::Zero(np, nc);
  basis.grad_y = Eigen::MatrixXd::Zero(np, nc);

  for (int j = 0; j < np; ++j) {
    const Eigen::Vector2d& x = grid.measurement_points[j];
    const auto ctx = detail::point_context(x, grid, p, j);
    for (size_t s = 0; s < ctx.support.size(); ++s) {
      const int i = ctx.support[s];
      const Eigen::Vector2d d = x - grid.kernel_centers[i];
      const Eigen::VectorXd h = monomial_basis(d, n);
      const Eigen::MatrixXd dh = monomial_gradient(d, n);
      const double hc = h.dot(ctx.c);
      basis.shape(j, i) = hc * ctx.w[s];
      basis.grad_x(j, i) =
          (dh.col(0).dot(ctx.c) + h.dot(ctx.dc.col(0))) * ctx.w[s] + hc * ctx.dw[s].x();
      basis.grad_y(j, i) =
          (dh.col(1).dot(ctx.c) + h.dot(ctx.dc.col(1))) * ctx.w[s] + hc * ctx.dw[s].y();
    }
  }
  return basis;
}

}  // namespace pgs::rk
