#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pgs/errors.hpp"
#include "pgs/rk_basis.hpp"

namespace pgs::recon {

/// Per-center vector coefficients ū_I, one row per kernel center.
using CoefficientField = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Reconstructed displacements and gradients at a set of evaluation points.
struct DisplacementField {
  Eigen::Matrix<double, Eigen::Dynamic, 2> u;  // N × 2
  std::vector<Eigen::Matrix2d> grad;           // grad[j](i,k) = ∂u_i/∂x_k

  int num_points() const { return static_cast<int>(u.rows()); }
};

/// Green–Lagrange components and principal strains per evaluation point.
/// E12 is stored once (the tensor is symmetric).
struct StrainField {
  Eigen::VectorXd e11;
  Eigen::VectorXd e12;
  Eigen::VectorXd e22;
  Eigen::VectorXd principal_min;
  Eigen::VectorXd principal_max;

  int num_points() const { return static_cast<int>(e11.size()); }
};

/// E = 1/2 (∇u + ∇uᵀ + ∇uᵀ∇u), assembled componentwise so that the
/// off-diagonal entries are identical bit-for-bit.
inline Eigen::Matrix2d green_lagrange(const Eigen::Matrix2d& grad_u) {
  const double g11 = grad_u(0, 0), g12 = grad_u(0, 1);
  const double g21 = grad_u(1, 0), g22 = grad_u(1, 1);
  Eigen::Matrix2d e;
  e(0, 0) = g11 + 0.5 * (g11 * g11 + g21 * g21);
  e(1, 1) = g22 + 0.5 * (g12 * g12 + g22 * g22);
  const double e12 = 0.5 * (g12 + g21 + g11 * g12 + g21 * g22);
  e(0, 1) = e12;
  e(1, 0) = e12;
  return e;
}

/// Closed-form eigenvalues of a symmetric 2×2 tensor, min first.
inline std::pair<double, double> principal_strains(const Eigen::Matrix2d& e) {
  const double mean = 0.5 * (e(0, 0) + e(1, 1));
  const double half_diff = 0.5 * (e(0, 0) - e(1, 1));
  const double radius = std::sqrt(half_diff * half_diff + e(0, 1) * e(0, 1));
  return {mean - radius, mean + radius};
}

/// u(x_J) = Σ_I Φ(x_J; x_J - center_I) ū_I and its gradient, from the
/// precomputed basis matrices.
inline DisplacementField reconstruct_displacement(const CoefficientField& coeffs,
                                                  const rk::RKBasis& basis) {
  if (coeffs.rows() != basis.num_centers()) {
    throw InvalidParameterError("reconstruct_displacement: coefficient count " +
                                std::to_string(coeffs.rows()) + " != center count " +
                                std::to_string(basis.num_centers()));
  }
  if (!coeffs.allFinite()) {
    throw InvalidParameterError("reconstruct_displacement: non-finite coefficients");
  }
  DisplacementField field;
  field.u.noalias() = basis.shape * coeffs;
  const Eigen::Matrix<double, Eigen::Dynamic, 2> gx = basis.grad_x * coeffs;
  const Eigen::Matrix<double, Eigen::Dynamic, 2> gy = basis.grad_y * coeffs;
  field.grad.resize(basis.num_points());
  for (int j = 0; j < basis.num_points(); ++j) {
    field.grad[j] << gx(j, 0), gy(j, 0), gx(j, 1), gy(j, 1);
  }
  return field;
}

/// Evaluates the continuous reconstruction at arbitrary points (used for
/// resolution transfer); shape functions are rebuilt per point.
inline DisplacementField evaluate_at(const CoefficientField& coeffs, const NodeGrid& grid,
                                     const rk::Params& params,
                                     const std::vector<Eigen::Vector2d>& points) {
  if (coeffs.rows() != grid.num_centers()) {
    throw InvalidParameterError("evaluate_at: coefficient count != center count");
  }
  DisplacementField field;
  const int n = static_cast<int>(points.size());
  field.u.setZero(n, 2);
  field.grad.assign(n, Eigen::Matrix2d::Zero());
  for (int j = 0; j < n; ++j) {
    const auto ctx = rk::detail::point_context(points[j], grid, params, j);
    Eigen::Vector2d u = Eigen::Vector2d::Zero();
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    for (size_t s = 0; s < ctx.support.size(); ++s) {
      const int i = ctx.support[s];
      const Eigen::Vector2d d = points[j] - grid.kernel_centers[i];
      const Eigen::VectorXd h = rk::monomial_basis(d, params.order);
      const Eigen::MatrixXd dh = rk::monomial_gradient(d, params.order);
      const double hc = h.dot(ctx.c);
      const double phi = hc * ctx.w[s];
      Eigen::Vector2d dphi;
      for (int k = 0; k < 2; ++k) {
        dphi(k) = (dh.col(k).dot(ctx.c) + h.dot(ctx.dc.col(k))) * ctx.w[s] +
                  hc * ctx.dw[s](k);
      }
      const Eigen::Vector2d ci = coeffs.row(i).transpose();
      u += phi * ci;
      g += ci * dphi.transpose();  // g(i,k) = ∂u_i/∂x_k
    }
    field.u.row(j) = u.transpose();
    field.grad[j] = g;
  }
  return field;
}

/// Pointwise Green–Lagrange strain and principal values of a reconstructed
/// field.
inline StrainField strain_field(const DisplacementField& field) {
  const int n = field.num_points();
  StrainField s;
  s.e11.resize(n);
  s.e12.resize(n);
  s.e22.resize(n);
  s.principal_min.resize(n);
  s.principal_max.resize(n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix2d e = green_lagrange(field.grad[j]);
    s.e11(j) = e(0, 0);
    s.e12(j) = e(0, 1);
    s.e22(j) = e(1, 1);
    const auto [lo, hi] = principal_strains(e);
    s.principal_min(j) = lo;
    s.principal_max(j) = hi;
  }
  return s;
}

inline StrainField strain_field(const CoefficientField& coeffs, const rk::RKBasis& basis) {
  return strain_field(reconstruct_displacement(coeffs, basis));
}

inline StrainField strain_field(const CoefficientField& coeffs, const NodeGrid& grid,
                                const rk::Params& params,
                                const std::vector<Eigen::Vector2d>& points) {
  return strain_field(evaluate_at(coeffs, grid, params, points));
}

}  // namespace pgs::recon
