#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "pgs/errors.hpp"

namespace pgs {

/// Reference coordinates of the measurement points and the kernel centers.
///
/// `dx` is the (uniform) spacing of the measurement grid. The kernel grid
/// has its own pitch, recoverable via `kernel_spacing()`; support sizes are
/// conventionally quoted as multiples of that pitch.
struct NodeGrid {
  std::vector<Eigen::Vector2d> measurement_points;
  std::vector<Eigen::Vector2d> kernel_centers;
  double dx = 0.0;

  int num_points() const { return static_cast<int>(measurement_points.size()); }
  int num_centers() const { return static_cast<int>(kernel_centers.size()); }

  /// Pitch of the kernel-center set: the smallest nonzero pairwise distance.
  double kernel_spacing() const {
    double best = std::numeric_limits<double>::infinity();
    const int n = num_centers();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d = (kernel_centers[i] - kernel_centers[j]).norm();
        if (d > 0.0 && d < best) best = d;
      }
    }
    if (!std::isfinite(best)) {
      throw InvalidParameterError("kernel_spacing: fewer than two distinct kernel centers");
    }
    return best;
  }
};

namespace detail {

inline void check_distinct(const std::vector<Eigen::Vector2d>& pts, const char* what) {
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i) {
    if (!pts[i].allFinite()) {
      throw InvalidParameterError(std::string(what) + ": non-finite coordinate");
    }
    for (int j = i + 1; j < n; ++j) {
      if ((pts[i] - pts[j]).squaredNorm() == 0.0) {
        throw InvalidParameterError(std::string(what) + ": duplicate point");
      }
    }
  }
}

}  // namespace detail

/// Validates finiteness/distinctness and minimum counts for order-n bases.
inline void validate_grid(const NodeGrid& grid, int min_count) {
  if (grid.dx <= 0.0 || !std::isfinite(grid.dx)) {
    throw InvalidParameterError("NodeGrid: spacing must be positive");
  }
  if (grid.num_points() < min_count || grid.num_centers() < min_count) {
    throw InvalidParameterError("NodeGrid: fewer points than monomials");
  }
  detail::check_distinct(grid.measurement_points, "measurement_points");
  detail::check_distinct(grid.kernel_centers, "kernel_centers");
}

/// Row-major uniform lattice: index = iy*nx + ix, x1 fastest.
inline std::vector<Eigen::Vector2d> uniform_lattice(int nx, int ny, double dx,
                                                    const Eigen::Vector2d& origin = {0.0, 0.0}) {
  if (nx < 1 || ny < 1 || dx <= 0.0) {
    throw InvalidParameterError("uniform_lattice: dims must be >= 1, dx > 0");
  }
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      pts.emplace_back(origin.x() + ix * dx, origin.y() + iy * dx);
    }
  }
  return pts;
}

/// Measurement grid nx×ny with spacing dx plus an rkx×rky kernel grid
/// spanning the same bounding box.
inline NodeGrid make_node_grid(int nx, int ny, double dx, int rkx = 10, int rky = 10,
                               const Eigen::Vector2d& origin = {0.0, 0.0}) {
  if (nx < 2 || ny < 2 || rkx < 2 || rky < 2) {
    throw InvalidParameterError("make_node_grid: need at least 2 points per axis");
  }
  NodeGrid grid;
  grid.dx = dx;
  grid.measurement_points = uniform_lattice(nx, ny, dx, origin);
  grid.kernel_centers.reserve(static_cast<size_t>(rkx) * rky);
  const double lx = (nx - 1) * dx;
  const double ly = (ny - 1) * dx;
  for (int iy = 0; iy < rky; ++iy) {
    for (int ix = 0; ix < rkx; ++ix) {
      grid.kernel_centers.emplace_back(origin.x() + lx * ix / (rkx - 1),
                                       origin.y() + ly * iy / (rky - 1));
    }
  }
  return grid;
}

}  // namespace pgs
