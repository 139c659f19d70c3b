#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgs/errors.hpp"
#include "pgs/grid.hpp"

namespace pgs::peri {

using Displacements = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Neighbor lists and bond quadrature over a uniform node lattice.
/// Bonds satisfy 0 < |ξ| < δ; weights are nodal cell areas Δx² with a
/// linear partial-area factor for cells straddling the horizon sphere.
struct Horizon {
  double delta = 0.0;
  double dx = 0.0;
  std::vector<Eigen::Vector2d> points;
  std::vector<int> offsets;            // CSR, size N+1
  std::vector<int> neighbors;
  std::vector<Eigen::Vector2d> xi;     // reference bond vectors
  std::vector<double> xi_norm;
  std::vector<double> weights;
  std::vector<bool> full_coverage;     // horizon ball fully inside the lattice
  std::vector<int> interior;           // nodes where the operator is evaluated

  int num_points() const { return static_cast<int>(points.size()); }
  int degree(int node) const { return offsets[node + 1] - offsets[node]; }
};

/// Builds neighbor lists on a uniform lattice. `interior` defaults to the
/// fully covered nodes; pass an explicit list to designate Ω yourself.
inline Horizon build_horizon(std::vector<Eigen::Vector2d> points, double dx, double delta,
                             std::vector<int> interior = {}) {
  if (dx <= 0.0 || delta <= 0.0) {
    throw InvalidParameterError("build_horizon: dx and delta must be positive");
  }
  Horizon h;
  h.delta = delta;
  h.dx = dx;
  h.points = std::move(points);
  const int n = h.num_points();

  // Lattice stencil of admissible offsets, reused for every node.
  const int reach = static_cast<int>(std::ceil(delta / dx));
  std::vector<Eigen::Vector2i> stencil;
  for (int oy = -reach; oy <= reach; ++oy) {
    for (int ox = -reach; ox <= reach; ++ox) {
      if (ox == 0 && oy == 0) continue;
      if (std::hypot(ox * dx, oy * dx) < delta) stencil.emplace_back(ox, oy);
    }
  }
  const int full_degree = static_cast<int>(stencil.size());

  // Index lattice positions for O(1) neighbor lookup.
  Eigen::Vector2d lo = h.points.front();
  for (const auto& p : h.points) lo = lo.cwiseMin(p);
  const auto key = [&](long ix, long iy) { return iy * (1L << 24) + ix; };
  std::unordered_map<long, int> index;
  index.reserve(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d rel = (h.points[i] - lo) / dx;
    const long ix = std::lround(rel.x());
    const long iy = std::lround(rel.y());
    if ((Eigen::Vector2d(double(ix), double(iy)) - rel).norm() > 1e-8) {
      throw InvalidParameterError("build_horizon: points must lie on a uniform lattice");
    }
    index[key(ix, iy)] = i;
  }

  h.offsets.assign(n + 1, 0);
  h.full_coverage.assign(n, false);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d rel = (h.points[i] - lo) / dx;
    const long ix = std::lround(rel.x());
    const long iy = std::lround(rel.y());
    int count = 0;
    for (const auto& o : stencil) {
      const auto it = index.find(key(ix + o.x(), iy + o.y()));
      if (it == index.end()) continue;
      ++count;
      h.neighbors.push_back(it->second);
      const Eigen::Vector2d bond = h.points[it->second] - h.points[i];
      const double r = bond.norm();
      h.xi.push_back(bond);
      h.xi_norm.push_back(r);
      h.weights.push_back(dx * dx * std::min(1.0, (delta - r) / dx + 0.5));
    }
    h.offsets[i + 1] = static_cast<int>(h.neighbors.size());
    h.full_coverage[i] = (count == full_degree);
  }

  if (interior.empty()) {
    for (int i = 0; i < n; ++i) {
      if (h.full_coverage[i]) interior.push_back(i);
    }
  }
  h.interior = std::move(interior);
  return h;
}

/// Ω = nx×ny lattice at origin plus a prescribed-data collar Ω_I of width
/// 2δ; interior is exactly the Ω block.
inline Horizon build_collared_horizon(int nx, int ny, double dx, double delta) {
  const int rings = static_cast<int>(std::ceil(2.0 * delta / dx));
  const int tx = nx + 2 * rings;
  const int ty = ny + 2 * rings;
  auto points = uniform_lattice(tx, ty, dx, Eigen::Vector2d(-rings * dx, -rings * dx));
  std::vector<int> interior;
  interior.reserve(static_cast<size_t>(nx) * ny);
  for (int iy = rings; iy < rings + ny; ++iy) {
    for (int ix = rings; ix < rings + nx; ++ix) {
      interior.push_back(iy * tx + ix);
    }
  }
  return build_horizon(std::move(points), dx, delta, std::move(interior));
}

/// Reference vector, relative displacement, extension and deformed unit
/// direction of one bond.
struct BondState {
  int neighbor = -1;
  Eigen::Vector2d xi;
  Eigen::Vector2d eta;
  double extension = 0.0;
  Eigen::Vector2d direction;
};

inline std::vector<BondState> bond_states(const Displacements& u, const Horizon& h,
                                          int node) {
  if (u.rows() != h.num_points()) {
    throw InvalidParameterError("bond_states: u rows != point count");
  }
  std::vector<BondState> out;
  out.reserve(h.degree(node));
  for (int b = h.offsets[node]; b < h.offsets[node + 1]; ++b) {
    BondState s;
    s.neighbor = h.neighbors[b];
    s.xi = h.xi[b];
    s.eta = (u.row(s.neighbor) - u.row(node)).transpose();
    const Eigen::Vector2d y = s.xi + s.eta;
    const double ny = y.norm();
    if (ny < 1e-14 * h.xi_norm[b]) {
      throw DegenerateBondError("bond collapsed between nodes " + std::to_string(node) +
                                    " and " + std::to_string(s.neighbor),
                                node, s.neighbor);
    }
    s.extension = ny - h.xi_norm[b];
    s.direction = y / ny;
    out.push_back(std::move(s));
  }
  return out;
}

/// R(−α) ξ: aligns the influence kernel with the local fiber direction.
inline Eigen::Vector2d rotate_bond(const Eigen::Vector2d& xi, double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  return {c * xi.x() + s * xi.y(), -s * xi.x() + c * xi.y()};
}

/// Pluggable constitutive pieces: influence kernel ω(ξ), fiber angle α(x),
/// and scalar force state t(ω, θ, e, |ξ|).
struct ForceStateModel {
  std::function<double(const Eigen::Vector2d&)> omega;
  std::function<double(const Eigen::Vector2d&)> alpha = [](const Eigen::Vector2d&) {
    return 0.0;
  };
  std::function<double(double, double, double, double)> t;
  bool uses_dilatation = false;
  enum class Kind { generic, linear_bond, linear_state } kind = Kind::generic;
};

inline std::function<double(const Eigen::Vector2d&)> constant_influence(double delta) {
  return [delta](const Eigen::Vector2d& xi) { return xi.norm() < delta ? 1.0 : 0.0; };
}

/// t = c ω e/|ξ| — bond-based, linear in the extension.
inline ForceStateModel linear_bond_model(double c, double delta) {
  ForceStateModel m;
  m.omega = constant_influence(delta);
  m.t = [c](double omega, double /*theta*/, double e, double xi_norm) {
    return c * omega * e / xi_norm;
  };
  m.uses_dilatation = false;
  m.kind = ForceStateModel::Kind::linear_bond;
  return m;
}

/// t = a θ ω |ξ| + c ω e — ordinary state-based with a dilatation term.
inline ForceStateModel linear_state_model(double a, double c, double delta) {
  ForceStateModel m;
  m.omega = constant_influence(delta);
  m.t = [a, c](double omega, double theta, double e, double xi_norm) {
    return a * theta * omega * xi_norm + c * omega * e;
  };
  m.uses_dilatation = true;
  m.kind = ForceStateModel::Kind::linear_state;
  return m;
}

/// Nonlocal dilatation θ(x) = Σ ω e |ξ| w / Σ ω |ξ|² w over the node's
/// bonds; the influence kernel enters unrotated here.
inline double dilatation(const Displacements& u, const Horizon& h, int node,
                         const ForceStateModel& model) {
  double num = 0.0;
  double den = 0.0;
  for (int b = h.offsets[node]; b < h.offsets[node + 1]; ++b) {
    const double om = model.omega(h.xi[b]);
    const Eigen::Vector2d y =
        h.xi[b] + (u.row(h.neighbors[b]) - u.row(node)).transpose();
    const double e = y.norm() - h.xi_norm[b];
    num += om * e * h.xi_norm[b] * h.weights[b];
    den += om * h.xi_norm[b] * h.xi_norm[b] * h.weights[b];
  }
  if (den <= 0.0) {
    throw InvalidModelError("dilatation: influence kernel vanishes on the horizon of node " +
                            std::to_string(node));
  }
  return num / den;
}

namespace detail {

inline Eigen::VectorXd all_dilatations(const Displacements& u, const Horizon& h,
                                       const ForceStateModel& model) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(h.num_points());
  if (!model.uses_dilatation) return theta;
  for (int i = 0; i < h.num_points(); ++i) theta(i) = dilatation(u, h, i, model);
  return theta;
}

}  // namespace detail

/// G at one node from its bond list; no coverage check (low-level).
inline Eigen::Vector2d operator_at(const Displacements& u, const Horizon& h,
                                   const ForceStateModel& model, int node,
                                   const Eigen::VectorXd& theta) {
  const double theta_x = theta.size() ? theta(node) : 0.0;
  const double alpha_x = model.alpha(h.points[node]);
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (int b = h.offsets[node]; b < h.offsets[node + 1]; ++b) {
    const int q = h.neighbors[b];
    const Eigen::Vector2d y = h.xi[b] + (u.row(q) - u.row(node)).transpose();
    const double ny = y.norm();
    if (ny < 1e-14 * h.xi_norm[b]) {
      throw DegenerateBondError("bond collapsed between nodes " + std::to_string(node) +
                                    " and " + std::to_string(q),
                                node, q);
    }
    const double e = ny - h.xi_norm[b];
    const double om_x = model.omega(rotate_bond(h.xi[b], alpha_x));
    const double om_q =
        model.omega(rotate_bond(-h.xi[b], model.alpha(h.points[q])));
    const double theta_q = theta.size() ? theta(q) : 0.0;
    const double t_pair = model.t(om_x, theta_x, e, h.xi_norm[b]) +
                          model.t(om_q, theta_q, e, h.xi_norm[b]);
    g += (t_pair * h.weights[b] / ny) * y;
  }
  return g;
}

/// Operator field over the requested nodes (default: the designated
/// interior). Requested nodes must have full horizon coverage.
inline Displacements apply_operator(const Displacements& u, const Horizon& h,
                                    const ForceStateModel& model,
                                    const std::vector<int>& nodes) {
  if (u.rows() != h.num_points()) {
    throw InvalidParameterError("apply_operator: u rows != point count");
  }
  std::vector<int> uncovered;
  for (int node : nodes) {
    if (!h.full_coverage[node]) uncovered.push_back(node);
  }
  if (!uncovered.empty()) {
    std::string msg = "apply_operator: nodes lacking full horizon coverage:";
    for (size_t i = 0; i < uncovered.size() && i < 8; ++i) {
      msg += " " + std::to_string(uncovered[i]);
    }
    if (uncovered.size() > 8) msg += " ...";
    throw MissingBoundaryError(std::move(msg), std::move(uncovered));
  }
  const Eigen::VectorXd theta = detail::all_dilatations(u, h, model);
  Displacements g = Displacements::Zero(h.num_points(), 2);
  for (int node : nodes) {
    g.row(node) = operator_at(u, h, model, node, theta).transpose();
  }
  return g;
}

inline Displacements apply_operator(const Displacements& u, const Horizon& h,
                                    const ForceStateModel& model) {
  return apply_operator(u, h, model, h.interior);
}

/// First Piola–Kirchhoff components, stored row-major 2×2.
using StressTensor = Eigen::Matrix2d;

/// P(x) = Σ t·D⊗ξ·w per node, spatially averaged over the interior.
inline StressTensor average_pk1(const Displacements& u, const Horizon& h,
                                const ForceStateModel& model) {
  if (u.rows() != h.num_points()) {
    throw InvalidParameterError("average_pk1: u rows != point count");
  }
  if (h.interior.empty()) {
    throw InvalidParameterError("average_pk1: no interior nodes");
  }
  const Eigen::VectorXd theta = detail::all_dilatations(u, h, model);
  StressTensor acc = StressTensor::Zero();
  for (int node : h.interior) {
    const double theta_x = theta.size() ? theta(node) : 0.0;
    const double alpha_x = model.alpha(h.points[node]);
    for (int b = h.offsets[node]; b < h.offsets[node + 1]; ++b) {
      const int q = h.neighbors[b];
      const Eigen::Vector2d y = h.xi[b] + (u.row(q) - u.row(node)).transpose();
      const double ny = y.norm();
      const double e = ny - h.xi_norm[b];
      const double om_x = model.omega(rotate_bond(h.xi[b], alpha_x));
      const double tx = model.t(om_x, theta_x, e, h.xi_norm[b]);
      acc += (tx * h.weights[b] / ny) * (y * h.xi[b].transpose());
    }
  }
  return acc / static_cast<double>(h.interior.size());
}

/// Discrete L² norm over the interior with nodal quadrature Δx².
inline double l2_norm(const Displacements& f, const Horizon& h) {
  double acc = 0.0;
  for (int node : h.interior) acc += f.row(node).squaredNorm();
  return std::sqrt(acc * h.dx * h.dx);
}

/// Mean over samples of ‖G[u] + b‖_L² / ‖b‖_L².
inline double residual_loss(const std::vector<std::pair<Displacements, Displacements>>& samples,
                            const Horizon& h, const ForceStateModel& model) {
  if (samples.empty()) throw InvalidParameterError("residual_loss: no samples");
  double acc = 0.0;
  for (const auto& [u, b] : samples) {
    const double nb = l2_norm(b, h);
    if (nb == 0.0) {
      throw ZeroDenominatorError("residual_loss: a sample has ||b|| = 0");
    }
    const Displacements g = apply_operator(u, h, model);
    Displacements r = g;
    for (int node : h.interior) r.row(node) += b.row(node);
    acc += l2_norm(r, h) / nb;
  }
  return acc / static_cast<double>(samples.size());
}

struct SolverParams {
  double tol = 1e-8;       // relative residual target
  double b_floor = 1.0;    // ε_b: denominator floor for ‖b‖
  int max_iterations = 100;
  int max_backtracks = 25;
  bool force_picard = false;  // use the frozen-stiffness path even for the
                              // bundled linear model (testing hook)
};

struct SolveResult {
  Displacements u;
  std::vector<double> residual_history;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

/// Per-bond pair stiffness K_b = (t_x + t_q)(e*)/e*, exact for models
/// linear in the extension; used as a secant for generic models.
inline double pair_stiffness(const Horizon& h, const ForceStateModel& model, int node,
                             int bond, double probe_extension) {
  const int q = h.neighbors[bond];
  const double om_x = model.omega(rotate_bond(h.xi[bond], model.alpha(h.points[node])));
  const double om_q =
      model.omega(rotate_bond(-h.xi[bond], model.alpha(h.points[q])));
  const double t1 = model.t(om_x, 0.0, probe_extension, h.xi_norm[bond]) +
                    model.t(om_q, 0.0, probe_extension, h.xi_norm[bond]);
  const double t0 = model.t(om_x, 0.0, 0.0, h.xi_norm[bond]) +
                    model.t(om_q, 0.0, 0.0, h.xi_norm[bond]);
  return (t1 - t0) / probe_extension;
}

inline Eigen::VectorXd interior_residual(const Displacements& u, const Horizon& h,
                                         const ForceStateModel& model,
                                         const Displacements& b) {
  const Eigen::VectorXd theta = all_dilatations(u, h, model);
  Eigen::VectorXd r(2 * h.interior.size());
  for (size_t k = 0; k < h.interior.size(); ++k) {
    const int node = h.interior[k];
    const Eigen::Vector2d g =
        operator_at(u, h, model, node, theta) + b.row(node).transpose();
    r(2 * k) = g.x();
    r(2 * k + 1) = g.y();
  }
  return r;
}

}  // namespace detail

/// Solves G[u] + b = 0 on the interior with u fixed to `bc_and_init` on the
/// complement (the interior rows of `bc_and_init` seed the iteration).
/// Damped Newton with the exact bond Jacobian for the bundled linear
/// bond-based model; frozen-stiffness Picard for everything else.
inline SolveResult solve_displacement(const Displacements& b, const Displacements& bc_and_init,
                                      const Horizon& h, const ForceStateModel& model,
                                      const SolverParams& params = {}) {
  if (b.rows() != h.num_points() || bc_and_init.rows() != h.num_points()) {
    throw InvalidParameterError("solve_displacement: field rows != point count");
  }
  const int ni = static_cast<int>(h.interior.size());
  if (ni == 0) throw InvalidParameterError("solve_displacement: no interior nodes");
  {
    std::vector<int> uncovered;
    for (int node : h.interior) {
      if (!h.full_coverage[node]) uncovered.push_back(node);
    }
    if (!uncovered.empty()) {
      throw MissingBoundaryError("solve_displacement: interior nodes lack boundary data",
                                 std::move(uncovered));
    }
  }

  std::vector<int> dof(h.num_points(), -1);
  for (int k = 0; k < ni; ++k) dof[h.interior[k]] = k;

  const bool newton = (model.kind == ForceStateModel::Kind::linear_bond) &&
                      !params.force_picard;
  const double denom = std::max(l2_norm(b, h), params.b_floor);

  Displacements u = bc_and_init;
  Eigen::VectorXd r = detail::interior_residual(u, h, model, b);
  const double quad = h.dx;  // ||r||_L2 = |r|_2 * dx in 2D
  SolveResult result;
  result.residual = r.norm() * quad / denom;
  result.residual_history.push_back(result.residual);

  Eigen::MatrixXd jac(2 * ni, 2 * ni);
  Eigen::LDLT<Eigen::MatrixXd> frozen;
  const auto assemble = [&](const Displacements& uu, bool reference) {
    jac.setZero();
    for (int k = 0; k < ni; ++k) {
      const int node = h.interior[k];
      for (int bnd = h.offsets[node]; bnd < h.offsets[node + 1]; ++bnd) {
        const int q = h.neighbors[bnd];
        const double kb = detail::pair_stiffness(
            h, model, node, bnd, reference ? 1e-6 * h.xi_norm[bnd] : h.xi_norm[bnd]);
        Eigen::Matrix2d block;
        if (reference) {
          const Eigen::Vector2d d = h.xi[bnd] / h.xi_norm[bnd];
          block = kb * h.weights[bnd] * (d * d.transpose());
        } else {
          const Eigen::Vector2d y =
              h.xi[bnd] + (uu.row(q) - uu.row(node)).transpose();
          const double ny = y.norm();
          const Eigen::Vector2d d = y / ny;
          const double s = (ny - h.xi_norm[bnd]) / ny;
          block = kb * h.weights[bnd] *
                  (d * d.transpose() + s * (Eigen::Matrix2d::Identity() - d * d.transpose()));
        }
        jac.block<2, 2>(2 * k, 2 * k) -= block;
        const int qd = dof[q];
        if (qd >= 0) jac.block<2, 2>(2 * k, 2 * qd) += block;
      }
    }
  };

  if (!newton) {
    assemble(u, /*reference=*/true);
    frozen.compute(jac);
    if (frozen.info() != Eigen::Success) {
      throw InvalidModelError("solve_displacement: reference stiffness not factorizable");
    }
  }

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (result.residual < params.tol) {
      result.u = std::move(u);
      result.iterations = iter;
      return result;
    }
    Eigen::VectorXd step;
    if (newton) {
      assemble(u, /*reference=*/false);
      step = jac.ldlt().solve(-r);
    } else {
      step = frozen.solve(-r);
    }

    double lambda = 1.0;
    bool accepted = false;
    const double rnorm = r.norm();
    for (int bt = 0; bt <= params.max_backtracks; ++bt) {
      Displacements trial = u;
      for (int k = 0; k < ni; ++k) {
        trial(h.interior[k], 0) += lambda * step(2 * k);
        trial(h.interior[k], 1) += lambda * step(2 * k + 1);
      }
      Eigen::VectorXd rt = detail::interior_residual(trial, h, model, b);
      if (rt.norm() < rnorm) {
        u = std::move(trial);
        r = std::move(rt);
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    result.residual = r.norm() * quad / denom;
    result.residual_history.push_back(result.residual);
    if (!accepted) {
      throw NonConvergenceError("solve_displacement: no descent after backtracking",
                                result.residual_history);
    }
  }
  if (result.residual < params.tol) {
    result.u = std::move(u);
    result.iterations = params.max_iterations;
    return result;
  }
  throw NonConvergenceError("solve_displacement: residual " +
                                std::to_string(result.residual) + " after " +
                                std::to_string(params.max_iterations) + " iterations",
                            result.residual_history);
}

}  // namespace pgs::peri
