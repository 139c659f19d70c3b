#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <optional>
#include <string>

#include "pgs/errors.hpp"
#include "pgs/field_recon.hpp"
#include "pgs/rk_basis.hpp"

namespace pgs::opt {

using recon::CoefficientField;

/// Which normal strain components the positivity penalty applies to.
/// Uniaxial-dominant protocols penalize only the dominant direction.
struct ConstraintMask {
  bool e11 = true;
  bool e22 = true;
};

/// Direction of the penalty rescaling. `loss_ratio` multiplies β̃ by
/// loss_u(ū†)/loss_E(ū†), which makes β·loss_E commensurate with loss_u;
/// `algorithm1` uses the reciprocal factor for comparison runs.
enum class BetaForm { loss_ratio, algorithm1 };

struct PGSConfig {
  double beta_tilde = 100.0;
  int max_epochs = 50000;
  double tol_u = 3.0;
  double tol_e = 1e-5;
  double learning_rate = 1e-5;
  double lr_decay = 0.9;
  int lr_decay_every = 1000;
  ConstraintMask constraint_mask;
  double strain_eps = 0.0;  // skip when min masked strain >= -strain_eps
  BetaForm beta_form = BetaForm::loss_ratio;
  // Adam internals; standard defaults, exposed for reproducibility.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (max_epochs < 1) throw InvalidParameterError("PGSConfig: max_epochs must be >= 1");
    if (tol_u <= 0.0 || tol_e <= 0.0)
      throw InvalidParameterError("PGSConfig: tolerances must be positive");
    if (learning_rate <= 0.0)
      throw InvalidParameterError("PGSConfig: learning rate must be positive");
    if (lr_decay <= 0.0 || lr_decay > 1.0)
      throw InvalidParameterError("PGSConfig: lr_decay must be in (0, 1]");
    if (lr_decay_every < 1)
      throw InvalidParameterError("PGSConfig: lr_decay_every must be >= 1");
    if (beta_tilde < 0.0)
      throw InvalidParameterError("PGSConfig: beta_tilde must be non-negative");
  }
};

/// One DIC snapshot: measured nodal displacements plus the constraint mask.
struct DisplacementSample {
  Eigen::Matrix<double, Eigen::Dynamic, 2> u_exp;
  std::string protocol_id;
  ConstraintMask constraint_mask;
};

struct PGSReport {
  double loss_u_initial = 0.0;   // β_u = loss_u(ū†)
  double loss_e_initial = 0.0;   // β_E = loss_E(ū†)
  double beta_effective = 0.0;   // rescaled β
  int epochs_run = 0;            // Adam updates performed
  double loss_u_final = 0.0;     // losses of the returned iterate
  double loss_e_final = 0.0;
  bool converged = false;        // Algorithm-1 break condition fired
  bool skipped = false;          // warm start already feasible (or β̃ = 0)
  // Loop-break (or last) iterate, kept alongside the best-feasible return.
  double loss_u_last = 0.0;
  double loss_e_last = 0.0;
  CoefficientField last_coeffs;
};

/// Σ_J |Σ_I Φ ū_I − u_exp(x_J)|².
inline double loss_u(const CoefficientField& coeffs, const rk::RKBasis& basis,
                     const DisplacementSample& sample) {
  if (coeffs.rows() != basis.num_centers() || sample.u_exp.rows() != basis.num_points()) {
    throw InvalidParameterError("loss_u: dimension mismatch");
  }
  return (basis.shape * coeffs - sample.u_exp).squaredNorm();
}

namespace detail {

struct StrainWork {
  Eigen::ArrayXd e11, e22;        // masked-relevant normal strains
  Eigen::ArrayXd g11, g21, g12, g22;
  Eigen::ArrayXd r;               // relu(-E11)·m1 + relu(-E22)·m2 per point
};

inline void eval_strain(const CoefficientField& coeffs, const rk::RKBasis& basis,
                        const ConstraintMask& mask, StrainWork& w) {
  const Eigen::Matrix<double, Eigen::Dynamic, 2> gx = basis.grad_x * coeffs;
  const Eigen::Matrix<double, Eigen::Dynamic, 2> gy = basis.grad_y * coeffs;
  w.g11 = gx.col(0).array();
  w.g21 = gx.col(1).array();
  w.g12 = gy.col(0).array();
  w.g22 = gy.col(1).array();
  w.e11 = w.g11 + 0.5 * (w.g11.square() + w.g21.square());
  w.e22 = w.g22 + 0.5 * (w.g12.square() + w.g22.square());
  w.r = Eigen::ArrayXd::Zero(w.e11.size());
  if (mask.e11) w.r += (-w.e11).max(0.0);
  if (mask.e22) w.r += (-w.e22).max(0.0);
}

}  // namespace detail

/// Σ_J |relu(−E11) + relu(−E22)|², components per the constraint mask.
inline double loss_e(const CoefficientField& coeffs, const rk::RKBasis& basis,
                     const DisplacementSample& sample) {
  if (coeffs.rows() != basis.num_centers() || sample.u_exp.rows() != basis.num_points()) {
    throw InvalidParameterError("loss_e: dimension mismatch");
  }
  detail::StrainWork w;
  detail::eval_strain(coeffs, basis, sample.constraint_mask, w);
  return w.r.square().sum();
}

/// Least-squares minimizer of loss_u: ū† solves min ‖Φ ū − U_exp‖ per
/// displacement component, via SVD (no explicit normal equations).
inline CoefficientField analytic_fit(const rk::RKBasis& basis,
                                     const DisplacementSample& sample) {
  if (sample.u_exp.rows() != basis.num_points()) {
    throw InvalidParameterError("analytic_fit: sample size != basis rows");
  }
  if (!sample.u_exp.allFinite()) {
    throw InvalidParameterError("analytic_fit: non-finite measurements");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(basis.shape,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double smax = sv(0);
  if (!(smin > 0.0) || smax / smin > 1e12) {
    throw RankDeficiencyError(
        "analytic_fit: shape matrix rank-deficient, smallest singular value " +
            std::to_string(smin),
        smin);
  }
  return svd.solve(sample.u_exp);
}

/// β = β̃ · β_u / β_E (loss-ratio form). Returns nullopt when β_E = 0,
/// signalling "skip optimization" rather than raising on the division.
inline std::optional<double> rescale_beta(double beta_tilde, double beta_u, double beta_e,
                                          BetaForm form = BetaForm::loss_ratio) {
  if (beta_tilde < 0.0 || beta_u < 0.0 || beta_e < 0.0) {
    throw InvalidParameterError("rescale_beta: negative loss");
  }
  if (beta_e == 0.0) return std::nullopt;
  if (beta_u == 0.0) throw InvalidParameterError("rescale_beta: beta_u must be positive");
  return form == BetaForm::loss_ratio ? beta_tilde * beta_u / beta_e
                                      : beta_tilde * beta_e / beta_u;
}

/// First-moment/second-moment accumulators for Adam.
struct AdamState {
  Eigen::ArrayXXd m;
  Eigen::ArrayXXd v;
  long timestep = 0;

  static AdamState zeros(Eigen::Index rows, Eigen::Index cols) {
    AdamState s;
    s.m = Eigen::ArrayXXd::Zero(rows, cols);
    s.v = Eigen::ArrayXXd::Zero(rows, cols);
    return s;
  }
};

/// Standard Adam update with bias correction.
inline void adam_step(Eigen::Ref<Eigen::ArrayXXd> params, const Eigen::ArrayXXd& grads,
                      AdamState& state, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      params.rows() != state.m.rows() || params.cols() != state.m.cols()) {
    throw InvalidParameterError("adam_step: shape mismatch");
  }
  state.timestep += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grads;
  state.v = beta2 * state.v + (1.0 - beta2) * grads.square();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.timestep));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.timestep));
  params -= lr * (state.m / bc1) / ((state.v / bc2).sqrt() + eps);
}

/// Analytic gradient of loss_u + β·loss_E with respect to the coefficients.
/// relu' at exactly zero is taken as 0.
inline CoefficientField hybrid_gradient(const CoefficientField& coeffs,
                                        const rk::RKBasis& basis,
                                        const DisplacementSample& sample, double beta) {
  CoefficientField grad(coeffs.rows(), 2);
  grad.noalias() = 2.0 * (basis.shape.transpose() * (basis.shape * coeffs - sample.u_exp));
  if (beta == 0.0) return grad;

  detail::StrainWork w;
  detail::eval_strain(coeffs, basis, sample.constraint_mask, w);
  const auto& mask = sample.constraint_mask;
  const Eigen::ArrayXd p =
      mask.e11 ? Eigen::ArrayXd(2.0 * w.r * (w.e11 < 0.0).cast<double>())
               : Eigen::ArrayXd(Eigen::ArrayXd::Zero(w.r.size()));
  const Eigen::ArrayXd q =
      mask.e22 ? Eigen::ArrayXd(2.0 * w.r * (w.e22 < 0.0).cast<double>())
               : Eigen::ArrayXd(Eigen::ArrayXd::Zero(w.r.size()));
  grad.col(0).noalias() -=
      beta * (basis.grad_x.transpose() * (p * (1.0 + w.g11)).matrix() +
              basis.grad_y.transpose() * (q * w.g12).matrix());
  grad.col(1).noalias() -=
      beta * (basis.grad_x.transpose() * (p * w.g21).matrix() +
              basis.grad_y.transpose() * (q * (1.0 + w.g22)).matrix());
  return grad;
}

/// Penalized-smoothing driver. Warm-starts from the analytic fit, skips the
/// loop entirely when no masked strain is negative (or β̃ = 0), otherwise
/// runs Adam on loss_u + β·loss_E until loss_E ≤ TOL_E·β_E and
/// loss_u ≤ TOL_u·β_u, or the epoch budget runs out. Returns the iterate
/// with the smallest loss_u among those meeting the loss_E criterion; the
/// loop-break iterate is kept in the report.
inline std::pair<CoefficientField, PGSReport> run_pgs(const DisplacementSample& sample,
                                                      const rk::RKBasis& basis,
                                                      const PGSConfig& config) {
  config.validate();
  CoefficientField coeffs = analytic_fit(basis, sample);

  PGSReport report;
  report.loss_u_initial = loss_u(coeffs, basis, sample);
  report.loss_e_initial = loss_e(coeffs, basis, sample);

  detail::StrainWork w;
  detail::eval_strain(coeffs, basis, sample.constraint_mask, w);
  double min_masked = 0.0;
  if (sample.constraint_mask.e11) min_masked = std::min(min_masked, w.e11.minCoeff());
  if (sample.constraint_mask.e22) min_masked = std::min(min_masked, w.e22.minCoeff());

  if (config.beta_tilde == 0.0 || min_masked >= -config.strain_eps) {
    report.skipped = true;
    report.loss_u_final = report.loss_u_initial;
    report.loss_e_final = report.loss_e_initial;
    report.loss_u_last = report.loss_u_initial;
    report.loss_e_last = report.loss_e_initial;
    report.last_coeffs = coeffs;
    return {std::move(coeffs), report};
  }

  const auto beta = rescale_beta(config.beta_tilde, report.loss_u_initial,
                                 report.loss_e_initial, config.beta_form);
  if (!beta) {  // loss_E = 0 with negative strain beyond eps cannot happen
    report.skipped = true;
    report.loss_u_final = report.loss_u_initial;
    report.loss_e_final = report.loss_e_initial;
    report.last_coeffs = coeffs;
    return {std::move(coeffs), report};
  }
  report.beta_effective = *beta;

  const double stop_u = config.tol_u * report.loss_u_initial;
  const double stop_e = config.tol_e * report.loss_e_initial;

  AdamState state = AdamState::zeros(coeffs.rows(), 2);
  CoefficientField best = coeffs;
  double best_lu = std::numeric_limits<double>::infinity();
  double best_le = 0.0;
  bool seen_feasible = false;

  double lu = report.loss_u_initial;
  double le = report.loss_e_initial;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (epoch > 0) {
      lu = loss_u(coeffs, basis, sample);
      detail::eval_strain(coeffs, basis, sample.constraint_mask, w);
      le = w.r.square().sum();
    }
    if (le <= stop_e && !seen_feasible) {
      seen_feasible = true;
      best = coeffs;
      best_lu = lu;
      best_le = le;
    } else if (le <= stop_e && lu < best_lu) {
      best = coeffs;
      best_lu = lu;
      best_le = le;
    }
    if (le <= stop_e && lu <= stop_u) {
      report.converged = true;
      break;
    }
    const double lr = config.learning_rate *
                      std::pow(config.lr_decay, epoch / config.lr_decay_every);
    const CoefficientField grad = hybrid_gradient(coeffs, basis, sample, *beta);
    Eigen::ArrayXXd params = coeffs.array();
    adam_step(params, grad.array(), state, lr, config.adam_beta1, config.adam_beta2,
              config.adam_eps);
    coeffs = params.matrix();
    report.epochs_run += 1;
  }

  // Losses of the loop-break (or budget-exhausted) iterate.
  report.loss_u_last = loss_u(coeffs, basis, sample);
  report.loss_e_last = loss_e(coeffs, basis, sample);
  if (!report.converged && report.loss_e_last <= stop_e &&
      report.loss_u_last < best_lu) {
    seen_feasible = true;
    best = coeffs;
    best_lu = report.loss_u_last;
    best_le = report.loss_e_last;
  }
  report.last_coeffs = coeffs;

  if (seen_feasible) {
    report.loss_u_final = best_lu;
    report.loss_e_final = best_le;
    return {std::move(best), report};
  }
  report.loss_u_final = report.loss_u_last;
  report.loss_e_final = report.loss_e_last;
  return {std::move(coeffs), report};
}

}  // namespace pgs::opt
