#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "causalab/dataset.hpp"
#include "causalab/error.hpp"
#include "causalab/numerics.hpp"
#include "causalab/types.hpp"

// Invariant risk minimization, linear specialization: h(x) = x'beta + b with
// the scalar classifier frozen at w = 1. The penalty is
//   sum_e ( d/dw mean_e((w h - y)^2) |_{w=1} )^2,
// whose per-environment derivative is 2 mean((h - y) h).

namespace causalab {

struct IrmConfig {
  double penalty_weight = 0.0;  // lambda
  double learning_rate = 1.0;   // initial line-search step
  int iterations = 200;
  double init_scale = 0.01;
};

struct IrmEnv {
  Matrix features;
  Vector targets;
};

// Extract (features, outcome) views from datasets sharing a schema.
inline std::vector<IrmEnv> irm_environments(std::span<const Dataset> envs,
                                            const std::vector<std::string>& features) {
  std::vector<IrmEnv> out;
  out.reserve(envs.size());
  for (const Dataset& ds : envs) {
    for (const std::string& f : features)
      if (!ds.has(f))
        throw ConfigError("irm: environment schema mismatch, missing column '" + f + "'");
    out.push_back({ds.feature_matrix(features), ds.col(ds.outcome_name())});
  }
  return out;
}

// d/dw mean((w*h - y)^2) at w = 1, computed analytically.
inline double risk_scale_derivative(const IrmEnv& env, const Vector& coefficients,
                                    double intercept) {
  const Vector h = (env.features * coefficients).array() + intercept;
  const Vector r = h - env.targets;
  return 2.0 * r.dot(h) / static_cast<double>(env.targets.size());
}

inline double irm_penalty(const Vector& coefficients, double intercept,
                          std::span<const IrmEnv> envs) {
  double total = 0;
  for (const IrmEnv& env : envs) {
    if (env.features.cols() != coefficients.size())
      throw ConfigError("irm_penalty: environment schema mismatch");
    const double d = risk_scale_derivative(env, coefficients, intercept);
    total += d * d;
  }
  return total;
}

inline double irm_penalty(const LinearFit& fit, std::span<const IrmEnv> envs) {
  if (fit.loss_kind != LossKind::squared)
    throw ConfigError("irm_penalty: squared loss required");
  return irm_penalty(fit.coefficients, fit.intercept, envs);
}

inline double irm_penalty(const LinearFit& fit, std::span<const Dataset> envs,
                          const std::vector<std::string>& features) {
  const std::vector<IrmEnv> views = irm_environments(envs, features);
  return irm_penalty(fit, views);
}

// Analytic gradient of the penalty with respect to (coefficients..., intercept).
inline Vector irm_penalty_gradient(std::span<const IrmEnv> envs, const Vector& coefficients,
                                   double intercept) {
  const Index p = coefficients.size();
  Vector grad = Vector::Zero(p + 1);
  for (const IrmEnv& env : envs) {
    const double n = static_cast<double>(env.targets.size());
    const Vector h = (env.features * coefficients).array() + intercept;
    const Vector r = h - env.targets;
    const double d = 2.0 * r.dot(h) / n;
    const Vector two_h_minus_y = 2.0 * h - env.targets;
    Vector dgrad(p + 1);
    dgrad.head(p) = 2.0 / n * (env.features.transpose() * two_h_minus_y);
    dgrad(p) = 2.0 / n * two_h_minus_y.sum();
    grad += 2.0 * d * dgrad;
  }
  return grad;
}

struct IrmFitResult {
  LinearFit fit;
  double objective = 0;  // sum_e risk + lambda * penalty at the solution
  double risk = 0;
  double penalty = 0;
  int iterations_used = 0;
};

namespace detail {

// Precomputed per-environment quadratics: risk and scale derivative are both
// functions of G = A'A and b = A'y with A = [X 1].
struct IrmEnvQuad {
  Matrix gram;   // (p+1) x (p+1)
  Vector xty;    // p+1
  double yty = 0;
  double n = 0;
};

struct IrmPieces {
  double objective = 0;
  double risk = 0;
  double penalty = 0;
  Vector grad;
  Matrix hess;
};

inline IrmPieces irm_pieces(const std::vector<IrmEnvQuad>& envs, const Vector& theta,
                            double lambda, bool with_hessian) {
  const Index q = theta.size();
  IrmPieces out;
  out.grad = Vector::Zero(q);
  if (with_hessian) out.hess = Matrix::Zero(q, q);
  for (const IrmEnvQuad& e : envs) {
    const Vector gtheta = e.gram * theta;
    const double quad = theta.dot(gtheta);
    const double lin = e.xty.dot(theta);
    const double risk = (quad - 2 * lin + e.yty) / e.n;
    const double d = 2.0 * (quad - lin) / e.n;
    const Vector grad_risk = 2.0 / e.n * (gtheta - e.xty);
    const Vector grad_d = 2.0 / e.n * (2.0 * gtheta - e.xty);
    out.risk += risk;
    out.penalty += d * d;
    out.grad += grad_risk + lambda * 2.0 * d * grad_d;
    if (with_hessian)
      out.hess += 2.0 / e.n * e.gram +
                  lambda * (2.0 * grad_d * grad_d.transpose() + 2.0 * d * (4.0 / e.n) * e.gram);
  }
  out.objective = out.risk + lambda * out.penalty;
  return out;
}

// Damped Levenberg-modified Newton descent on the (possibly nonconvex)
// penalized objective. Monotone via step halving; converged when the
// gradient sup-norm falls below tol.
inline Vector irm_descend(const std::vector<IrmEnvQuad>& envs, Vector theta, double lambda,
                          double step0, int max_iterations, int* used) {
  constexpr double kGradTol = 1e-10;
  for (int it = 0; it < max_iterations; ++it) {
    IrmPieces pieces = irm_pieces(envs, theta, lambda, true);
    if (!std::isfinite(pieces.objective))
      throw ConvergenceError("irm_fit: objective diverged; use a smaller learning_rate",
                             std::numeric_limits<double>::infinity());
    if (pieces.grad.lpNorm<Eigen::Infinity>() <= kGradTol) break;
    ++(*used);

    Vector dir;
    double mu = 0;
    for (;;) {
      Matrix damped = pieces.hess;
      if (mu > 0) damped.diagonal().array() += mu;
      Eigen::LDLT<Matrix> ldlt(damped);
      if (ldlt.info() == Eigen::Success) {
        dir = -ldlt.solve(pieces.grad);
        if (pieces.grad.dot(dir) < 0) break;
      }
      mu = mu == 0 ? 1e-8 : mu * 10;
      if (mu > 1e16) {
        dir = -pieces.grad;
        break;
      }
    }

    double step = step0;
    bool moved = false;
    for (int h = 0; h < 80; ++h) {
      const Vector trial = theta + step * dir;
      const double obj = irm_pieces(envs, trial, lambda, false).objective;
      if (std::isfinite(obj) && obj <= pieces.objective) {
        theta = trial;
        moved = true;
        break;
      }
      step /= 2;
    }
    if (!moved) break;
  }
  return theta;
}

}  // namespace detail

// Fit the penalized objective sum_e R^e + lambda * penalty over
// (coefficients, intercept). Solved by continuation: the convex lambda = 0
// problem first (from the init_scale start), then the penalized problem
// warm-started from that minimizer, which keeps the nonconvex stage inside
// the pooled-risk basin.
inline IrmFitResult irm_fit(std::span<const IrmEnv> envs, const IrmConfig& cfg) {
  if (envs.size() < 2) throw ConfigError("irm_fit: need at least 2 environments");
  if (cfg.iterations < 1) throw ConfigError("irm_fit: iterations must be >= 1");
  if (!(cfg.learning_rate > 0)) throw ConfigError("irm_fit: learning_rate must be > 0");
  if (cfg.penalty_weight < 0) throw ConfigError("irm_fit: penalty_weight must be >= 0");
  const Index p = envs[0].features.cols();
  for (const IrmEnv& e : envs)
    if (e.features.cols() != p || e.features.rows() != e.targets.size())
      throw ConfigError("irm_fit: environment schema mismatch");

  std::vector<detail::IrmEnvQuad> quads;
  quads.reserve(envs.size());
  for (const IrmEnv& e : envs) {
    const Index n = e.targets.size();
    Matrix design(n, p + 1);
    design.leftCols(p) = e.features;
    design.col(p).setOnes();
    detail::IrmEnvQuad q;
    q.gram = design.transpose() * design;
    q.xty = design.transpose() * e.targets;
    q.yty = e.targets.squaredNorm();
    q.n = static_cast<double>(n);
    quads.push_back(std::move(q));
  }

  Vector theta = Vector::Constant(p + 1, cfg.init_scale);
  theta(p) = 0;
  const double step0 = std::min(1.0, cfg.learning_rate);
  int used = 0;
  theta = detail::irm_descend(quads, std::move(theta), 0.0, step0, cfg.iterations, &used);
  if (cfg.penalty_weight > 0)
    theta = detail::irm_descend(quads, std::move(theta), cfg.penalty_weight, step0,
                                cfg.iterations, &used);

  const detail::IrmPieces final = detail::irm_pieces(quads, theta, cfg.penalty_weight, false);

  IrmFitResult out;
  out.fit.coefficients = theta.head(p);
  out.fit.intercept = theta(p);
  out.fit.loss_kind = LossKind::squared;
  Index total = 0;
  for (const IrmEnv& e : envs) total += e.targets.size();
  out.fit.residuals.resize(total);
  Index at = 0;
  for (const IrmEnv& e : envs) {
    out.fit.residuals.segment(at, e.targets.size()) =
        e.targets - ((e.features * out.fit.coefficients).array() + out.fit.intercept).matrix();
    at += e.targets.size();
  }
  out.objective = final.objective;
  out.risk = final.risk;
  out.penalty = final.penalty;
  out.iterations_used = used;
  return out;
}

inline IrmFitResult irm_fit(std::span<const Dataset> envs,
                            const std::vector<std::string>& features, const IrmConfig& cfg) {
  const std::vector<IrmEnv> views = irm_environments(envs, features);
  return irm_fit(std::span<const IrmEnv>(views), cfg);
}

}  // namespace causalab
