#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "causalab/error.hpp"
#include "causalab/types.hpp"

// Dense regression primitives shared by every estimator. Free functions take
// Eigen expressions, so callers can pass blocks and maps without copies.

namespace causalab {

enum class LossKind { squared, logistic };

template <typename Scalar>
struct LinearFitT {
  VecX<Scalar> coefficients;  // one per feature column
  Scalar intercept = 0;
  VecX<Scalar> residuals;  // y - prediction on the training sample
  LossKind loss_kind = LossKind::squared;

  Index n_features() const { return coefficients.size(); }
};

using LinearFit = LinearFitT<double>;

struct FitConfig {
  int max_iterations = 100;
  double tolerance = 1e-8;  // gradient sup-norm stop
  double ridge = 0.0;
};

// Least squares with intercept, solved by column-pivoted Householder QR.
// ridge > 0 penalizes the feature coefficients (never the intercept) by
// stacking sqrt(ridge) rows, which keeps the solve a single QR.
template <typename DerivedX, typename DerivedY>
LinearFitT<typename DerivedX::Scalar> ols_fit(const Eigen::MatrixBase<DerivedX>& features,
                                              const Eigen::MatrixBase<DerivedY>& targets,
                                              double ridge = 0.0) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = features.rows();
  const Index p = features.cols();
  if (targets.size() != n) throw ConfigError("ols_fit: feature rows and target length differ");
  if (n < p + 1)
    throw ConfigError("ols_fit: need rows >= cols+1 (" + std::to_string(n) + " rows, " +
                      std::to_string(p) + " features)");
  if (ridge < 0) throw ConfigError("ols_fit: ridge must be >= 0");

  const Index rows = ridge > 0 ? n + p : n;
  MatX<Scalar> design = MatX<Scalar>::Zero(rows, p + 1);
  design.topLeftCorner(n, p) = features;
  design.col(p).head(n).setOnes();
  VecX<Scalar> rhs = VecX<Scalar>::Zero(rows);
  rhs.head(n) = targets;
  if (ridge > 0)
    design.block(n, 0, p, p).diagonal().setConstant(std::sqrt(static_cast<Scalar>(ridge)));

  Eigen::ColPivHouseholderQR<MatX<Scalar>> qr(design);
  if (ridge == 0 && qr.rank() < p + 1)
    throw SingularityError("ols_fit: rank-deficient design (exactly collinear columns)");
  const VecX<Scalar> theta = qr.solve(rhs);

  LinearFitT<Scalar> fit;
  fit.coefficients = theta.head(p);
  fit.intercept = theta(p);
  fit.residuals = targets.derived() - features.derived() * fit.coefficients -
                  VecX<Scalar>::Constant(n, fit.intercept);
  fit.loss_kind = LossKind::squared;
  return fit;
}

// Columns x, x^2, ..., x^degree (the intercept is the fit's job).
template <typename Derived>
MatX<typename Derived::Scalar> poly_features(const Eigen::MatrixBase<Derived>& x, int degree) {
  using Scalar = typename Derived::Scalar;
  if (degree < 1) throw ConfigError("poly_features: degree must be >= 1");
  MatX<Scalar> out(x.size(), degree);
  out.col(0) = x;
  for (int d = 1; d < degree; ++d) out.col(d) = out.col(d - 1).cwiseProduct(x.derived());
  return out;
}

namespace detail {

// log(1 + exp(eta)) - y*eta, evaluated without overflow.
template <typename Scalar>
Scalar logistic_nll_term(Scalar eta, Scalar y) {
  if (eta > 0) return (1 - y) * eta + std::log1p(std::exp(-eta));
  return -y * eta + std::log1p(std::exp(eta));
}

}  // namespace detail

// Ridge-regularized maximum-likelihood logistic regression by damped Newton
// with step halving. Converged when the mean-scale gradient sup-norm falls
// below cfg.tolerance.
template <typename DerivedX, typename DerivedY>
LinearFitT<typename DerivedX::Scalar> logistic_fit(const Eigen::MatrixBase<DerivedX>& features,
                                                   const Eigen::MatrixBase<DerivedY>& labels,
                                                   const FitConfig& cfg = {}) {
  using Scalar = typename DerivedX::Scalar;
  const Index n = features.rows();
  const Index p = features.cols();
  if (labels.size() != n) throw ConfigError("logistic_fit: feature rows and label length differ");
  if (cfg.max_iterations < 1) throw ConfigError("logistic_fit: max_iterations must be >= 1");
  if (!(cfg.tolerance > 0)) throw ConfigError("logistic_fit: tolerance must be > 0");
  if (cfg.ridge < 0) throw ConfigError("logistic_fit: ridge must be >= 0");

  Index ones = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar y = labels(i);
    if (y != Scalar(0) && y != Scalar(1))
      throw ConfigError("logistic_fit: labels must be 0 or 1");
    ones += y == Scalar(1);
  }
  if (ones == 0 || ones == n)
    throw ConfigError("logistic_fit: need at least one sample of each class");

  MatX<Scalar> design(n, p + 1);
  design.leftCols(p) = features;
  design.col(p).setOnes();
  const VecX<Scalar> y = labels;

  auto loss = [&](const VecX<Scalar>& theta) {
    const VecX<Scalar> eta = design * theta;
    Scalar total = 0;
    for (Index i = 0; i < n; ++i) total += detail::logistic_nll_term(eta(i), y(i));
    return total / static_cast<Scalar>(n) +
           Scalar(0.5) * cfg.ridge * theta.head(p).squaredNorm();
  };

  VecX<Scalar> theta = VecX<Scalar>::Zero(p + 1);
  VecX<Scalar> grad(p + 1);
  Scalar grad_norm = std::numeric_limits<Scalar>::infinity();
  bool converged = false;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const VecX<Scalar> eta = design * theta;
    const VecX<Scalar> prob = (Scalar(1) / (Scalar(1) + (-eta.array()).exp())).matrix();
    grad = design.transpose() * (prob - y) / static_cast<Scalar>(n);
    grad.head(p) += cfg.ridge * theta.head(p);
    grad_norm = grad.template lpNorm<Eigen::Infinity>();
    if (grad_norm <= cfg.tolerance) {
      converged = true;
      break;
    }

    const VecX<Scalar> w = prob.array() * (Scalar(1) - prob.array());
    MatX<Scalar> hess =
        design.transpose() * w.asDiagonal() * design / static_cast<Scalar>(n);
    hess.topLeftCorner(p, p).diagonal().array() += cfg.ridge;

    Eigen::LDLT<MatX<Scalar>> ldlt(hess);
    VecX<Scalar> dir = -ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !(grad.dot(dir) < 0)) dir = -grad;

    const Scalar base = loss(theta);
    // Near the optimum a full Newton step may change the loss by less than
    // its floating-point resolution; the slack keeps such steps acceptable.
    const Scalar slack = Scalar(1e-12) * std::max(Scalar(1), std::abs(base));
    Scalar step = 1;
    bool moved = false;
    for (int h = 0; h < 60; ++h) {
      const Scalar trial = loss(theta + step * dir);
      if (std::isfinite(trial) && trial <= base + slack) {
        theta += step * dir;
        moved = true;
        break;
      }
      step /= 2;
    }
    if (!moved) break;  // numerically stuck; the gradient check below decides
  }

  if (!converged)
    throw ConvergenceError("logistic_fit: no convergence after " +
                               std::to_string(cfg.max_iterations) +
                               " iterations (gradient sup-norm " + std::to_string(grad_norm) + ")",
                           grad_norm);

  const VecX<Scalar> eta = design * theta;
  if (cfg.ridge == 0) {
    bool all_correct = true;
    for (Index i = 0; i < n && all_correct; ++i)
      all_correct = (eta(i) > 0) == (y(i) == Scalar(1));
    if (all_correct && eta.cwiseAbs().maxCoeff() > Scalar(30))
      throw ConvergenceError("logistic_fit: perfect separation with ridge = 0", grad_norm);
  }

  LinearFitT<Scalar> fit;
  fit.coefficients = theta.head(p);
  fit.intercept = theta(p);
  fit.residuals = y - (Scalar(1) / (Scalar(1) + (-eta.array()).exp())).matrix();
  fit.loss_kind = LossKind::logistic;
  return fit;
}

// Linear index for squared loss; probability in (0,1) for logistic loss.
template <typename Scalar, typename Derived>
VecX<Scalar> predict(const LinearFitT<Scalar>& fit, const Eigen::MatrixBase<Derived>& features) {
  if (features.cols() != fit.coefficients.size())
    throw ConfigError("predict: fit expects " + std::to_string(fit.coefficients.size()) +
                      " features, got " + std::to_string(features.cols()));
  VecX<Scalar> eta = features.derived() * fit.coefficients;
  eta.array() += fit.intercept;
  if (fit.loss_kind == LossKind::squared) return eta;
  VecX<Scalar> prob = (Scalar(1) / (Scalar(1) + (-eta.array()).exp())).matrix();
  const Scalar lo = std::numeric_limits<Scalar>::min();
  const Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  return prob.cwiseMax(lo).cwiseMin(hi);
}

// Central-difference gradient, (f(x+h e_i) - f(x-h e_i)) / 2h per component.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, Vector point, double h) {
  if (!(h > 0)) throw ConfigError("fd_gradient: h must be > 0");
  Vector grad(point.size());
  for (Index i = 0; i < point.size(); ++i) {
    const double x0 = point(i);
    point(i) = x0 + h;
    const double up = f(point);
    point(i) = x0 - h;
    const double down = f(point);
    point(i) = x0;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("fd_gradient: non-finite function value");
    grad(i) = (up - down) / (2 * h);
  }
  return grad;
}

}  // namespace causalab
