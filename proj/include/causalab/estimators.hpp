#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "causalab/dataset.hpp"
#include "causalab/demos.hpp"
#include "causalab/error.hpp"
#include "causalab/numerics.hpp"
#include "causalab/rng.hpp"
#include "causalab/types.hpp"

// The causal estimator family: ERM baseline, backdoor adjustment,
// instrumental variables, cross-fitted DML, and the demo-4 reward models.

namespace causalab {

enum class EstimatorMethod { erm, backdoor, iv, dml };

inline const char* to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::erm: return "erm";
    case EstimatorMethod::backdoor: return "backdoor";
    case EstimatorMethod::iv: return "iv";
    case EstimatorMethod::dml: return "dml";
  }
  return "?";
}

inline std::optional<EstimatorMethod> estimator_method_from_string(std::string_view s) {
  for (EstimatorMethod m :
       {EstimatorMethod::erm, EstimatorMethod::backdoor, EstimatorMethod::iv, EstimatorMethod::dml})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

struct CausalEstimate {
  double tau_hat = 0;
  double std_error = 0;
  double ci_low = 0;
  double ci_high = 0;
  EstimatorMethod method = EstimatorMethod::erm;
  Index n_used = 0;

  friend bool operator==(const CausalEstimate&, const CausalEstimate&) = default;
};

inline CausalEstimate make_estimate(double tau, double se, EstimatorMethod method, Index n) {
  if (!(se >= 0) || !std::isfinite(tau))
    throw NumericError("make_estimate: non-finite estimate or negative standard error");
  return {tau, se, tau - kZ975 * se, tau + kZ975 * se, method, n};
}

// ERM predictor on exactly the named features: OLS for a continuous outcome,
// ridge-1e-6 logistic for a binary one.
inline LinearFit erm_predictor(const Dataset& data, const std::vector<std::string>& features) {
  const Vector& y = data.col(data.outcome_name());
  const Matrix x = data.feature_matrix(features);
  bool binary = y.size() > 0;
  bool has0 = false, has1 = false;
  for (Index i = 0; i < y.size() && binary; ++i) {
    binary = y(i) == 0.0 || y(i) == 1.0;
    has0 |= y(i) == 0.0;
    has1 |= y(i) == 1.0;
  }
  if (binary && has0 && has1) {
    FitConfig cfg;
    cfg.ridge = 1e-6;
    return logistic_fit(x, y, cfg);
  }
  return ols_fit(x, y);
}

namespace detail {

// Stratum index per row: distinct values if there are at most `bins` of
// them, otherwise equal-frequency quantile bins (duplicate cuts merged).
inline std::vector<int> stratify(const Vector& z, int bins, int* n_strata) {
  const Index n = z.size();
  std::vector<double> sorted(z.data(), z.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  for (double v : sorted)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);

  std::vector<int> stratum(n);
  if (static_cast<int>(distinct.size()) <= bins) {
    for (Index i = 0; i < n; ++i)
      stratum[i] = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), z(i)) -
                                    distinct.begin());
    *n_strata = static_cast<int>(distinct.size());
    return stratum;
  }
  std::vector<double> cuts;
  for (int k = 1; k < bins; ++k) {
    const double c = sorted[static_cast<std::size_t>(n) * k / bins];
    if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
  }
  for (Index i = 0; i < n; ++i)
    stratum[i] =
        static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), z(i)) - cuts.begin());
  *n_strata = static_cast<int>(cuts.size()) + 1;
  return stratum;
}

}  // namespace detail

// Backdoor adjustment: stratum-weighted conditional means
//   sum_z mean(Y | X=x, Z=z) * Phat(Z=z)  for x in {1, 0}.
// Returns (E[Y|do(X=1)], E[Y|do(X=0)]).
inline std::pair<double, double> backdoor_adjust(const Dataset& data,
                                                 const std::string& treatment,
                                                 const std::string& outcome,
                                                 const std::string& adjustment, int bins = 10) {
  if (bins < 1) throw ConfigError("backdoor_adjust: bins must be >= 1");
  const Vector& x = data.col(treatment);
  const Vector& y = data.col(outcome);
  const Vector& z = data.col(adjustment);
  const Index n = data.n();
  if (n < 1) throw ConfigError("backdoor_adjust: empty dataset");
  for (Index i = 0; i < n; ++i)
    if (x(i) != 0.0 && x(i) != 1.0)
      throw ConfigError("backdoor_adjust: treatment column '" + treatment + "' must be binary 0/1");

  int n_strata = 0;
  const std::vector<int> stratum = detail::stratify(z, bins, &n_strata);

  std::vector<std::array<double, 2>> sum(n_strata, {0, 0});
  std::vector<std::array<Index, 2>> count(n_strata, {0, 0});
  std::vector<Index> size(n_strata, 0);
  for (Index i = 0; i < n; ++i) {
    const int s = stratum[i];
    const int xi = x(i) == 1.0 ? 1 : 0;
    sum[s][xi] += y(i);
    count[s][xi] += 1;
    size[s] += 1;
  }

  double do1 = 0, do0 = 0;
  for (int s = 0; s < n_strata; ++s) {
    for (int xi : {0, 1})
      if (count[s][xi] == 0)
        throw PositivityError("backdoor_adjust: empty cell (treatment=" + std::to_string(xi) +
                              ", stratum=" + std::to_string(s) + " of " +
                              std::to_string(n_strata) + ")");
    const double w = static_cast<double>(size[s]) / static_cast<double>(n);
    do1 += w * sum[s][1] / static_cast<double>(count[s][1]);
    do0 += w * sum[s][0] / static_cast<double>(count[s][0]);
  }
  return {do1, do0};
}

// Backdoor ATE wrapped as a CausalEstimate; the standard error combines
// within-cell variances with the stratum weights.
inline CausalEstimate backdoor_estimate(const Dataset& data, const std::string& treatment,
                                        const std::string& outcome,
                                        const std::string& adjustment, int bins = 10) {
  const auto [do1, do0] = backdoor_adjust(data, treatment, outcome, adjustment, bins);
  const Vector& x = data.col(treatment);
  const Vector& y = data.col(outcome);
  const Vector& z = data.col(adjustment);
  const Index n = data.n();

  int n_strata = 0;
  const std::vector<int> stratum = detail::stratify(z, bins, &n_strata);
  std::vector<std::array<double, 2>> sum(n_strata, {0, 0}), sumsq(n_strata, {0, 0});
  std::vector<std::array<Index, 2>> count(n_strata, {0, 0});
  std::vector<Index> size(n_strata, 0);
  for (Index i = 0; i < n; ++i) {
    const int s = stratum[i];
    const int xi = x(i) == 1.0 ? 1 : 0;
    sum[s][xi] += y(i);
    sumsq[s][xi] += y(i) * y(i);
    count[s][xi] += 1;
    size[s] += 1;
  }
  double var = 0;
  for (int s = 0; s < n_strata; ++s) {
    const double w = static_cast<double>(size[s]) / static_cast<double>(n);
    for (int xi : {0, 1}) {
      const double c = static_cast<double>(count[s][xi]);
      const double mean = sum[s][xi] / c;
      const double cell_var = c > 1 ? (sumsq[s][xi] - c * mean * mean) / (c - 1) : 0.0;
      var += w * w * cell_var / c;
    }
  }
  return make_estimate(do1 - do0, std::sqrt(std::max(0.0, var)), EstimatorMethod::backdoor, n);
}

// Instrumental-variables ratio Cov(Z,Y)/Cov(Z,D) with the standard sandwich
// standard error from the fitted structural line.
inline CausalEstimate iv_estimate(const Vector& z, const Vector& d, const Vector& y,
                                  double weak_instrument_floor = 1e-6) {
  const Index n = z.size();
  if (d.size() != n || y.size() != n) throw ConfigError("iv_estimate: input lengths differ");
  if (n < 3) throw ConfigError("iv_estimate: need at least 3 observations");

  const Vector zc = z.array() - z.mean();
  const Vector dc = d.array() - d.mean();
  const Vector yc = y.array() - y.mean();
  const double szd = zc.dot(dc);
  const double cov_zd = szd / static_cast<double>(n - 1);
  if (std::abs(cov_zd) <= weak_instrument_floor)
    throw WeakInstrumentError("iv_estimate: weak instrument, first-stage covariance " +
                                  std::to_string(cov_zd),
                              cov_zd);
  const double tau = zc.dot(yc) / szd;
  const Vector u = yc - tau * dc;
  const double se = std::sqrt(zc.array().square().matrix().dot(u.array().square().matrix())) /
                    std::abs(szd);
  return make_estimate(tau, se, EstimatorMethod::iv, n);
}

// Naive OLS coefficient on the treatment (plus optional covariates), with a
// heteroskedasticity-robust sandwich standard error. This is the ERM
// baseline the demos compare against.
inline CausalEstimate erm_estimate(const Dataset& data, const std::string& treatment,
                                   const std::string& outcome,
                                   const std::vector<std::string>& covariates = {}) {
  const Index n = data.n();
  const Index p = 1 + static_cast<Index>(covariates.size());
  Matrix design(n, p + 1);
  design.col(0) = data.col(treatment);
  for (std::size_t j = 0; j < covariates.size(); ++j)
    design.col(1 + static_cast<Index>(j)) = data.col(covariates[j]);
  design.col(p).setOnes();
  const Vector& y = data.col(outcome);
  if (n < p + 1) throw ConfigError("erm_estimate: more parameters than rows");

  const Matrix gram = design.transpose() * design;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw SingularityError("erm_estimate: singular design");
  const Vector theta = ldlt.solve(design.transpose() * y);
  const Vector u = y - design * theta;
  const Matrix meat = design.transpose() * u.array().square().matrix().asDiagonal() * design;
  const Matrix bread = ldlt.solve(Matrix::Identity(p + 1, p + 1));
  const Matrix cov = bread * meat * bread;
  return make_estimate(theta(0), std::sqrt(std::max(0.0, cov(0, 0))), EstimatorMethod::erm, n);
}

struct DmlConfig {
  int poly_degree = 5;
  int n_folds = 2;
  double ridge = 1e-8;
  int n_splits = 15;  // repeated cross-fitting, median-aggregated
};

namespace detail {

// Randomized folds balanced on the covariate: consecutive blocks of the
// covariate's rank order are permuted across folds, so every training
// complement spans the observed range.
inline std::vector<int> stratified_folds(const Vector& x, int folds, RandomStream& stream) {
  const Index n = x.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a) < x(b); });
  std::vector<int> labels(folds);
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<int> assign(n);
  for (Index b = 0; b < n; b += folds) {
    stream.shuffle(labels);
    for (int j = 0; j < folds && b + j < n; ++j) assign[order[b + j]] = labels[j];
  }
  return assign;
}

struct DmlSplit {
  double tau = 0;
  double se = 0;
};

inline DmlSplit dml_one_split(const Vector& x, const Vector& d, const Vector& y,
                              const DmlConfig& cfg, RandomStream& stream) {
  const Index n = x.size();
  const std::vector<int> assign = stratified_folds(x, cfg.n_folds, stream);

  Vector v_hat(n), y_hat(n);
  for (int k = 0; k < cfg.n_folds; ++k) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (assign[i] == k ? test : train).push_back(i);
    if (static_cast<Index>(train.size()) < cfg.poly_degree + 2)
      throw ConfigError("dml_estimate: fold too small for poly_degree+1 parameters");
    if (test.empty()) continue;

    Vector xtr(train.size()), dtr(train.size()), ytr(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      xtr(static_cast<Index>(i)) = x(train[i]);
      dtr(static_cast<Index>(i)) = d(train[i]);
      ytr(static_cast<Index>(i)) = y(train[i]);
    }
    const Matrix ptr = poly_features(xtr, cfg.poly_degree);
    const LinearFit g_fit = ols_fit(ptr, ytr, cfg.ridge);
    const LinearFit m_fit = ols_fit(ptr, dtr, cfg.ridge);

    // Out-of-range covariates are clamped to the training hull; raw power
    // extrapolation otherwise dominates the residuals at small n.
    const double lo = xtr.minCoeff(), hi = xtr.maxCoeff();
    Vector xte(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
      xte(static_cast<Index>(i)) = std::clamp(x(test[i]), lo, hi);
    const Matrix pte = poly_features(xte, cfg.poly_degree);
    const Vector g_pred = predict(g_fit, pte);
    const Vector m_pred = predict(m_fit, pte);
    for (std::size_t i = 0; i < test.size(); ++i) {
      y_hat(test[i]) = y(test[i]) - g_pred(static_cast<Index>(i));
      v_hat(test[i]) = d(test[i]) - m_pred(static_cast<Index>(i));
    }
  }

  const double denom = v_hat.squaredNorm();
  if (denom / static_cast<double>(n) <= 1e-10)
    throw DegenerateError("dml_estimate: degenerate treatment, residualized D has no variance");
  const double tau = v_hat.dot(y_hat) / denom;
  const double j = denom / static_cast<double>(n);
  const Vector eps = y_hat - tau * v_hat;
  const double s = (v_hat.array().square() * eps.array().square()).mean();
  return {tau, std::sqrt(s / (j * j) / static_cast<double>(n))};
}

inline double median_inplace(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

// Cross-fitted DML for the partially linear model with one scalar covariate:
// residualize Y and D on polynomial nuisances fit on the complement fold,
// then tau = sum(V Yres) / sum(V^2) pooled over folds. Repeated over
// cfg.n_splits random splits; the median estimate is reported and the
// variance absorbs the split-to-split spread.
inline CausalEstimate dml_estimate(const Dataset& data, const DmlConfig& cfg,
                                   const RngHandle& rng) {
  if (cfg.n_folds < 2) throw ConfigError("dml_estimate: n_folds must be >= 2");
  if (cfg.poly_degree < 1) throw ConfigError("dml_estimate: poly_degree must be >= 1");
  if (cfg.n_splits < 1) throw ConfigError("dml_estimate: n_splits must be >= 1");
  if (cfg.ridge < 0) throw ConfigError("dml_estimate: ridge must be >= 0");

  auto one = [&](Role role, const char* what) {
    const auto cols = data.columns_with_role(role);
    if (cols.size() != 1)
      throw ConfigError(std::string("dml_estimate: need exactly one ") + what + " column, found " +
                        std::to_string(cols.size()));
    return cols.front();
  };
  const Vector& d = data.col(one(Role::treatment, "treatment"));
  const Vector& y = data.col(one(Role::outcome, "outcome"));
  const Vector& x = data.col(one(Role::covariate, "covariate"));

  const Index n = data.n();
  if (n < 10 * cfg.n_folds)
    throw ConfigError("dml_estimate: need n >= 10 * n_folds (" + std::to_string(n) + " rows)");

  std::vector<double> taus(cfg.n_splits), ses(cfg.n_splits);
  for (int s = 0; s < cfg.n_splits; ++s) {
    RandomStream stream(rng.sub("dml_split").sub(static_cast<std::uint64_t>(s)));
    const detail::DmlSplit split = detail::dml_one_split(x, d, y, cfg, stream);
    taus[s] = split.tau;
    ses[s] = split.se;
  }
  std::vector<double> sorted_taus = taus;
  const double tau = detail::median_inplace(sorted_taus);
  std::vector<double> adj(cfg.n_splits);
  for (int s = 0; s < cfg.n_splits; ++s)
    adj[s] = ses[s] * ses[s] + (taus[s] - tau) * (taus[s] - tau);
  const double var = detail::median_inplace(adj);
  return make_estimate(tau, std::sqrt(var), EstimatorMethod::dml, n);
}

enum class RewardKind { standard, causal };

inline const char* to_string(RewardKind k) {
  return k == RewardKind::standard ? "standard" : "causal";
}

struct RewardModel {
  double content_weight = 0;
  double length_weight = 0;
  double intercept = 0;
  RewardKind kind = RewardKind::standard;
};

// Reward model over columns (C_hat, L, Y). standard: OLS of Y on both.
// causal: cross-fit residualization of C_hat and Y on L (even/odd folds),
// then residual-on-residual OLS; the length weight is structurally zero.
inline RewardModel reward_fit(const Dataset& data, RewardKind kind) {
  const Vector& chat = data.col("C_hat");
  const Vector& len = data.col("L");
  const Vector& y = data.col("Y");
  const Index n = data.n();

  if (kind == RewardKind::standard) {
    Matrix x(n, 2);
    x.col(0) = chat;
    x.col(1) = len;
    const LinearFit fit = ols_fit(x, y);
    return {fit.coefficients(0), fit.coefficients(1), fit.intercept, RewardKind::standard};
  }

  if (n < 4) throw ConfigError("reward_fit: causal fit needs at least 4 rows");
  Vector chat_res(n), y_res(n);
  for (int half = 0; half < 2; ++half) {
    std::vector<Index> own, other;
    for (Index i = 0; i < n; ++i) ((i % 2 == half) ? own : other).push_back(i);
    Matrix l_other(other.size(), 1);
    Vector chat_other(other.size()), y_other(other.size());
    for (std::size_t i = 0; i < other.size(); ++i) {
      l_other(static_cast<Index>(i), 0) = len(other[i]);
      chat_other(static_cast<Index>(i)) = chat(other[i]);
      y_other(static_cast<Index>(i)) = y(other[i]);
    }
    const LinearFit chat_on_l = ols_fit(l_other, chat_other);
    const LinearFit y_on_l = ols_fit(l_other, y_other);
    for (Index i : own) {
      Eigen::Matrix<double, 1, 1> row;
      row(0, 0) = len(i);
      chat_res(i) = chat(i) - predict(chat_on_l, row)(0);
      y_res(i) = y(i) - predict(y_on_l, row)(0);
    }
  }
  const LinearFit slope = ols_fit(chat_res.reshaped(n, 1), y_res);
  const double content = slope.coefficients(0);
  return {content, 0.0, y.mean() - content * chat.mean(), RewardKind::causal};
}

// Reward change from inflating length by delta_l with content fixed.
inline double hack_gain(const RewardModel& model, double delta_l) {
  return model.length_weight * delta_l;
}

}  // namespace causalab
