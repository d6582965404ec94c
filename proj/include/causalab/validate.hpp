#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "causalab/dataset.hpp"
#include "causalab/error.hpp"
#include "causalab/numerics.hpp"
#include "causalab/types.hpp"

// Causal validation: conditional-independence testing of DAG-implied
// constraints and invariance testing of fitted predictors.

namespace causalab {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

struct CiTestResult {
  double statistic = 0;  // Fisher z
  double p_value = 0;
  Index n = 0;
  int conditioning_size = 0;

  friend bool operator==(const CiTestResult&, const CiTestResult&) = default;
};

// Partial-correlation test of x _||_ y given cond, via regression residuals.
// statistic = sqrt(n - |cond| - 3) * atanh(rho), two-sided normal p-value.
inline CiTestResult fisher_z_test(const Dataset& data, const std::string& x,
                                  const std::string& y,
                                  const std::vector<std::string>& cond = {}) {
  const Index n = data.n();
  const int k = static_cast<int>(cond.size());
  if (n - k - 3 <= 0)
    throw ConfigError("fisher_z_test: need n > |cond| + 3 (n=" + std::to_string(n) +
                      ", |cond|=" + std::to_string(k) + ")");

  const Vector xc = data.col(x).array() - data.col(x).mean();
  const Vector yc = data.col(y).array() - data.col(y).mean();
  Vector rx, ry;
  if (cond.empty()) {
    rx = xc;
    ry = yc;
  } else {
    const Matrix z = data.feature_matrix(cond);
    rx = ols_fit(z, data.col(x)).residuals;
    ry = ols_fit(z, data.col(y)).residuals;
  }

  const double nx = rx.norm(), ny = ry.norm();
  if (nx <= 1e-10 * std::max(1.0, xc.norm()) || ny <= 1e-10 * std::max(1.0, yc.norm()))
    throw DegenerateError("fisher_z_test: a variable is an exact function of the conditioning set");
  const double rho = rx.dot(ry) / (nx * ny);
  if (1.0 - rho * rho < 1e-12)
    throw DegenerateError("fisher_z_test: deterministic relation, |partial correlation| = 1");

  const double stat = std::sqrt(static_cast<double>(n - k - 3)) * std::atanh(rho);
  return {stat, two_sided_p(stat), n, k};
}

enum class InvarianceVerdict { invariant, sensitive };

inline const char* to_string(InvarianceVerdict v) {
  return v == InvarianceVerdict::invariant ? "invariant" : "sensitive";
}

struct InvarianceReport {
  std::string feature;
  std::vector<double> intervention_values;
  double max_abs_prediction_change = 0;
  double threshold = 0;
  InvarianceVerdict verdict = InvarianceVerdict::invariant;

  friend bool operator==(const InvarianceReport&, const InvarianceReport&) = default;
};

// Overwrite `feature` with each intervention value and record how much any
// sample's prediction moves. A feature absent from the model cannot move
// predictions, so its change is zero.
inline InvarianceReport invariance_test(const LinearFit& fit, const Dataset& data,
                                        const std::vector<std::string>& model_features,
                                        const std::string& feature,
                                        const std::vector<double>& values, double threshold) {
  if (values.empty()) throw ConfigError("invariance_test: need at least one intervention value");
  if (!data.has(feature))
    throw ConfigError("invariance_test: no column named '" + feature + "'");

  InvarianceReport report;
  report.feature = feature;
  report.intervention_values = values;
  report.threshold = threshold;

  const auto pos = std::find(model_features.begin(), model_features.end(), feature);
  if (pos != model_features.end()) {
    Matrix x = data.feature_matrix(model_features);
    const Index j = static_cast<Index>(pos - model_features.begin());
    Vector lo, hi;
    for (std::size_t v = 0; v < values.size(); ++v) {
      x.col(j).setConstant(values[v]);
      const Vector pred = predict(fit, x);
      if (v == 0) {
        lo = pred;
        hi = pred;
      } else {
        lo = lo.cwiseMin(pred);
        hi = hi.cwiseMax(pred);
      }
    }
    report.max_abs_prediction_change = (hi - lo).maxCoeff();
  }
  report.verdict = report.max_abs_prediction_change <= threshold ? InvarianceVerdict::invariant
                                                                 : InvarianceVerdict::sensitive;
  return report;
}

}  // namespace causalab
