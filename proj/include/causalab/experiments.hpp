#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "causalab/demos.hpp"
#include "causalab/error.hpp"
#include "causalab/estimators.hpp"
#include "causalab/numerics.hpp"
#include "causalab/rng.hpp"
#include "causalab/scm.hpp"
#include "causalab/types.hpp"

// Monte Carlo harness and the four demonstration drivers. Replications are
// independent; per-replication seeds derive from (base_seed, scenario value,
// purpose) with stream_id = replication index, so grids extend without
// disturbing existing points and results are identical for any thread count.

namespace causalab {

struct McPlan {
  int replications = 1;
  std::uint64_t base_seed = 42;
  std::vector<double> grid;  // scenario points (n values, p values, dL values)
};

struct RepOutcome {
  double value = 0;
  bool has_ci = false;
  double ci_low = 0;
  double ci_high = 0;
};

struct ReplicationStats {
  double mean = 0;
  double std_dev = 0;
  std::optional<double> bias;
  std::optional<double> rmse;
  std::optional<double> coverage;
  int n_reps = 0;

  friend bool operator==(const ReplicationStats&, const ReplicationStats&) = default;
};

// Run fn(0..count-1), in parallel when threads > 1, and return results in
// index order. The lowest-index failure wins and carries its index.
template <typename T, typename Fn>
std::vector<T> run_indexed(int count, int threads, Fn&& fn) {
  std::vector<T> out(static_cast<std::size_t>(std::max(count, 0)));
  if (count <= 0) return out;
  threads = std::clamp(threads, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (const std::exception& e) {
        throw ReplicationError(i, e.what());
      }
    }
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          out[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (int i = 0; i < count; ++i)
    if (errors[static_cast<std::size_t>(i)]) {
      try {
        std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
      } catch (const std::exception& e) {
        throw ReplicationError(i, e.what());
      }
    }
  return out;
}

// Aggregate per-replication outcomes. bias/rmse need a truth; coverage
// additionally needs every outcome to carry a confidence interval.
inline ReplicationStats summarize(std::span<const RepOutcome> reps, std::optional<double> truth) {
  const int n = static_cast<int>(reps.size());
  if (n < 2) throw ConfigError("summarize: need at least 2 replications");
  ReplicationStats s;
  s.n_reps = n;
  double sum = 0;
  for (const RepOutcome& r : reps) sum += r.value;
  s.mean = sum / n;
  double ss = 0;
  for (const RepOutcome& r : reps) ss += (r.value - s.mean) * (r.value - s.mean);
  s.std_dev = std::sqrt(ss / (n - 1));
  if (truth) {
    s.bias = s.mean - *truth;
    double sq = 0;
    for (const RepOutcome& r : reps) sq += (r.value - *truth) * (r.value - *truth);
    s.rmse = std::sqrt(sq / n);
    bool all_ci = true;
    for (const RepOutcome& r : reps) all_ci &= r.has_ci;
    if (all_ci) {
      int hit = 0;
      for (const RepOutcome& r : reps) hit += (r.ci_low <= *truth && *truth <= r.ci_high);
      s.coverage = static_cast<double>(hit) / n;
    }
  }
  return s;
}

// One scenario, `plan.replications` runs of `runner` with stream_id =
// replication index.
inline ReplicationStats monte_carlo(const std::function<RepOutcome(RngHandle)>& runner,
                                    const McPlan& plan, std::optional<double> truth = {},
                                    int threads = 1) {
  if (plan.replications < 2) throw ConfigError("monte_carlo: need replications >= 2");
  const auto reps = run_indexed<RepOutcome>(plan.replications, threads, [&](int r) {
    return runner(RngHandle{plan.base_seed, static_cast<std::uint64_t>(r)});
  });
  return summarize(reps, truth);
}

struct DemoEntry {
  std::string scenario;
  std::string method;
  std::string metric;
  ReplicationStats stats;

  friend bool operator==(const DemoEntry&, const DemoEntry&) = default;
};

struct DemoReport {
  int demo_id = 0;
  std::uint64_t seed = 0;
  int replications = 0;
  std::vector<double> grid;
  std::vector<DemoEntry> entries;

  friend bool operator==(const DemoReport&, const DemoReport&) = default;
};

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string scenario_label(const char* prefix, double v) {
  return std::string(prefix) + format_number(v);
}

inline double mse(const LinearFit& fit, const Matrix& x, const Vector& y) {
  return (y - predict(fit, x)).squaredNorm() / static_cast<double>(y.size());
}

inline double accuracy(const LinearFit& fit, const Matrix& x, const Vector& y) {
  const Vector prob = predict(fit, x);
  Index hits = 0;
  for (Index i = 0; i < y.size(); ++i) hits += (prob(i) >= 0.5) == (y(i) == 1.0);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

inline std::vector<RepOutcome> plain(const std::vector<double>& values) {
  std::vector<RepOutcome> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i].value = values[i];
  return out;
}

}  // namespace detail

// Demo 1: ERM vs backdoor-adjusted predictor under the spurious sign flip.
// Per replication: train on s_e=+1, test on s_e=-1, record train/test MSE
// and the degradation ratio for both predictors.
inline DemoReport run_demo1(const McPlan& plan, int threads = 1) {
  McPlan p = plan;
  if (p.grid.empty()) p.grid = {200, 500, 1000, 2000, 5000};
  const ScmSpec spec = demo1_spec();
  const std::vector<std::string> erm_features{"X_causal", "X_spur"};
  const std::vector<std::string> causal_features{"X_causal", "Z"};

  DemoReport report{1, p.base_seed, p.replications, p.grid, {}};
  struct Rep {
    double vals[6];  // erm train/test/ratio, causal train/test/ratio
  };
  for (double nv : p.grid) {
    const Index n = static_cast<Index>(nv);
    const std::uint64_t train_seed = derive_seed(p.base_seed, {1, static_cast<std::uint64_t>(n), 0});
    const std::uint64_t test_seed = derive_seed(p.base_seed, {1, static_cast<std::uint64_t>(n), 1});
    const auto reps = run_indexed<Rep>(p.replications, threads, [&](int r) {
      const auto rep_id = static_cast<std::uint64_t>(r);
      const Dataset train = sample(spec, {{"s_e", 1.0}}, n, {train_seed, rep_id});
      const Dataset test = sample(spec, {{"s_e", -1.0}}, n, {test_seed, rep_id});
      Rep out{};
      int at = 0;
      for (const auto& features : {erm_features, causal_features}) {
        const LinearFit fit = erm_predictor(train, features);
        const double tr = detail::mse(fit, train.feature_matrix(features), train.col("Y"));
        const double te = detail::mse(fit, test.feature_matrix(features), test.col("Y"));
        out.vals[at++] = tr;
        out.vals[at++] = te;
        out.vals[at++] = te / tr;
      }
      return out;
    });
    const std::string scen = detail::scenario_label("n", nv);
    const char* methods[2] = {"erm", "causal"};
    const char* metrics[3] = {"train_mse", "test_mse", "ratio"};
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 3; ++k) {
        std::vector<double> series(reps.size());
        for (std::size_t i = 0; i < reps.size(); ++i) series[i] = reps[i].vals[3 * m + k];
        report.entries.push_back(
            {scen, methods[m], metrics[k], summarize(detail::plain(series), {})});
      }
  }
  return report;
}

// Demo 2: logistic ERM on (shape, colour) vs shape-only causal classifier.
// OOD test flips the colour agreement from p to 1-p.
inline DemoReport run_demo2(const McPlan& plan, int threads = 1, Index n_per_env = 5000) {
  McPlan p = plan;
  if (p.grid.empty()) p.grid = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98};
  const ScmSpec spec = demo2_spec();
  const std::vector<std::string> erm_features{"shape", "colour"};
  const std::vector<std::string> causal_features{"shape"};

  DemoReport report{2, p.base_seed, p.replications, p.grid, {}};
  struct Rep {
    double vals[6];  // erm train/ood/gap, causal train/ood/gap
  };
  for (double pv : p.grid) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &pv, sizeof bits);
    const std::uint64_t train_seed = derive_seed(p.base_seed, {2, bits, 0});
    const std::uint64_t test_seed = derive_seed(p.base_seed, {2, bits, 1});
    const auto reps = run_indexed<Rep>(p.replications, threads, [&](int r) {
      const auto rep_id = static_cast<std::uint64_t>(r);
      const Dataset train = sample(spec, {{"p", pv}}, n_per_env, {train_seed, rep_id});
      const Dataset test = sample(spec, {{"p", 1.0 - pv}}, n_per_env, {test_seed, rep_id});
      Rep out{};
      int at = 0;
      for (const auto& features : {erm_features, causal_features}) {
        const LinearFit fit = erm_predictor(train, features);
        const double tr = detail::accuracy(fit, train.feature_matrix(features), train.col("Y"));
        const double te = detail::accuracy(fit, test.feature_matrix(features), test.col("Y"));
        out.vals[at++] = tr;
        out.vals[at++] = te;
        out.vals[at++] = tr - te;
      }
      return out;
    });
    const std::string scen = detail::scenario_label("p", pv);
    const char* methods[2] = {"erm", "causal"};
    const char* metrics[3] = {"train_acc", "ood_acc", "gap"};
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 3; ++k) {
        std::vector<double> series(reps.size());
        for (std::size_t i = 0; i < reps.size(); ++i) series[i] = reps[i].vals[3 * m + k];
        report.entries.push_back(
            {scen, methods[m], metrics[k], summarize(detail::plain(series), {})});
      }
  }
  return report;
}

// Demo 3: naive OLS vs cross-fitted DML on the partially linear model;
// bias, RMSE and CI coverage against the true tau = 0.5.
inline DemoReport run_demo3(const McPlan& plan, int threads = 1) {
  McPlan p = plan;
  if (p.grid.empty()) p.grid = {100, 200, 400, 800, 1600};
  const ScmSpec spec = demo3_spec();

  DemoReport report{3, p.base_seed, p.replications, p.grid, {}};
  struct Rep {
    RepOutcome ols, dml;
  };
  for (double nv : p.grid) {
    const Index n = static_cast<Index>(nv);
    const std::uint64_t data_seed = derive_seed(p.base_seed, {3, static_cast<std::uint64_t>(n), 0});
    const std::uint64_t fold_seed = derive_seed(p.base_seed, {3, static_cast<std::uint64_t>(n), 1});
    const auto reps = run_indexed<Rep>(p.replications, threads, [&](int r) {
      const auto rep_id = static_cast<std::uint64_t>(r);
      const Dataset data = sample(spec, {}, n, {data_seed, rep_id});
      const CausalEstimate ols = erm_estimate(data, "D", "Y");
      const CausalEstimate dml = dml_estimate(data, DmlConfig{}, {fold_seed, rep_id});
      Rep out;
      out.ols = {ols.tau_hat, true, ols.ci_low, ols.ci_high};
      out.dml = {dml.tau_hat, true, dml.ci_low, dml.ci_high};
      return out;
    });
    const std::string scen = detail::scenario_label("n", nv);
    std::vector<RepOutcome> ols_series(reps.size()), dml_series(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) {
      ols_series[i] = reps[i].ols;
      dml_series[i] = reps[i].dml;
    }
    report.entries.push_back({scen, "ols", "tau_hat", summarize(ols_series, kDemo3Tau)});
    report.entries.push_back({scen, "dml", "tau_hat", summarize(dml_series, kDemo3Tau)});
  }
  return report;
}

// Demo 4: standard vs causal reward model. Weights over all replications;
// the hack-gain curve over the dL grid uses the first min(60, reps)
// replications, matching the two panels it reproduces.
inline DemoReport run_demo4(const McPlan& plan, int threads = 1, Index n_per_rep = 5000) {
  McPlan p = plan;
  if (p.grid.empty()) p.grid = {0, 0.5, 1, 1.5, 2, 2.5, 3};
  const ScmSpec spec = demo4_spec();

  DemoReport report{4, p.base_seed, p.replications, p.grid, {}};
  struct Rep {
    double w_l_std, w_c_std, w_l_causal, w_c_causal;
  };
  const std::uint64_t data_seed = derive_seed(p.base_seed, {4, 0});
  const auto reps = run_indexed<Rep>(p.replications, threads, [&](int r) {
    const Dataset data = sample(spec, {}, n_per_rep, {data_seed, static_cast<std::uint64_t>(r)});
    const RewardModel std_model = reward_fit(data, RewardKind::standard);
    const RewardModel causal_model = reward_fit(data, RewardKind::causal);
    return Rep{std_model.length_weight, std_model.content_weight, causal_model.length_weight,
               causal_model.content_weight};
  });

  const char* methods[2] = {"standard_reward", "causal_reward"};
  std::vector<double> series(reps.size());
  const std::string weight_scen = detail::scenario_label("n", static_cast<double>(n_per_rep));
  for (int m = 0; m < 2; ++m) {
    for (std::size_t i = 0; i < reps.size(); ++i)
      series[i] = m == 0 ? reps[i].w_l_std : reps[i].w_l_causal;
    report.entries.push_back(
        {weight_scen, methods[m], "w_l", summarize(detail::plain(series), {})});
    for (std::size_t i = 0; i < reps.size(); ++i)
      series[i] = m == 0 ? reps[i].w_c_std : reps[i].w_c_causal;
    report.entries.push_back(
        {weight_scen, methods[m], "w_content", summarize(detail::plain(series), {})});
  }

  const std::size_t gain_reps = std::min<std::size_t>(reps.size(), 60);
  for (double dl : p.grid) {
    const std::string scen = detail::scenario_label("dL", dl);
    for (int m = 0; m < 2; ++m) {
      std::vector<double> gains(gain_reps);
      for (std::size_t i = 0; i < gain_reps; ++i) {
        const double w = m == 0 ? reps[i].w_l_std : reps[i].w_l_causal;
        gains[i] = w * dl;
      }
      report.entries.push_back(
          {scen, methods[m], "gain", summarize(detail::plain(gains), {})});
    }
  }
  return report;
}

inline DemoReport run_demo(int demo_id, const McPlan& plan, int threads = 1) {
  switch (demo_id) {
    case 1: return run_demo1(plan, threads);
    case 2: return run_demo2(plan, threads);
    case 3: return run_demo3(plan, threads);
    case 4: return run_demo4(plan, threads);
    default: throw ConfigError("run_demo: demo_id must be 1..4");
  }
}

// Paper replication counts per demonstration.
inline int default_replications(int demo_id) {
  switch (demo_id) {
    case 1: return 60;
    case 2: return 30;
    case 3: return 200;
    case 4: return 100;
    default: throw ConfigError("default_replications: demo_id must be 1..4");
  }
}

}  // namespace causalab
