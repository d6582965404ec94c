// causalab command-line interface: run the demonstration experiments, apply
// estimators and validators to CSV data, and emit CSV/JSON reports.
//
// Exit codes: 0 success, 1 usage/config, 2 I/O, 3 statistical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "causalab/causalab.hpp"

namespace {

using namespace causalab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitStatistical = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CAUSALAB_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("CAUSALAB_SEED must be an unsigned integer, got '" + std::string(env) +
                        "'");
    }
  }
  return 42;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= csv.size(); ++i) {
    if (i == csv.size() || csv[i] == ',') {
      if (i > start) out.push_back(csv.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<double> split_values(const std::string& csv) {
  std::vector<double> out;
  for (const std::string& field : split_list(csv)) out.push_back(parse_double(field));
  return out;
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty())
    std::cout << content;
  else
    atomic_write_file(out_path, content);
}

struct RunArgs {
  int demo = 0;
  int reps = -1;
  std::uint64_t seed = 42;
  bool seed_given = false;
  int threads = 1;
  std::string out;
  std::string format = "csv";
};

int cmd_run(const RunArgs& args) {
  if (args.demo < 1 || args.demo > 4) throw ConfigError("--demo must be 1..4");
  if (args.threads < 1) throw ConfigError("--threads must be >= 1");
  McPlan plan;
  plan.replications = args.reps > 0 ? args.reps : default_replications(args.demo);
  plan.base_seed = args.seed_given ? args.seed : default_seed();
  const DemoReport report = run_demo(args.demo, plan, args.threads);

  if (args.format == "csv") {
    emit(report_to_csv(report), args.out);
  } else {
    const json config{{"command", "run"},
                      {"demo", args.demo},
                      {"reps", plan.replications},
                      {"seed", plan.base_seed},
                      {"threads", args.threads},
                      {"format", args.format}};
    emit(make_report(config, to_json(report)).dump(2) + "\n", args.out);
  }
  return kExitOk;
}

struct EstimateArgs {
  std::string in, out;
  std::string method;
  std::string treatment, outcome, instrument, adjustment;
  std::string covariates;
  int degree = 5, folds = 2, bins = 10;
  std::uint64_t seed = 42;
  bool seed_given = false;
};

void require_columns(const Dataset& data, const std::vector<std::string>& names) {
  for (const std::string& name : names)
    if (!name.empty() && !data.has(name))
      throw ConfigError("input has no column named '" + name + "'");
}

int cmd_estimate(const EstimateArgs& args) {
  const auto method = estimator_method_from_string(args.method);
  if (!method) throw ConfigError("--method must be one of erm|backdoor|iv|dml");
  Dataset data = read_dataset_csv(args.in);
  const std::vector<std::string> covariates = split_list(args.covariates);
  require_columns(data, {args.treatment, args.outcome, args.instrument, args.adjustment});
  require_columns(data, covariates);

  CausalEstimate estimate;
  switch (*method) {
    case EstimatorMethod::erm:
      estimate = erm_estimate(data, args.treatment, args.outcome, covariates);
      break;
    case EstimatorMethod::backdoor: {
      std::string adjust = args.adjustment;
      if (adjust.empty() && covariates.size() == 1) adjust = covariates.front();
      if (adjust.empty())
        throw ConfigError("backdoor needs --adjustment (or a single --covariates column)");
      estimate = backdoor_estimate(data, args.treatment, args.outcome, adjust, args.bins);
      break;
    }
    case EstimatorMethod::iv:
      if (args.instrument.empty()) throw ConfigError("iv needs --instrument");
      estimate =
          iv_estimate(data.col(args.instrument), data.col(args.treatment), data.col(args.outcome));
      break;
    case EstimatorMethod::dml: {
      if (covariates.size() != 1) throw ConfigError("dml needs exactly one --covariates column");
      data.set_role(args.treatment, Role::treatment);
      data.set_role(args.outcome, Role::outcome);
      data.set_role(covariates.front(), Role::covariate);
      DmlConfig cfg;
      cfg.poly_degree = args.degree;
      cfg.n_folds = args.folds;
      const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
      estimate = dml_estimate(data, cfg, RngHandle{seed, 0});
      break;
    }
  }

  const json config{{"command", "estimate"}, {"method", args.method},
                    {"treatment", args.treatment}, {"outcome", args.outcome},
                    {"input", args.in}};
  emit(make_report(config, to_json(estimate)).dump(2) + "\n", args.out);
  return kExitOk;
}

struct ValidateArgs {
  std::string in, out;
  std::string x, y;
  std::string cond;
  std::string features, outcome;
  std::string feature;
  std::string values;
  double threshold = 0.01;
};

int cmd_validate_ci(const ValidateArgs& args) {
  const Dataset data = read_dataset_csv(args.in);
  const std::vector<std::string> cond = split_list(args.cond);
  require_columns(data, {args.x, args.y});
  require_columns(data, cond);
  const CiTestResult result = fisher_z_test(data, args.x, args.y, cond);
  const json config{{"command", "validate"}, {"test", "ci"}, {"x", args.x}, {"y", args.y},
                    {"input", args.in}};
  emit(make_report(config, to_json(result)).dump(2) + "\n", args.out);
  return kExitOk;
}

int cmd_validate_invariance(const ValidateArgs& args) {
  Dataset data = read_dataset_csv(args.in);
  const std::vector<std::string> features = split_list(args.features);
  if (features.empty()) throw ConfigError("invariance needs --features");
  if (args.outcome.empty()) throw ConfigError("invariance needs --outcome");
  require_columns(data, features);
  require_columns(data, {args.outcome, args.feature});
  data.set_role(args.outcome, Role::outcome);
  const std::vector<double> values = split_values(args.values);
  const LinearFit fit = erm_predictor(data, features);
  const InvarianceReport result =
      invariance_test(fit, data, features, args.feature, values, args.threshold);
  const json config{{"command", "validate"}, {"test", "invariance"}, {"feature", args.feature},
                    {"input", args.in}};
  emit(make_report(config, to_json(result)).dump(2) + "\n", args.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal statistical estimators over SCM simulations"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run a demonstration experiment");
  run->add_option("--demo", run_args.demo, "demonstration id (1..4)")->required();
  run->add_option("--reps", run_args.reps, "replication count override");
  run->add_option("--seed", run_args.seed, "base seed (default: CAUSALAB_SEED or 42)");
  run->add_option("--threads", run_args.threads, "worker threads for replications");
  run->add_option("--out", run_args.out, "output path (stdout when omitted)");
  run->add_option("--format", run_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  EstimateArgs est_args;
  CLI::App* est = app.add_subcommand("estimate", "run an estimator on CSV data");
  est->add_option("--in", est_args.in, "input CSV path")->required();
  est->add_option("--method", est_args.method, "erm|backdoor|iv|dml")->required();
  est->add_option("--treatment", est_args.treatment)->required();
  est->add_option("--outcome", est_args.outcome)->required();
  est->add_option("--covariates", est_args.covariates, "comma-separated covariate columns");
  est->add_option("--instrument", est_args.instrument);
  est->add_option("--adjustment", est_args.adjustment, "backdoor adjustment column");
  est->add_option("--degree", est_args.degree, "DML polynomial degree");
  est->add_option("--folds", est_args.folds, "DML fold count");
  est->add_option("--bins", est_args.bins, "backdoor strata for continuous adjusters");
  est->add_option("--seed", est_args.seed, "DML fold seed");
  est->add_option("--out", est_args.out, "output path (stdout when omitted)");

  ValidateArgs val_args;
  CLI::App* val = app.add_subcommand("validate", "causal validation checks");
  val->require_subcommand(1);
  CLI::App* ci = val->add_subcommand("ci", "Fisher-z conditional independence test");
  ci->add_option("--in", val_args.in, "input CSV path")->required();
  ci->add_option("--x", val_args.x)->required();
  ci->add_option("--y", val_args.y)->required();
  ci->add_option("--cond", val_args.cond, "comma-separated conditioning columns");
  ci->add_option("--out", val_args.out);
  CLI::App* inv = val->add_subcommand("invariance", "prediction invariance under intervention");
  inv->add_option("--in", val_args.in, "input CSV path")->required();
  inv->add_option("--features", val_args.features, "model features (comma-separated)")->required();
  inv->add_option("--outcome", val_args.outcome, "outcome column")->required();
  inv->add_option("--feature", val_args.feature, "feature to intervene on")->required();
  inv->add_option("--values", val_args.values, "intervention values (comma-separated)")
      ->required();
  inv->add_option("--threshold", val_args.threshold, "invariance threshold");
  inv->add_option("--out", val_args.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  run_args.seed_given = run->count("--seed") > 0;
  est_args.seed_given = est->count("--seed") > 0;

  try {
    if (*run) return cmd_run(run_args);
    if (*est) return cmd_estimate(est_args);
    if (*ci) return cmd_validate_ci(val_args);
    if (*inv) return cmd_validate_invariance(val_args);
    throw ConfigError("no command given");
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitStatistical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStatistical;
  }
}
