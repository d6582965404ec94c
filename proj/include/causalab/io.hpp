#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causalab/dataset.hpp"
#include "causalab/error.hpp"
#include "causalab/estimators.hpp"
#include "causalab/experiments.hpp"
#include "causalab/validate.hpp"

// Serialization: dataset CSV, long-format report CSV, and versioned JSON
// reports. Numbers are written in shortest round-trip form so that
// serialize -> parse -> serialize is a fixed point.

namespace causalab {

using json = nlohmann::json;

inline constexpr const char* kReportSchemaVersion = "1";
inline constexpr const char* kReportCsvHeader = "demo,scenario,method,metric,mean,std,n_reps";

inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("format_double: value not representable");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("could not parse '" + std::string(s) + "' as a number");
  if (!std::isfinite(v)) throw ConfigError("non-finite value '" + std::string(s) + "'");
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!(i == text.size() && line.empty())) lines.emplace_back(line);
      start = i + 1;
    }
  }
  return lines;
}

}  // namespace detail

// ---- dataset CSV ----

inline std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.names().size(); ++j) {
    if (j) out += ',';
    out += data.names()[j];
  }
  out += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.names().size(); ++j) {
      if (j) out += ',';
      out += format_double(data.col(data.names()[j])(i));
    }
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(const std::string& text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ConfigError("CSV is empty");
  const auto header = detail::split_csv_line(lines[0]);
  for (const std::string& name : header)
    if (name.empty()) throw ConfigError("CSV header has an empty column name");
  if (lines.size() < 2) throw ConfigError("CSV has no data rows");

  const Index n = static_cast<Index>(lines.size() - 1);
  std::vector<Vector> cols(header.size(), Vector(n));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = detail::split_csv_line(lines[r]);
    if (fields.size() != header.size())
      throw ConfigError("CSV row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(header.size()));
    for (std::size_t j = 0; j < fields.size(); ++j)
      cols[j](static_cast<Index>(r - 1)) = parse_double(fields[j]);
  }
  Dataset out;
  for (std::size_t j = 0; j < header.size(); ++j) out.add_column(header[j], std::move(cols[j]));
  return out;
}

// ---- report CSV (long format) ----

struct CsvRow {
  std::string demo, scenario, method, metric;
  double mean = 0, std = 0;
  int n_reps = 0;

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

inline std::string csv_from_rows(std::span<const CsvRow> rows) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const CsvRow& r : rows) {
    out += r.demo + ',' + r.scenario + ',' + r.method + ',' + r.metric + ',' +
           format_double(r.mean) + ',' + format_double(r.std) + ',' + std::to_string(r.n_reps) +
           '\n';
  }
  return out;
}

inline std::vector<CsvRow> parse_report_csv(const std::string& text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != kReportCsvHeader)
    throw ConfigError("report CSV must start with header '" + std::string(kReportCsvHeader) + "'");
  std::vector<CsvRow> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = detail::split_csv_line(lines[r]);
    if (f.size() != 7) throw ConfigError("report CSV row " + std::to_string(r) + " malformed");
    CsvRow row{f[0], f[1], f[2], f[3], parse_double(f[4]), parse_double(f[5]),
               static_cast<int>(parse_double(f[6]))};
    rows.push_back(std::move(row));
  }
  return rows;
}

// Long-format rows for a demo report. Derived aggregates (bias, rmse,
// coverage) become their own metric rows; bias inherits the spread of the
// estimate, the others carry std 0.
inline std::vector<CsvRow> report_rows(const DemoReport& report) {
  std::vector<CsvRow> rows;
  const std::string demo = std::to_string(report.demo_id);
  for (const DemoEntry& e : report.entries) {
    rows.push_back({demo, e.scenario, e.method, e.metric, e.stats.mean, e.stats.std_dev,
                    e.stats.n_reps});
    if (e.stats.bias)
      rows.push_back({demo, e.scenario, e.method, "bias", *e.stats.bias, e.stats.std_dev,
                      e.stats.n_reps});
    if (e.stats.rmse)
      rows.push_back({demo, e.scenario, e.method, "rmse", *e.stats.rmse, 0.0, e.stats.n_reps});
    if (e.stats.coverage)
      rows.push_back(
          {demo, e.scenario, e.method, "coverage", *e.stats.coverage, 0.0, e.stats.n_reps});
  }
  return rows;
}

inline std::string report_to_csv(const DemoReport& report) {
  const auto rows = report_rows(report);
  return csv_from_rows(rows);
}

// ---- JSON ----

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       std::initializer_list<const char*> required, const char* what) {
  if (!obj.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= key == a;
    if (!ok) throw ConfigError(std::string(what) + ": unknown field '" + key + "'");
  }
  for (const char* r : required)
    if (!obj.contains(r)) throw ConfigError(std::string(what) + ": missing field '" + r + "'");
}

}  // namespace detail

inline json to_json(const CausalEstimate& e) {
  return json{{"tau_hat", e.tau_hat},   {"std_error", e.std_error}, {"ci_low", e.ci_low},
              {"ci_high", e.ci_high},   {"method", to_string(e.method)},
              {"n_used", static_cast<std::int64_t>(e.n_used)}};
}

inline CausalEstimate causal_estimate_from_json(const json& j) {
  detail::check_keys(j, {"tau_hat", "std_error", "ci_low", "ci_high", "method", "n_used"},
                     {"tau_hat", "std_error", "ci_low", "ci_high", "method", "n_used"},
                     "CausalEstimate");
  const auto method = estimator_method_from_string(j.at("method").get<std::string>());
  if (!method) throw ConfigError("CausalEstimate: unknown method");
  CausalEstimate e;
  e.tau_hat = j.at("tau_hat").get<double>();
  e.std_error = j.at("std_error").get<double>();
  e.ci_low = j.at("ci_low").get<double>();
  e.ci_high = j.at("ci_high").get<double>();
  e.method = *method;
  e.n_used = j.at("n_used").get<std::int64_t>();
  return e;
}

inline json to_json(const CiTestResult& r) {
  return json{{"statistic", r.statistic},
              {"p_value", r.p_value},
              {"n", static_cast<std::int64_t>(r.n)},
              {"conditioning_size", r.conditioning_size}};
}

inline CiTestResult ci_result_from_json(const json& j) {
  detail::check_keys(j, {"statistic", "p_value", "n", "conditioning_size"},
                     {"statistic", "p_value", "n", "conditioning_size"}, "CiTestResult");
  return {j.at("statistic").get<double>(), j.at("p_value").get<double>(),
          j.at("n").get<std::int64_t>(), j.at("conditioning_size").get<int>()};
}

inline json to_json(const InvarianceReport& r) {
  return json{{"feature", r.feature},
              {"intervention_values", r.intervention_values},
              {"max_abs_prediction_change", r.max_abs_prediction_change},
              {"threshold", r.threshold},
              {"verdict", to_string(r.verdict)}};
}

inline InvarianceReport invariance_report_from_json(const json& j) {
  detail::check_keys(
      j, {"feature", "intervention_values", "max_abs_prediction_change", "threshold", "verdict"},
      {"feature", "intervention_values", "max_abs_prediction_change", "threshold", "verdict"},
      "InvarianceReport");
  InvarianceReport r;
  r.feature = j.at("feature").get<std::string>();
  r.intervention_values = j.at("intervention_values").get<std::vector<double>>();
  r.max_abs_prediction_change = j.at("max_abs_prediction_change").get<double>();
  r.threshold = j.at("threshold").get<double>();
  const std::string verdict = j.at("verdict").get<std::string>();
  if (verdict == "invariant")
    r.verdict = InvarianceVerdict::invariant;
  else if (verdict == "sensitive")
    r.verdict = InvarianceVerdict::sensitive;
  else
    throw ConfigError("InvarianceReport: unknown verdict '" + verdict + "'");
  return r;
}

inline json to_json(const ReplicationStats& s) {
  json j{{"mean", s.mean}, {"std_dev", s.std_dev}, {"n_reps", s.n_reps}};
  if (s.bias) j["bias"] = *s.bias;
  if (s.rmse) j["rmse"] = *s.rmse;
  if (s.coverage) j["coverage"] = *s.coverage;
  return j;
}

inline ReplicationStats replication_stats_from_json(const json& j) {
  detail::check_keys(j, {"mean", "std_dev", "n_reps", "bias", "rmse", "coverage"},
                     {"mean", "std_dev", "n_reps"}, "ReplicationStats");
  ReplicationStats s;
  s.mean = j.at("mean").get<double>();
  s.std_dev = j.at("std_dev").get<double>();
  s.n_reps = j.at("n_reps").get<int>();
  if (j.contains("bias")) s.bias = j.at("bias").get<double>();
  if (j.contains("rmse")) s.rmse = j.at("rmse").get<double>();
  if (j.contains("coverage")) s.coverage = j.at("coverage").get<double>();
  return s;
}

inline json to_json(const DemoReport& r) {
  json entries = json::array();
  for (const DemoEntry& e : r.entries)
    entries.push_back(json{{"scenario", e.scenario},
                           {"method", e.method},
                           {"metric", e.metric},
                           {"stats", to_json(e.stats)}});
  return json{{"demo", r.demo_id},
              {"seed", r.seed},
              {"replications", r.replications},
              {"grid", r.grid},
              {"entries", entries}};
}

inline DemoReport demo_report_from_json(const json& j) {
  detail::check_keys(j, {"demo", "seed", "replications", "grid", "entries"},
                     {"demo", "seed", "replications", "grid", "entries"}, "DemoReport");
  DemoReport r;
  r.demo_id = j.at("demo").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.replications = j.at("replications").get<int>();
  r.grid = j.at("grid").get<std::vector<double>>();
  for (const json& je : j.at("entries")) {
    detail::check_keys(je, {"scenario", "method", "metric", "stats"},
                       {"scenario", "method", "metric", "stats"}, "DemoEntry");
    r.entries.push_back({je.at("scenario").get<std::string>(), je.at("method").get<std::string>(),
                         je.at("metric").get<std::string>(),
                         replication_stats_from_json(je.at("stats"))});
  }
  return r;
}

// Versioned report envelope: {schema_version, config, results}.
inline json make_report(json config, json results) {
  return json{{"schema_version", kReportSchemaVersion},
              {"config", std::move(config)},
              {"results", std::move(results)}};
}

// Strict parse of the envelope; unknown fields and version drift rejected.
inline json parse_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid report JSON: ") + e.what());
  }
  detail::check_keys(j, {"schema_version", "config", "results"},
                     {"schema_version", "config", "results"}, "report");
  if (j.at("schema_version") != kReportSchemaVersion)
    throw ConfigError("unsupported report schema_version");
  return j;
}

// ---- files ----

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return std::move(ss).str();
}

// Write via a temp file in the same directory, then rename into place.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("error while writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move report into place at '" + path.string() + "'");
  }
}

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  return dataset_from_csv(read_file(path));
}

inline void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  atomic_write_file(path, dataset_to_csv(data));
}

}  // namespace causalab
