#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "causalab/dataset.hpp"
#include "causalab/error.hpp"
#include "causalab/rng.hpp"
#include "causalab/types.hpp"

namespace causalab {

using EnvMap = std::map<std::string, double>;

enum class NoiseKind { gaussian, bernoulli, rademacher, none };

// Exogenous noise attached to a node. A bernoulli success probability may be
// tied to an environment parameter as q = offset + scale * env[q_param].
struct Noise {
  NoiseKind kind = NoiseKind::none;
  double mean = 0.0, sd = 0.0;       // gaussian
  double offset = 0.0, scale = 0.0;  // bernoulli
  std::string q_param;               // bernoulli only; empty means q = offset

  static Noise gaussian(double mean, double sd) {
    if (!(sd >= 0)) throw ConfigError("Noise: gaussian sd must be >= 0");
    Noise n;
    n.kind = NoiseKind::gaussian;
    n.mean = mean;
    n.sd = sd;
    return n;
  }
  static Noise bernoulli(double q) {
    if (!(q >= 0 && q <= 1)) throw ConfigError("Noise: bernoulli q must be in [0,1]");
    Noise n;
    n.kind = NoiseKind::bernoulli;
    n.offset = q;
    return n;
  }
  static Noise bernoulli_env(std::string param, double offset, double scale) {
    Noise n;
    n.kind = NoiseKind::bernoulli;
    n.q_param = std::move(param);
    n.offset = offset;
    n.scale = scale;
    return n;
  }
  static Noise rademacher() {
    Noise n;
    n.kind = NoiseKind::rademacher;
    return n;
  }
  static Noise none() { return {}; }

  double bernoulli_q(const EnvMap& env) const {
    double q = offset;
    if (!q_param.empty()) {
      auto it = env.find(q_param);
      if (it == env.end())
        throw ConfigError("Noise: missing environment parameter '" + q_param + "'");
      q = offset + scale * it->second;
    }
    if (!(q >= 0 && q <= 1))
      throw ConfigError("Noise: resolved bernoulli probability " + std::to_string(q) +
                        " outside [0,1]");
    return q;
  }
};

// Structural mechanism: deterministic function of (parent values in
// declaration order, noise draw, environment). A null mechanism passes the
// noise draw through, which is the usual definition of a root node.
using Mechanism = std::function<double(std::span<const double>, double, const EnvMap&)>;

struct NodeDef {
  std::string name;
  std::vector<std::string> parents;
  Mechanism mechanism;
  Noise noise;
  std::optional<Role> role;
  std::vector<std::string> uses_params;  // environment parameters the node reads
};

// A structural causal model: nodes in topological order plus default
// environment parameters. Nodes may only reference previously defined
// parents, so the declaration order is a valid evaluation order.
class ScmSpec {
 public:
  // Declare an environment parameter with a default value. NaN marks a
  // parameter the caller must always supply.
  ScmSpec& param(const std::string& name, double default_value) {
    params_[name] = default_value;
    return *this;
  }

  ScmSpec& node(NodeDef def) {
    if (def.name.empty()) throw ConfigError("ScmSpec: node name must be non-empty");
    if (defined_.count(def.name)) throw ConfigError("ScmSpec: duplicate node '" + def.name + "'");
    for (const std::string& p : def.parents)
      if (!defined_.count(p))
        throw ConfigError("ScmSpec: node '" + def.name + "' references undefined parent '" + p +
                          "'");
    if (!def.noise.q_param.empty() &&
        std::find(def.uses_params.begin(), def.uses_params.end(), def.noise.q_param) ==
            def.uses_params.end())
      def.uses_params.push_back(def.noise.q_param);
    for (const std::string& p : def.uses_params)
      if (!params_.count(p))
        throw ConfigError("ScmSpec: node '" + def.name + "' uses undeclared parameter '" + p +
                          "'");
    defined_.insert(def.name);
    nodes_.push_back(std::move(def));
    return *this;
  }

  const std::vector<NodeDef>& nodes() const { return nodes_; }
  const EnvMap& environment_params() const { return params_; }

  // Defaults overlaid with the caller's environment; rejects unknown names
  // and parameters left without a value.
  EnvMap resolve_env(const EnvMap& overrides) const {
    EnvMap env = params_;
    for (const auto& [k, v] : overrides) {
      if (!params_.count(k)) throw ConfigError("environment parameter '" + k + "' is not declared");
      env[k] = v;
    }
    for (const auto& [k, v] : env)
      if (std::isnan(v)) throw ConfigError("missing environment parameter '" + k + "'");
    return env;
  }

 private:
  std::vector<NodeDef> nodes_;
  EnvMap params_;
  std::set<std::string> defined_;
};

namespace detail {

inline Vector draw_noise(const Noise& noise, const EnvMap& env, Index n, RandomStream& stream) {
  Vector out(n);
  switch (noise.kind) {
    case NoiseKind::gaussian:
      for (Index i = 0; i < n; ++i) out(i) = stream.gaussian(noise.mean, noise.sd);
      break;
    case NoiseKind::bernoulli: {
      const double q = noise.bernoulli_q(env);
      for (Index i = 0; i < n; ++i) out(i) = stream.bernoulli(q) ? 1.0 : 0.0;
      break;
    }
    case NoiseKind::rademacher:
      for (Index i = 0; i < n; ++i) out(i) = stream.rademacher();
      break;
    case NoiseKind::none:
      out.setZero();
      break;
  }
  return out;
}

}  // namespace detail

// Draw n joint samples by evaluating nodes in declaration order. Each node's
// noise comes from a sub-stream keyed by the node name, so adding or
// reordering nodes never perturbs the draws of the others.
inline Dataset sample(const ScmSpec& spec, const EnvMap& env, Index n, const RngHandle& rng) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  const EnvMap resolved = spec.resolve_env(env);

  std::map<std::string, const Vector*> computed;
  std::vector<Vector> columns;
  columns.reserve(spec.nodes().size());

  for (const NodeDef& node : spec.nodes()) {
    RandomStream stream(rng.sub(node.name));
    const Vector noise = detail::draw_noise(node.noise, resolved, n, stream);

    std::vector<const Vector*> parents;
    parents.reserve(node.parents.size());
    for (const std::string& p : node.parents) parents.push_back(computed.at(p));

    Vector col(n);
    std::vector<double> pvals(node.parents.size());
    for (Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < parents.size(); ++j) pvals[j] = (*parents[j])(i);
      const double v =
          node.mechanism ? node.mechanism(std::span<const double>(pvals), noise(i), resolved)
                         : noise(i);
      if (!std::isfinite(v))
        throw NumericError("sample: node '" + node.name + "' produced a non-finite value");
      col(i) = v;
    }
    columns.push_back(std::move(col));
    computed[node.name] = &columns.back();
  }

  Dataset out;
  for (std::size_t k = 0; k < spec.nodes().size(); ++k)
    out.add_column(spec.nodes()[k].name, std::move(columns[k]), spec.nodes()[k].role);
  return out;
}

}  // namespace causalab
