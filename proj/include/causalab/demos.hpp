#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "causalab/scm.hpp"

// The four demonstration SCMs exercised by the experiment drivers, plus the
// closed-form population moments of demo 1 used as a test oracle.

namespace causalab {

// Demo 1: spurious feature whose sign flips across environments.
//   U, Z ~ N(0,1); X_causal = U + eta; X_spur = s_e * Z + xi; Y = 2U + Z + eps
inline constexpr double kDemo1NoiseSd = 0.2;  // eta, xi, eps

inline ScmSpec demo1_spec() {
  ScmSpec s;
  s.param("s_e", 1.0);
  s.node({"U", {}, nullptr, Noise::gaussian(0, 1)});
  s.node({"Z", {}, nullptr, Noise::gaussian(0, 1), Role::covariate});
  s.node({"X_causal",
          {"U"},
          [](std::span<const double> p, double e, const EnvMap&) { return p[0] + e; },
          Noise::gaussian(0, kDemo1NoiseSd),
          Role::causal});
  s.node({"X_spur",
          {"Z"},
          [](std::span<const double> p, double e, const EnvMap& env) {
            return env.at("s_e") * p[0] + e;
          },
          Noise::gaussian(0, kDemo1NoiseSd),
          Role::spurious,
          {"s_e"}});
  s.node({"Y",
          {"U", "Z"},
          [](std::span<const double> p, double e, const EnvMap&) {
            return 2.0 * p[0] + p[1] + e;
          },
          Noise::gaussian(0, kDemo1NoiseSd),
          Role::outcome});
  return s;
}

// Demo 2: shape/colour binary classification. The label channel of each
// feature is the label flipped with some probability: 0.15 for shape
// (causal), 1-p for colour (spurious, environment-dependent). Feature
// separation mu/sigma is calibrated so a shape-only Bayes classifier sits
// near 85% accuracy: P(correct) = 0.85*Phi(mu/sigma) + 0.15*(1-Phi(mu/sigma)).
inline constexpr double kDemo2ShapeFlip = 0.15;
inline constexpr double kDemo2Mu = 2.5;
inline constexpr double kDemo2Sigma = 1.0;

inline ScmSpec demo2_spec() {
  auto flip = [](std::span<const double> p, double e, const EnvMap&) {
    return p[0] + e - 2.0 * p[0] * e;  // XOR with the flip indicator
  };
  auto feature = [](std::span<const double> p, double e, const EnvMap&) {
    return (2.0 * p[0] - 1.0) * kDemo2Mu + e;
  };
  ScmSpec s;
  s.param("p", 0.5);
  s.node({"Y", {}, nullptr, Noise::bernoulli(0.5), Role::outcome});
  s.node({"Y_shape", {"Y"}, flip, Noise::bernoulli(kDemo2ShapeFlip)});
  s.node({"Y_colour", {"Y"}, flip, Noise::bernoulli_env("p", 1.0, -1.0)});
  s.node({"shape", {"Y_shape"}, feature, Noise::gaussian(0, kDemo2Sigma), Role::causal});
  s.node({"colour", {"Y_colour"}, feature, Noise::gaussian(0, kDemo2Sigma), Role::spurious});
  return s;
}

// Demo 3: partially linear model with nonlinear nuisances,
//   D = m0(X) + V,  Y = tau*D + g0(X) + eps,  tau = 0.5.
inline constexpr double kDemo3Tau = 0.5;

inline double demo3_g0(double x) { return std::sin(x) + 0.5 * x * x; }
inline double demo3_m0(double x) { return 0.7 * x + std::tanh(x); }

// Test hooks replacing the nuisance functions.
enum class Demo3Nuisance { standard, zero, linear };

inline ScmSpec demo3_spec(Demo3Nuisance g0 = Demo3Nuisance::standard,
                          Demo3Nuisance m0 = Demo3Nuisance::standard) {
  auto pick = [](Demo3Nuisance kind, bool is_g) {
    switch (kind) {
      case Demo3Nuisance::zero: return +[](double) { return 0.0; };
      case Demo3Nuisance::linear: return +[](double x) { return x; };
      case Demo3Nuisance::standard: break;
    }
    return is_g ? +[](double x) { return demo3_g0(x); } : +[](double x) { return demo3_m0(x); };
  };
  double (*gfun)(double) = pick(g0, true);
  double (*mfun)(double) = pick(m0, false);

  ScmSpec s;
  s.node({"X", {}, nullptr, Noise::gaussian(0, 1), Role::covariate});
  s.node({"D",
          {"X"},
          [mfun](std::span<const double> p, double e, const EnvMap&) { return mfun(p[0]) + e; },
          Noise::gaussian(0, 1),
          Role::treatment});
  s.node({"Y",
          {"D", "X"},
          [gfun](std::span<const double> p, double e, const EnvMap&) {
            return kDemo3Tau * p[0] + gfun(p[1]) + e;
          },
          Noise::gaussian(0, 1),
          Role::outcome});
  return s;
}

// Demo 4: reward hacking. Hidden engagement U drives both content quality C
// and response length L; preference Y depends on content only. The reward
// model sees a noisy content proxy C_hat and L.
inline constexpr double kDemo4ContentNoiseSd = 0.5;   // C = U + N(0, 0.25)
inline constexpr double kDemo4ProxyNoiseSd = 0.5;     // C_hat = C + N(0, 0.25)
inline constexpr double kDemo4LengthNoiseVar = 0.3;   // L = U + N(0, 0.3)

inline ScmSpec demo4_spec() {
  auto shift = [](std::span<const double> p, double e, const EnvMap&) { return p[0] + e; };
  ScmSpec s;
  s.node({"U", {}, nullptr, Noise::gaussian(0, 1)});
  s.node({"C", {"U"}, shift, Noise::gaussian(0, kDemo4ContentNoiseSd)});
  s.node({"L", {"U"}, shift, Noise::gaussian(0, std::sqrt(kDemo4LengthNoiseVar)), Role::covariate});
  s.node({"C_hat", {"C"}, shift, Noise::gaussian(0, kDemo4ProxyNoiseSd), Role::covariate});
  s.node({"Y",
          {"C"},
          [](std::span<const double> p, double e, const EnvMap&) { return 2.0 * p[0] + e; },
          Noise::gaussian(0, 1),
          Role::outcome});
  return s;
}

// Exact population moments of (X_causal, X_spur, Z, Y) for demo 1.
struct PopulationMoments {
  std::vector<std::string> names;
  Vector means;
  Matrix covariance;

  Index index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<Index>(i);
    throw ConfigError("PopulationMoments: no variable named '" + name + "'");
  }
  double cov(const std::string& a, const std::string& b) const {
    return covariance(index_of(a), index_of(b));
  }
};

inline PopulationMoments population_moments_demo1(const EnvMap& env) {
  auto it = env.find("s_e");
  if (it == env.end()) throw ConfigError("population_moments_demo1: env must contain s_e");
  const double se = it->second;
  if (se != 1.0 && se != -1.0)
    throw ConfigError("population_moments_demo1: s_e must be +1 or -1");

  const double v = kDemo1NoiseSd * kDemo1NoiseSd;
  PopulationMoments m;
  m.names = {"X_causal", "X_spur", "Z", "Y"};
  m.means = Vector::Zero(4);
  m.covariance.resize(4, 4);
  // Var: X_causal = 1+v, X_spur = 1+v, Z = 1, Y = 4+1+v.
  m.covariance << 1 + v, 0, 0, 2,
                  0, 1 + v, se, se,
                  0, se, 1, 1,
                  2, se, 1, 5 + v;
  return m;
}

}  // namespace causalab
