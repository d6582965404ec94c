#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causalab/error.hpp"
#include "causalab/types.hpp"

namespace causalab {

enum class Role { treatment, outcome, covariate, instrument, env_id, spurious, causal };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::treatment: return "treatment";
    case Role::outcome: return "outcome";
    case Role::covariate: return "covariate";
    case Role::instrument: return "instrument";
    case Role::env_id: return "env_id";
    case Role::spurious: return "spurious";
    case Role::causal: return "causal";
  }
  return "?";
}

inline std::optional<Role> role_from_string(std::string_view s) {
  for (Role r : {Role::treatment, Role::outcome, Role::covariate, Role::instrument, Role::env_id,
                 Role::spurious, Role::causal})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

// Column-named numeric table with role annotations. Columns keep insertion
// order; all columns share the same length.
class Dataset {
 public:
  Dataset() = default;

  Dataset& add_column(const std::string& name, Vector values, std::optional<Role> role = {}) {
    if (name.empty()) throw ConfigError("Dataset: column name must be non-empty");
    if (index_.count(name)) throw ConfigError("Dataset: duplicate column '" + name + "'");
    if (!names_.empty() && values.size() != n_)
      throw ConfigError("Dataset: column '" + name + "' has length " +
                        std::to_string(values.size()) + ", expected " + std::to_string(n_));
    n_ = values.size();
    index_[name] = names_.size();
    names_.push_back(name);
    cols_.push_back(std::move(values));
    if (role) set_role(name, *role);
    return *this;
  }

  Index n() const { return n_; }
  Index n_columns() const { return static_cast<Index>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const Vector& col(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("Dataset: no column named '" + name + "'");
    return cols_[it->second];
  }

  std::optional<Role> role_of(const std::string& name) const {
    auto it = roles_.find(name);
    if (it == roles_.end()) return std::nullopt;
    return it->second;
  }

  void set_role(const std::string& name, Role role) {
    if (!has(name)) throw ConfigError("Dataset: no column named '" + name + "'");
    if (role == Role::outcome) {
      for (const auto& [other, r] : roles_)
        if (r == Role::outcome && other != name)
          throw ConfigError("Dataset: outcome role already assigned to '" + other + "'");
    }
    if (role == Role::env_id) {
      const Vector& v = col(name);
      for (Index i = 0; i < v.size(); ++i)
        if (!(v(i) >= 0 && v(i) == std::floor(v(i)) && v(i) <= 1e6))
          throw ConfigError("Dataset: env_id column '" + name +
                            "' must hold small non-negative integers");
    }
    roles_[name] = role;
  }

  std::vector<std::string> columns_with_role(Role role) const {
    std::vector<std::string> out;
    for (const std::string& name : names_) {
      auto it = roles_.find(name);
      if (it != roles_.end() && it->second == role) out.push_back(name);
    }
    return out;
  }

  // Name of the unique outcome column.
  std::string outcome_name() const {
    auto v = columns_with_role(Role::outcome);
    if (v.empty()) throw ConfigError("Dataset: no column has the outcome role");
    return v.front();
  }

  // Columns stacked into an n x k design, in the order given.
  Matrix feature_matrix(const std::vector<std::string>& feature_names) const {
    Matrix out(n_, static_cast<Index>(feature_names.size()));
    for (std::size_t j = 0; j < feature_names.size(); ++j) out.col(static_cast<Index>(j)) = col(feature_names[j]);
    return out;
  }

  const std::map<std::string, Role>& roles() const { return roles_; }

 private:
  Index n_ = 0;
  std::vector<std::string> names_;
  std::vector<Vector> cols_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, Role> roles_;
};

}  // namespace causalab
