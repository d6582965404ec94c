#pragma once

#include <stdexcept>
#include <string>

namespace causalab {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments, missing columns/parameters, schema mismatches.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Rank-deficient design with no ridge to rescue it.
struct SingularityError : Error {
  using Error::Error;
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double gradient_norm)
      : Error(what), final_gradient_norm(gradient_norm) {}
  double final_gradient_norm = 0.0;
};

struct WeakInstrumentError : Error {
  WeakInstrumentError(const std::string& what, double cov)
      : Error(what), first_stage_cov(cov) {}
  double first_stage_cov = 0.0;
};

// Empty (treatment, stratum) cell in a backdoor adjustment.
struct PositivityError : Error {
  using Error::Error;
};

// Deterministic relation or vanishing denominator.
struct DegenerateError : Error {
  using Error::Error;
};

// A Monte Carlo replication failed; carries the replication index.
struct ReplicationError : Error {
  ReplicationError(int rep, const std::string& what)
      : Error("replication " + std::to_string(rep) + ": " + what), replication(rep) {}
  int replication = 0;
};

// Errors that the CLI maps to the "statistical failure" exit code, as opposed
// to usage (ConfigError) and filesystem (IoError) problems.
inline bool is_statistical(const Error& e) {
  return dynamic_cast<const ConfigError*>(&e) == nullptr &&
         dynamic_cast<const IoError*>(&e) == nullptr;
}

}  // namespace causalab
