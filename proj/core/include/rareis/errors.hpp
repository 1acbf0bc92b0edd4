#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rareis {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config error [" + field + "]: " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The external evaluator died or replied with something unparsable.
class SimulatorError : public Error {
 public:
  SimulatorError(const std::string& message, std::vector<std::size_t> failing_indices)
      : Error(message), failing_indices_(std::move(failing_indices)) {}

  const std::vector<std::size_t>& failing_indices() const noexcept { return failing_indices_; }

 private:
  std::vector<std::size_t> failing_indices_;
};

/// A batch carries no sample above the current threshold.
class NoSurvivors : public Error {
 public:
  NoSurvivors() : Error("batch has no survivor above the threshold") {}
};

/// All responses of a batch are identical and below the target threshold.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

/// A stratum has (numerically) zero probability.
class DegenerateStratum : public Error {
 public:
  using Error::Error;
};

/// No weighted survivor in a final-phase sample.
class ZeroHits : public Error {
 public:
  ZeroHits() : Error("no weighted survivor in the sample") {}
};

/// The run budget ran out before the target precision was met. Subclasses
/// carry the partial result.
class BudgetExhausted : public Error {
 public:
  BudgetExhausted() : Error("run budget exhausted before the target precision was met") {}
};

}  // namespace rareis
