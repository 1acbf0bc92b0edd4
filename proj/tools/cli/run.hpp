#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "rareis/cvar.hpp"
#include "rareis/dimred.hpp"
#include "rareis/model.hpp"
#include "rareis/multilevel.hpp"
#include "rareis/quantile.hpp"
#include "rareis/stratified.hpp"

namespace CLI {
class App;
}

namespace rareis::cli {

enum class Task { kProb, kQuantile, kCvar, kStrata };
enum class OutputFormat { kTable, kJson, kCsv };

struct RunConfig {
  Task task = Task::kProb;
  std::string model = "builtin:linear";
  std::size_t dim = 0;  // 0: model default (linear a_count + 1000, identity/skewed 1)
  std::optional<double> gamma;
  std::optional<double> p;
  Tail tail = Tail::kRight;

  long long batch = 1000;  // final-phase batch and ladder level size
  double precision = 0.10;
  double confidence = 0.95;
  double rho = 0.10;
  int max_levels = 30;
  long long max_runs = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  std::size_t a_count = 10;
  double a_coef = 1.0;
  double b_coef = 0.01;

  DimredConfig dimred;

  std::size_t strata = 20;
  double pilot = 0.2;
  long long strata_samples = 10000;

  OutputFormat format = OutputFormat::kTable;
  std::string out;        // empty: stdout
  std::string trace_out;  // empty: no trace file

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Throws ConfigError.
  ModelSpec model_spec() const;
};

/// Registers every flag, the subcommands and `--config <file>` (TOML/INI,
/// flat keys, command-line flags win) on `app`, writing into `config`.
void configure(CLI::App& app, RunConfig& config);

enum class Status { kOk, kBudgetExhausted, kConfigError, kSimulatorError, kMaxLevelsExceeded, kZeroHits, kError };

int exit_code(Status status) noexcept;
const char* status_name(Status status) noexcept;

struct RunOutput {
  RunConfig config;
  Status status = Status::kOk;
  std::string message;
  double gamma = 0.0;  // model units, resolved from p when needed
  std::optional<double> oracle_probability;
  std::optional<EstimateReport> probability;
  std::optional<CvarReport> cvar;
  std::optional<QuantileReport> quantile;
  std::optional<StratifiedResult> strata;
  std::optional<LadderTrace> trace;
};

/// Executes the task pipeline. Library failures become a status; the
/// function itself only throws on programming errors.
RunOutput run(const RunConfig& config);

/// Stable field names and order. JSON doubles use the shortest round-trip
/// form, so equal runs give equal bytes.
std::string emit_report(const RunOutput& output, OutputFormat format);

/// One row per ladder level: iteration, runs, level, estimate, ci95, ...
std::string emit_trace(const LadderTrace& trace, OutputFormat format);

}  // namespace rareis::cli
