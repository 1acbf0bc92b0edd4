#include "run.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "rareis/errors.hpp"
#include "rareis/normal.hpp"
#include "rareis/rng.hpp"

namespace rareis::cli {
namespace {

using Json = nlohmann::ordered_json;

const char* task_name(Task task) {
  switch (task) {
    case Task::kProb: return "prob";
    case Task::kQuantile: return "quantile";
    case Task::kCvar: return "cvar";
    case Task::kStrata: return "strata";
  }
  return "?";
}

const char* tail_name(Tail tail) { return tail == Tail::kRight ? "right" : "left"; }

const char* dimred_name(DimredMode mode) {
  switch (mode) {
    case DimredMode::kAuto: return "auto";
    case DimredMode::kOn: return "on";
    case DimredMode::kOff: return "off";
  }
  return "?";
}

std::string format_real(const char* fmt, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, value);
  return buf;
}

std::string percent(double fraction) {
  return std::isfinite(fraction) ? format_real("%.2f%%", 100.0 * fraction) : "inf";
}

Json real(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

LadderConfig ladder_config(const RunConfig& config, double gamma) {
  LadderConfig ladder;
  ladder.n = static_cast<std::size_t>(config.batch);
  ladder.rho = config.rho;
  ladder.max_levels = config.max_levels;
  ladder.gamma = gamma;
  ladder.confidence = config.confidence;
  ladder.dimred = config.dimred;
  return ladder;
}

}  // namespace

void RunConfig::validate() const {
  if (batch < 100) throw ConfigError("batch", "must be >= 100, got " + std::to_string(batch));
  if (!(precision > 0.0 && precision < 1.0)) throw ConfigError("precision", "must lie in (0, 1)");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence", "must lie in (0, 1)");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho", "must lie in (0, 1)");
  if (max_levels < 1) throw ConfigError("max-levels", "must be >= 1");
  if (max_runs < batch) throw ConfigError("max-runs", "must be at least one batch");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  if (!(dimred.energy_threshold > 0.0 && dimred.energy_threshold <= 1.0))
    throw ConfigError("dimred-energy", "must lie in (0, 1]");
  if (dimred.max_selected < 1) throw ConfigError("dimred-max", "must be >= 1");
  if (dimred.min_z < 0.0) throw ConfigError("dimred-min-z", "must be >= 0");
  if (strata < 2) throw ConfigError("strata", "must be >= 2");
  if (!(pilot > 0.0 && pilot < 1.0)) throw ConfigError("pilot", "must lie in (0, 1)");
  if (strata_samples < static_cast<long long>(2 * strata))
    throw ConfigError("strata-samples", "must be at least twice the number of strata");
  if (p && !(*p > 0.0 && *p < 1.0)) throw ConfigError("p", "must lie in (0, 1)");
  if (gamma && std::isnan(*gamma)) throw ConfigError("gamma", "must be a number");

  if (task == Task::kQuantile) {
    if (!p) throw ConfigError("p", "the quantile task needs --p");
    if (gamma) throw ConfigError("gamma", "the quantile task takes --p, not --gamma");
  } else {
    if (gamma.has_value() == p.has_value()) throw ConfigError("gamma", "give exactly one of --gamma or --p");
  }
  model_spec();
}

ModelSpec RunConfig::model_spec() const {
  const auto colon = model.find(':');
  if (colon == std::string::npos) throw ConfigError("model", "expected builtin:<name> or exec:<path>, got '" + model + "'");
  const std::string kind = model.substr(0, colon);
  const std::string name = model.substr(colon + 1);
  if (kind == "builtin") {
    if (name == "linear") {
      const std::size_t d = dim == 0 ? a_count + 1000 : dim;
      if (a_count > d) throw ConfigError("a-count", "exceeds the dimension");
      return ModelSpec::linear_family(a_count, a_coef, d - a_count, b_coef, tail);
    }
    if (name == "identity") return ModelSpec::identity(dim == 0 ? 1 : dim, tail);
    if (name == "skewed") return ModelSpec::skewed(dim == 0 ? 1 : dim, tail);
    throw ConfigError("model", "unknown builtin model '" + name + "'");
  }
  if (kind == "exec") {
    if (name.empty()) throw ConfigError("model", "exec: needs a command");
    if (dim == 0) throw ConfigError("dim", "external models need --dim");
    return ModelSpec::external(name, dim, tail);
  }
  throw ConfigError("model", "unknown model kind '" + kind + "'");
}

void configure(CLI::App& app, RunConfig& config) {
  app.set_config("--config", "", "TOML/INI file with flat key = value pairs; flags override it");
  app.fallthrough();
  app.require_subcommand(1);

  static const std::map<std::string, Tail> tails{{"right", Tail::kRight}, {"left", Tail::kLeft}};
  static const std::map<std::string, OutputFormat> formats{
      {"table", OutputFormat::kTable}, {"json", OutputFormat::kJson}, {"csv", OutputFormat::kCsv}};
  static const std::map<std::string, DimredMode> dimred_modes{
      {"auto", DimredMode::kAuto}, {"on", DimredMode::kOn}, {"off", DimredMode::kOff}};

  app.add_option("--model", config.model, "builtin:linear|identity|skewed or exec:<path>")->capture_default_str();
  app.add_option("--dim", config.dim, "input dimension (0: model default)")->capture_default_str();
  app.add_option_function<double>("--gamma", [&config](const double& v) { config.gamma = v; },
                                  "threshold in model units");
  app.add_option_function<double>("--p", [&config](const double& v) { config.p = v; },
                                  "tail probability (quantile task, or oracle models in place of --gamma)");
  app.add_option("--tail", config.tail, "right|left")->transform(CLI::CheckedTransformer(tails, CLI::ignore_case));
  app.add_option("--batch", config.batch, "runs per batch and per ladder level")->capture_default_str();
  app.add_option("--precision", config.precision, "target relative 95% half-width")->capture_default_str();
  app.add_option("--confidence", config.confidence)->capture_default_str();
  app.add_option("--rho", config.rho, "fraction of each level kept above the next level")->capture_default_str();
  app.add_option("--max-levels", config.max_levels)->capture_default_str();
  app.add_option("--max-runs", config.max_runs, "run budget")->capture_default_str();
  app.add_option("--seed", config.seed)->capture_default_str();
  app.add_option("--workers", config.workers, "evaluation workers (default from RAREIS_WORKERS)")
      ->capture_default_str();
  app.add_option("--a-count", config.a_count, "builtin:linear dominant coordinates")->capture_default_str();
  app.add_option("--a-coef", config.a_coef)->capture_default_str();
  app.add_option("--b-coef", config.b_coef)->capture_default_str();
  app.add_option("--dimred", config.dimred.mode, "auto|on|off")
      ->transform(CLI::CheckedTransformer(dimred_modes, CLI::ignore_case));
  app.add_option("--dimred-above", config.dimred.activate_above)->capture_default_str();
  app.add_option("--dimred-energy", config.dimred.energy_threshold)->capture_default_str();
  app.add_option("--dimred-max", config.dimred.max_selected)->capture_default_str();
  app.add_option("--dimred-min-z", config.dimred.min_z)->capture_default_str();
  app.add_option("--strata", config.strata)->capture_default_str();
  app.add_option("--pilot", config.pilot)->capture_default_str();
  app.add_option("--strata-samples", config.strata_samples)->capture_default_str();
  app.add_option("--format", config.format, "table|json|csv")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  app.add_option("--out", config.out, "report path (default stdout)");
  app.add_option("--trace-out", config.trace_out, "ladder trace path (.json for JSON, else CSV)");

  const std::pair<const char*, Task> tasks[] = {
      {"prob", Task::kProb}, {"quantile", Task::kQuantile}, {"cvar", Task::kCvar}, {"strata", Task::kStrata}};
  const char* descriptions[] = {"tail probability P(h >= gamma)", "threshold with tail probability p",
                                "expected shortfall beyond gamma", "stratified estimate along the shift direction"};
  for (std::size_t i = 0; i < 4; ++i) {
    const Task task = tasks[i].second;
    app.add_subcommand(tasks[i].first, descriptions[i])->callback([&config, task] { config.task = task; });
  }
}

int exit_code(Status status) noexcept {
  switch (status) {
    case Status::kOk: return 0;
    case Status::kError: return 1;
    case Status::kConfigError: return 2;
    case Status::kBudgetExhausted: return 3;
    case Status::kSimulatorError: return 4;
    case Status::kMaxLevelsExceeded: return 5;
    case Status::kZeroHits: return 6;
  }
  return 1;
}

const char* status_name(Status status) noexcept {
  switch (status) {
    case Status::kOk: return "ok";
    case Status::kError: return "error";
    case Status::kConfigError: return "config_error";
    case Status::kBudgetExhausted: return "budget_exhausted";
    case Status::kSimulatorError: return "simulator_error";
    case Status::kMaxLevelsExceeded: return "max_levels_exceeded";
    case Status::kZeroHits: return "zero_hits";
  }
  return "error";
}

RunOutput run(const RunConfig& config) {
  RunOutput output;
  output.config = config;
  try {
    config.validate();
    const ModelSpec spec = config.model_spec();
    if (config.task != Task::kQuantile) {
      if (config.gamma) {
        output.gamma = *config.gamma;
      } else {
        const auto threshold = analytic_threshold(spec, *config.p);
        if (!threshold) throw ConfigError("p", "this model has no closed form; give --gamma");
        output.gamma = *threshold;
      }
      output.oracle_probability = analytic_tail_prob(spec, output.gamma);
    }

    Model model(spec, config.workers);
    RngStream rng(config.seed, static_cast<std::uint64_t>(StreamTag::kUser));
    const auto max_runs = static_cast<std::size_t>(config.max_runs);
    const auto batch = static_cast<std::size_t>(config.batch);

    switch (config.task) {
      case Task::kProb:
      case Task::kCvar: {
        PrecisionRun result;
        try {
          result = estimate_to_precision(model, output.gamma, ladder_config(config, output.gamma), config.precision,
                                         batch, rng, max_runs);
        } catch (const PrecisionBudgetExhausted& e) {
          result = e.partial();
          output.status = Status::kBudgetExhausted;
          output.message = e.what();
        }
        output.probability = result.report;
        output.trace = result.trace;
        if (config.task == Task::kCvar) output.cvar = estimate_cvar(result.final_sample, spec, output.gamma, config.confidence);
        if (output.cvar) output.cvar->runs = result.report.total_runs();
        break;
      }
      case Task::kQuantile: {
        QuantileConfig qc;
        qc.ladder = ladder_config(config, 0.0);
        qc.target = config.precision;
        qc.batch = batch;
        qc.max_runs = max_runs;
        QuantileRun result;
        try {
          result = estimate_quantile(model, *config.p, qc, rng);
        } catch (const QuantileBudgetExhausted& e) {
          result = e.partial();
          output.status = Status::kBudgetExhausted;
          output.message = e.what();
        }
        output.quantile = result.report;
        output.trace = result.trace;
        output.gamma = result.report.quantile;
        break;
      }
      case Task::kStrata: {
        RngStream ladder_rng = rng.substream(1);
        RngStream strata_rng = rng.substream(3);
        const LadderResult ladder = run_ladder(model, ladder_config(config, output.gamma), ladder_rng);
        const StrataSpec strata = strata_from_shift(ladder.theta, config.strata);
        StratifiedResult result = stratified_estimate(model, output.gamma, strata, config.pilot,
                                                      static_cast<std::size_t>(config.strata_samples), strata_rng,
                                                      config.confidence);
        result.report.exploration_runs = ladder.trace.runs();
        result.report.speedup = speedup(result.report.estimate, result.report.relative_half_width,
                                        result.report.total_runs(), config.confidence);
        output.probability = result.report;
        output.strata = std::move(result);
        output.trace = ladder.trace;
        break;
      }
    }
    if (output.probability && output.probability->zero_hits && output.status == Status::kOk) {
      output.status = Status::kZeroHits;
      output.message = "no weighted survivor in the final sample";
    }
  } catch (const ConfigError& e) {
    output.status = Status::kConfigError;
    output.message = e.what();
  } catch (const SimulatorError& e) {
    output.status = Status::kSimulatorError;
    output.message = e.what();
  } catch (const MaxLevelsExceeded& e) {
    output.status = Status::kMaxLevelsExceeded;
    output.message = e.what();
    output.trace = e.trace();
  } catch (const ZeroHits& e) {
    output.status = Status::kZeroHits;
    output.message = e.what();
  } catch (const Error& e) {
    output.status = Status::kError;
    output.message = e.what();
  }
  return output;
}

namespace {

Json trace_json(const LadderTrace& trace) {
  Json levels = Json::array();
  for (const LevelRecord& r : trace.levels) {
    Json row;
    row["iteration"] = r.iteration;
    row["runs"] = r.runs;
    row["level"] = real(r.level);
    row["estimate"] = real(r.estimate);
    row["ci95"] = real(r.relative_half_width);
    row["survivors"] = r.survivors;
    row["newton_iterations"] = r.newton_iterations;
    row["gradient_norm"] = real(r.gradient_norm);
    row["theta_norm"] = real(r.theta.norm());
    levels.push_back(row);
  }
  return levels;
}

Json probability_json(const EstimateReport& r) {
  Json j;
  j["estimate"] = real(r.estimate);
  j["ci95"] = real(r.relative_half_width);
  j["confidence"] = r.confidence;
  j["exploration_runs"] = r.exploration_runs;
  j["final_runs"] = r.final_runs;
  j["runs"] = r.total_runs();
  j["speedup"] = real(r.speedup);
  j["hits"] = r.hits;
  j["zero_hits"] = r.zero_hits;
  j["converged"] = r.converged;
  j["theta"] = vector_json(r.theta);
  return j;
}

Json report_json(const RunOutput& o) {
  const RunConfig& c = o.config;
  Json j;
  j["task"] = task_name(c.task);
  j["status"] = status_name(o.status);
  j["message"] = o.message;
  j["converged"] = o.status == Status::kOk;

  Json config;
  config["model"] = c.model;
  config["dim"] = c.dim;
  config["tail"] = tail_name(c.tail);
  config["gamma"] = c.gamma ? real(*c.gamma) : Json(nullptr);
  config["p"] = c.p ? real(*c.p) : Json(nullptr);
  config["batch"] = c.batch;
  config["precision"] = c.precision;
  config["confidence"] = c.confidence;
  config["rho"] = c.rho;
  config["max_levels"] = c.max_levels;
  config["max_runs"] = c.max_runs;
  config["seed"] = c.seed;
  config["dimred"] = dimred_name(c.dimred.mode);
  if (c.task == Task::kStrata) {
    config["strata"] = c.strata;
    config["pilot"] = c.pilot;
    config["strata_samples"] = c.strata_samples;
  }
  j["config"] = config;

  j["gamma"] = real(o.gamma);
  if (o.oracle_probability) j["oracle_probability"] = real(*o.oracle_probability);
  if (o.probability) j["probability"] = probability_json(*o.probability);
  if (o.cvar) {
    Json cv;
    cv["gamma"] = real(o.cvar->gamma);
    cv["cvar"] = real(o.cvar->cvar);
    cv["ci95"] = real(o.cvar->relative_half_width);
    cv["sigma_sq"] = real(o.cvar->sigma_sq);
    cv["sigma_bar_sq"] = real(o.cvar->sigma_bar_sq);
    cv["hits"] = o.cvar->hits;
    cv["runs"] = o.cvar->runs;
    cv["speedup"] = o.probability ? real(o.probability->speedup) : Json(nullptr);
    j["cvar"] = cv;
  }
  if (o.quantile) {
    const QuantileReport& q = *o.quantile;
    Json qj;
    qj["p"] = q.target_p;
    qj["quantile"] = real(q.quantile);
    qj["half_width"] = real(q.half_width);
    qj["ci95"] = real(q.relative_half_width);
    qj["probability_at_quantile"] = real(q.probability);
    qj["probability_ci95"] = real(q.probability_relative_half_width);
    qj["exploration_runs"] = q.exploration_runs;
    qj["final_runs"] = q.final_runs;
    qj["runs"] = q.total_runs();
    qj["speedup"] = real(q.speedup);
    qj["converged"] = q.converged;
    qj["theta"] = vector_json(q.theta);
    j["quantile"] = qj;
  }
  if (o.strata) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < o.strata->strata.size(); ++i) {
      const StratumSummary& s = o.strata->strata[i];
      Json row;
      row["stratum"] = i;
      row["lower"] = real(s.lower);
      row["upper"] = real(s.upper);
      row["p"] = s.weight;
      row["n"] = s.count;
      row["pilot_n"] = s.pilot_count;
      row["v"] = real(std::sqrt(s.variance));
      row["mean"] = real(s.mean);
      rows.push_back(row);
    }
    j["strata"] = rows;
    j["strata_optimal_variance"] = real(o.strata->optimal_variance);
    j["strata_proportional_variance"] = real(o.strata->proportional_variance);
  }
  if (o.trace) {
    j["selected"] = o.trace->selected;
    j["trace"] = trace_json(*o.trace);
  }
  return j;
}

std::string measure_name(const RunOutput& o) {
  std::string name = o.config.model;
  if (name.rfind("exec:", 0) == 0) name = "exec";
  return name;
}

}  // namespace

std::string emit_trace(const LadderTrace& trace, OutputFormat format) {
  if (format == OutputFormat::kJson) return trace_json(trace).dump(2) + "\n";
  std::ostringstream out;
  const bool csv = format == OutputFormat::kCsv;
  out << (csv ? "iteration,runs,level,estimate,ci95,survivors,newton_iterations\n"
              : "Iteration   Runs   Level          Estimate     CI@95%    Survivors\n");
  for (const LevelRecord& r : trace.levels) {
    if (csv) {
      out << r.iteration << ',' << r.runs << ',' << format_real("%.17g", r.level) << ','
          << format_real("%.17g", r.estimate) << ',' << format_real("%.17g", r.relative_half_width) << ','
          << r.survivors << ',' << r.newton_iterations << '\n';
    } else {
      char line[160];
      std::snprintf(line, sizeof line, "%-11d %-6zu %-14.6g %-12.4e %-9s %zu\n", r.iteration, r.runs, r.level,
                    r.estimate, percent(r.relative_half_width).c_str(), r.survivors);
      out << line;
    }
  }
  return out.str();
}

std::string emit_report(const RunOutput& o, OutputFormat format) {
  if (format == OutputFormat::kJson) return report_json(o).dump(2) + "\n";

  std::ostringstream out;
  const std::string tail = o.config.tail == Tail::kRight ? "Right" : "Left";
  const std::string measure = measure_name(o);
  if (format == OutputFormat::kCsv) {
    switch (o.config.task) {
      case Task::kProb:
        out << "measure,tail,prob,ci95,runs,speedup,status\n";
        if (o.probability)
          out << measure << ',' << tail << ',' << format_real("%.17g", o.probability->estimate) << ','
              << format_real("%.17g", o.probability->relative_half_width) << ',' << o.probability->total_runs()
              << ',' << format_real("%.17g", o.probability->speedup) << ',' << status_name(o.status) << '\n';
        break;
      case Task::kCvar:
        out << "measure,gamma,cvar,ci95,runs,speedup,status\n";
        if (o.cvar && o.probability)
          out << measure << ',' << format_real("%.17g", o.gamma) << ',' << format_real("%.17g", o.cvar->cvar) << ','
              << format_real("%.17g", o.cvar->relative_half_width) << ',' << o.cvar->runs << ','
              << format_real("%.17g", o.probability->speedup) << ',' << status_name(o.status) << '\n';
        break;
      case Task::kQuantile:
        out << "measure,tail,p,quantile,ci95,runs,speedup,status\n";
        if (o.quantile)
          out << measure << ',' << tail << ',' << format_real("%.17g", o.quantile->target_p) << ','
              << format_real("%.17g", o.quantile->quantile) << ','
              << format_real("%.17g", o.quantile->relative_half_width) << ',' << o.quantile->total_runs() << ','
              << format_real("%.17g", o.quantile->speedup) << ',' << status_name(o.status) << '\n';
        break;
      case Task::kStrata:
        out << "stratum,lower,upper,p,n,pilot_n,v,mean\n";
        if (o.strata)
          for (std::size_t i = 0; i < o.strata->strata.size(); ++i) {
            const StratumSummary& s = o.strata->strata[i];
            out << i << ',' << format_real("%.17g", s.lower) << ',' << format_real("%.17g", s.upper) << ','
                << format_real("%.17g", s.weight) << ',' << s.count << ',' << s.pilot_count << ','
                << format_real("%.17g", std::sqrt(s.variance)) << ',' << format_real("%.17g", s.mean) << '\n';
          }
        break;
    }
    return out.str();
  }

  char line[256];
  switch (o.config.task) {
    case Task::kProb:
    case Task::kStrata:
      out << "Measure            Tail   Prob          CI@95%    Nb. Runs   Speedup\n";
      if (o.probability) {
        std::snprintf(line, sizeof line, "%-18s %-6s %-13.4e %-9s %-10zu %.3g\n", measure.c_str(), tail.c_str(),
                      o.probability->estimate, percent(o.probability->relative_half_width).c_str(),
                      o.probability->total_runs(), o.probability->speedup);
        out << line;
      }
      break;
    case Task::kCvar:
      out << "Measure            gamma          CVaR           CI@95%    Nb. Runs   Speedup\n";
      if (o.cvar && o.probability) {
        std::snprintf(line, sizeof line, "%-18s %-14.6g %-14.6g %-9s %-10zu %.3g\n", measure.c_str(), o.gamma,
                      o.cvar->cvar, percent(o.cvar->relative_half_width).c_str(), o.cvar->runs,
                      o.probability->speedup);
        out << line;
      }
      break;
    case Task::kQuantile:
      out << "Measure            Tail   p            Quantile       CI@95%    Nb. Runs   Speedup\n";
      if (o.quantile) {
        std::snprintf(line, sizeof line, "%-18s %-6s %-12.4g %-14.6g %-9s %-10zu %.3g\n", measure.c_str(),
                      tail.c_str(), o.quantile->target_p, o.quantile->quantile,
                      percent(o.quantile->relative_half_width).c_str(), o.quantile->total_runs(),
                      o.quantile->speedup);
        out << line;
      }
      break;
  }
  if (o.strata) {
    out << "\nStratum  Lower        Upper        p          N        v            Mean\n";
    for (std::size_t i = 0; i < o.strata->strata.size(); ++i) {
      const StratumSummary& s = o.strata->strata[i];
      std::snprintf(line, sizeof line, "%-8zu %-12.5g %-12.5g %-10.4g %-8zu %-12.4e %.4e\n", i, s.lower, s.upper,
                    s.weight, s.count, std::sqrt(s.variance), s.mean);
      out << line;
    }
  }
  if (o.trace && !o.trace->selected.empty()) {
    out << "\nSelected coordinates (" << o.trace->selected.size() << "):";
    for (std::size_t i : o.trace->selected) out << ' ' << i;
    out << '\n';
  }
  if (o.trace) out << '\n' << emit_trace(*o.trace, OutputFormat::kTable);
  out << "\nstatus: " << status_name(o.status);
  if (!o.message.empty()) out << " (" << o.message << ")";
  out << '\n';
  return out.str();
}

}  // namespace rareis::cli
