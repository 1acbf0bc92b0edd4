#include <gtest/gtest.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "cli/run.hpp"
#include "rareis/errors.hpp"

using namespace rareis;
using namespace rareis::cli;

namespace {

RunConfig parse(std::vector<std::string> args) {
  RunConfig config;
  CLI::App app;
  configure(app, config);
  std::reverse(args.begin(), args.end());
  app.parse(args);
  return config;
}

struct Shell {
  int code = -1;
  std::string out;
};

Shell shell(const std::string& args) {
  Shell result;
  FILE* pipe = popen((std::string(RAREIS_CLI_BINARY) + " " + args + " 2>/dev/null").c_str(), "r");
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) result.out.append(buf, n);
  const int status = pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(CliParse, SubcommandAndFlags) {
  const RunConfig c = parse({"--seed", "7", "--tail", "left", "--format", "json", "quantile", "--p", "1e-4",
                             "--dimred", "off", "--batch", "500"});
  EXPECT_EQ(c.task, Task::kQuantile);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.tail, Tail::kLeft);
  EXPECT_EQ(c.format, OutputFormat::kJson);
  EXPECT_EQ(*c.p, 1e-4);
  EXPECT_FALSE(c.gamma.has_value());
  EXPECT_EQ(c.dimred.mode, DimredMode::kOff);
  EXPECT_EQ(c.batch, 500);
}

TEST(CliParse, Defaults) {
  const RunConfig c = parse({"prob", "--gamma", "3"});
  EXPECT_EQ(c.batch, 1000);
  EXPECT_EQ(c.precision, 0.10);
  EXPECT_EQ(c.confidence, 0.95);
  EXPECT_EQ(c.rho, 0.10);
  EXPECT_EQ(c.model, "builtin:linear");
  EXPECT_EQ(c.model_spec().dim, 1010u);
}

TEST(CliParse, RejectsUnknownValues) {
  EXPECT_THROW(parse({"prob", "--tail", "middle"}), CLI::ParseError);
  EXPECT_THROW(parse({"--gamma", "1"}), CLI::ParseError);
}

TEST(CliParse, ConfigFileWithOverride) {
  const auto path = std::filesystem::temp_directory_path() / "rareis_cli_test.toml";
  std::ofstream(path) << "seed = 9\nbatch = 2000\nmodel = \"builtin:identity\"\n";
  const RunConfig c = parse({"--config", path.string(), "--batch", "300", "prob", "--gamma", "2"});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.batch, 300);
  EXPECT_EQ(c.model, "builtin:identity");
  std::filesystem::remove(path);
}

TEST(CliValidate, FieldDiagnostics) {
  RunConfig c;
  c.gamma = 3.0;
  c.batch = -5;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
  c.batch = 1000;
  c.p = 1e-3;
  EXPECT_THROW(c.validate(), ConfigError);  // both gamma and p
  c.gamma.reset();
  c.model = "builtin:skewed";
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(run(c).status, Status::kConfigError);  // p without a closed form
  c.model = "exec:/bin/true";
  EXPECT_THROW(c.validate(), ConfigError);  // no --dim
  c.model = "nonsense";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CliRun, ProbabilityEndToEnd) {
  RunConfig c;
  c.dim = 1010;
  c.p = 2.8e-5;
  c.seed = 1;
  const RunOutput o = run(c);
  ASSERT_EQ(o.status, Status::kOk) << o.message;
  const EstimateReport& r = *o.probability;
  EXPECT_LE(r.relative_half_width, 0.10);
  EXPECT_EQ(r.total_runs() % 1000, 0u);
  EXPECT_LE(std::abs(r.estimate - 2.8e-5), r.relative_half_width * r.estimate);
  EXPECT_FALSE(o.trace->selected.empty());

  const std::string table = emit_report(o, OutputFormat::kTable);
  EXPECT_NE(table.find("Measure"), std::string::npos);
  EXPECT_NE(table.find("CI@95%"), std::string::npos);
  EXPECT_NE(table.find("Nb. Runs"), std::string::npos);
  EXPECT_EQ(emit_report(o, OutputFormat::kCsv).substr(0, 39), "measure,tail,prob,ci95,runs,speedup,sta");
}

TEST(CliRun, JsonRoundTripsLosslessly) {
  RunConfig c;
  c.task = Task::kCvar;
  c.model = "builtin:identity";
  c.gamma = 1.5;
  const RunOutput o = run(c);
  ASSERT_EQ(o.status, Status::kOk) << o.message;
  const std::string text = emit_report(o, OutputFormat::kJson);
  const auto parsed = nlohmann::ordered_json::parse(text);
  EXPECT_EQ(parsed.dump(2) + "\n", text);
  EXPECT_EQ(parsed["cvar"]["cvar"].get<double>(), o.cvar->cvar);
  EXPECT_EQ(parsed["probability"]["estimate"].get<double>(), o.probability->estimate);
  EXPECT_TRUE(parsed["converged"].get<bool>());
}

TEST(CliRun, BudgetExhaustedReportsPartial) {
  RunConfig c;
  c.model = "builtin:identity";
  c.gamma = 4.0;
  c.precision = 0.01;
  c.max_runs = 5000;
  const RunOutput o = run(c);
  EXPECT_EQ(o.status, Status::kBudgetExhausted);
  EXPECT_EQ(exit_code(o.status), 3);
  const auto parsed = nlohmann::json::parse(emit_report(o, OutputFormat::kJson));
  EXPECT_FALSE(parsed["converged"].get<bool>());
  EXPECT_GT(parsed["probability"]["estimate"].get<double>(), 0.0);
}

TEST(CliRun, TraceColumns) {
  RunConfig c;
  c.model = "builtin:identity";
  c.gamma = 4.5;
  const RunOutput o = run(c);
  ASSERT_TRUE(o.trace);
  const std::string csv = emit_trace(*o.trace, OutputFormat::kCsv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,runs,level,estimate,ci95,survivors,newton_iterations");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), o.trace->levels.size() + 1);
}

TEST(CliRun, StrataReport) {
  RunConfig c;
  c.task = Task::kStrata;
  c.dim = 110;
  c.p = 0.04;
  const RunOutput o = run(c);
  ASSERT_EQ(o.status, Status::kOk) << o.message;
  ASSERT_TRUE(o.strata);
  EXPECT_EQ(o.strata->strata.size(), 20u);
  const std::string csv = emit_report(o, OutputFormat::kCsv);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 21u);
}

TEST(CliRun, ExitCodesAreDistinct) {
  std::set<int> codes;
  for (Status s : {Status::kOk, Status::kBudgetExhausted, Status::kConfigError, Status::kSimulatorError,
                   Status::kMaxLevelsExceeded, Status::kZeroHits, Status::kError})
    codes.insert(exit_code(s));
  EXPECT_EQ(codes.size(), 7u);
  EXPECT_EQ(exit_code(Status::kOk), 0);
}

TEST(CliBinary, ConfigErrorExitCode) {
  EXPECT_EQ(shell("prob --gamma 3 --batch -5").code, 2);
  EXPECT_EQ(shell("prob --tail sideways --gamma 1").code, 2);
  EXPECT_EQ(shell("").code, 2);
}

TEST(CliBinary, QuantileIdentity) {
  const Shell s = shell("quantile --model builtin:identity --p 1e-4 --format json");
  ASSERT_EQ(s.code, 0);
  const auto j = nlohmann::json::parse(s.out);
  EXPECT_LE(std::abs(j["quantile"]["quantile"].get<double>() - 3.7190165), j["quantile"]["half_width"].get<double>());
}

TEST(CliBinary, DeterministicAcrossWorkerCounts) {
  const std::string args = "prob --dim 110 --p 1e-6 --seed 5 --format json --workers ";
  const Shell a = shell(args + "1"), b = shell(args + "1"), c = shell(args + "6");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
}

TEST(CliBinary, ExternalModelAndOutputFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "rareis_cli_files";
  std::filesystem::create_directories(dir);
  const std::string model = std::string("--model 'exec:") + RAREIS_FIXTURE_MODEL + "' --dim 3";
  const Shell s = shell("prob " + model + " --gamma 3.5 --workers 2 --out " + (dir / "r.json").string() +
                        " --format json --trace-out " + (dir / "t.csv").string());
  ASSERT_EQ(s.code, 0);
  EXPECT_TRUE(s.out.empty());
  const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  const double p = j["probability"]["estimate"].get<double>();
  EXPECT_LE(std::abs(p - 2.3262907903552504e-4), j["probability"]["ci95"].get<double>() * p);
  EXPECT_EQ(slurp(dir / "t.csv").rfind("iteration,runs,level", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(CliBinary, SimulatorFailureExitCode) {
  const std::string model = std::string("--model 'exec:") + RAREIS_FIXTURE_MODEL + " crash 2' --dim 2";
  EXPECT_EQ(shell("prob " + model + " --gamma 3").code, 4);
}

TEST(CliBinary, MaxLevelsExitCode) {
  EXPECT_EQ(shell("prob --model builtin:identity --gamma 9 --max-levels 2").code, 5);
}
