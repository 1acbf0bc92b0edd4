#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include "cli/run.hpp"
#include "rareis/external_process.hpp"
#include "rareis/parallel.hpp"

namespace {

extern "C" void on_interrupt(int signal) {
  rareis::kill_all_external_processes();
  ::_exit(128 + signal);
}

bool write_file(const std::string& path, const std::string& bytes) {
  std::ofstream file(path, std::ios::binary);
  file << bytes;
  return static_cast<bool>(file);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);

  rareis::cli::RunConfig config;
  config.workers = rareis::default_worker_count();
  CLI::App app{"Rare-event probability, quantile and CVaR estimation by Gaussian mean-shift importance sampling"};
  rareis::cli::configure(app, config);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return rareis::cli::exit_code(rareis::cli::Status::kConfigError);
  }

  const rareis::cli::RunOutput output = rareis::cli::run(config);
  const std::string report = rareis::cli::emit_report(output, config.format);
  if (config.out.empty()) {
    std::cout << report;
  } else if (!write_file(config.out, report)) {
    std::cerr << "cannot write " << config.out << '\n';
    return 1;
  }
  if (!config.trace_out.empty() && output.trace) {
    const bool json = config.trace_out.size() >= 5 && config.trace_out.ends_with(".json");
    const auto format = json ? rareis::cli::OutputFormat::kJson : rareis::cli::OutputFormat::kCsv;
    if (!write_file(config.trace_out, rareis::cli::emit_trace(*output.trace, format))) {
      std::cerr << "cannot write " << config.trace_out << '\n';
      return 1;
    }
  }
  if (output.status != rareis::cli::Status::kOk) std::cerr << rareis::cli::status_name(output.status) << ": " << output.message << '\n';
  return rareis::cli::exit_code(output.status);
}
