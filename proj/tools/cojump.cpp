// cojump: ingest tick data or simulate panels, decompose daily covariation
// into continuous and co-jump parts, and write the report tables.
//
//   cojump <ingest|simulate|decompose|report|run> --config cfg.json [overrides]
//
// The config path may also come from $COJUMP_CONFIG. Exit codes: 0 ok,
// 2 I/O, 3 configuration, 4 numerical failure. Errors are printed to stderr
// as one JSON object.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cojump/pipeline.hpp"

namespace {

int report_error(cojump::ErrorKind kind, const std::string& code, const std::string& message,
                 const std::string& path = {}) {
  nlohmann::json j;
  j["error"]["kind"] = cojump::to_string(kind);
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  if (!path.empty()) j["error"]["path"] = path;
  std::cerr << j.dump() << '\n';
  return cojump::exit_code(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet co-jump decomposition of high-frequency return panels"};
  app.require_subcommand(1);

  std::string config_path;
  if (const char* env = std::getenv("COJUMP_CONFIG")) config_path = env;
  cojump::pipeline::Overrides ov;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  int reps = 0;
  unsigned jobs = 0;
  std::string output;

  app.add_option("--config", config_path, "Run configuration (JSON); default $COJUMP_CONFIG");
  auto* o_seed = app.add_option("--seed", seed, "Master seed");
  auto* o_alpha = app.add_option("--alpha", alpha, "Test level");
  auto* o_reps = app.add_option("--bootstrap-reps", reps, "Bootstrap replications B");
  auto* o_jobs = app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* o_out = app.add_option("--output", output, "Output directory");
  app.fallthrough();

  auto* ingest = app.add_subcommand("ingest", "Sample ticks onto the grid and write return panels");
  auto* simulate = app.add_subcommand("simulate", "Write simulated panels and ground truth from a scenario");
  auto* decompose = app.add_subcommand("decompose", "Detect jumps, estimate covariances and run co-jump tests");
  auto* report = app.add_subcommand("report", "Aggregate decompositions into tables and a manifest");
  auto* run = app.add_subcommand("run", "decompose followed by report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(cojump::ErrorKind::config, "BadArguments", e.what());
  }

  if (*o_seed) ov.seed = seed;
  if (*o_alpha) ov.alpha = alpha;
  if (*o_reps) ov.replications = reps;
  if (*o_jobs) ov.jobs = jobs;
  if (*o_out) ov.output = std::filesystem::absolute(output);

  try {
    if (config_path.empty()) cojump::fail_config("NoConfig", "no --config given and COJUMP_CONFIG is unset");
    const auto cfg = cojump::pipeline::load_config(config_path, ov);
    nlohmann::json summary;
    if (ingest->parsed()) {
      const auto s = cojump::pipeline::cmd_ingest(cfg);
      summary = {{"panels", s.panels}, {"dropped_days", s.dropped}, {"rejected_rows", s.rejected_rows}};
    } else if (simulate->parsed()) {
      summary = {{"days", cojump::pipeline::cmd_simulate(cfg)}};
    } else if (decompose->parsed() || run->parsed()) {
      const auto s = cojump::pipeline::cmd_decompose(cfg);
      summary = {{"days", s.days}, {"failed_days", s.failed}};
      if (run->parsed()) summary["config_sha256"] = cojump::pipeline::cmd_report(cfg).config_sha256;
    } else if (report->parsed()) {
      const auto s = cojump::pipeline::cmd_report(cfg);
      summary = {{"days", s.days}, {"config_sha256", s.config_sha256}};
    }
    std::cout << summary.dump() << '\n';
    return 0;
  } catch (const cojump::Error& e) {
    return report_error(e.kind(), e.code(), e.what(), e.path());
  } catch (const std::invalid_argument& e) {
    return report_error(cojump::ErrorKind::config, "InvalidArgument", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(cojump::ErrorKind::io, "FilesystemError", e.what(), e.path1().string());
  } catch (const std::exception& e) {
    return report_error(cojump::ErrorKind::numerical, "Unexpected", e.what());
  }
}
