// amh: run, baseline, verify and report for the model hierarchy.
//
// Exit codes: 0 success, 1 failed checks or aborted stream, 2 invalid
// configuration or malformed input, 3 I/O failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "amh/errors.hpp"
#include "amh/harness/config.hpp"
#include "amh/harness/report.hpp"
#include "amh/harness/results.hpp"
#include "amh/harness/runner.hpp"
#include "amh/harness/verify.hpp"

namespace {

using namespace amh;
using namespace amh::harness;

constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Overrides {
  std::string config_path;
  std::optional<double> tolerance;
  std::optional<std::int64_t> queries;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario;
  std::optional<std::string> out;
  std::optional<std::string> dump_trajectory;
  std::optional<std::string> dump_basis;
  std::optional<std::string> dump_training;
};

void add_config_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_path, "JSON run configuration");
  cmd.add_option("--tolerance", o.tolerance, "acceptance tolerance (TOL_grad for optdemo)");
  cmd.add_option("--queries", o.queries, "number of queries");
  cmd.add_option("--seed", o.seed, "seed of the query stream");
  cmd.add_option("--scenario", o.scenario, "parabolic or optdemo");
  cmd.add_option("--out", o.out, "results CSV path");
}

RunConfig resolve(const Overrides& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.scenario) config.scenario = scenario_from_string(*o.scenario);
  if (o.tolerance) {
    if (config.scenario == Scenario::kOptDemo) {
      config.opt.tol_grad = *o.tolerance;
    } else {
      config.tolerance = *o.tolerance;
    }
  }
  if (o.queries) config.n_queries = *o.queries;
  if (o.seed) config.seed = *o.seed;
  if (o.out) config.output.results_path = *o.out;
  if (o.dump_trajectory) config.output.dumps.trajectory = *o.dump_trajectory;
  if (o.dump_basis) config.output.dumps.basis = *o.dump_basis;
  if (o.dump_training) config.output.dumps.training = *o.dump_training;
  config.validate();
  return config;
}

void print_oracle(const OracleCounts& counts) {
  std::cout << "oracle calls: " << counts.total << " (descent " << counts.descent << ", criterion "
            << counts.criterion << ")\n";
}

int stream(const Overrides& o, Mode mode, std::size_t shards, const std::string& summary_json) {
  const RunConfig config = resolve(o);
  const auto queries = draw_queries(config);
  const std::string label = mode == Mode::kBaseline ? "baseline" : "run";
  std::cout << label << ": scenario " << to_string(config.scenario) << ", " << queries.size()
            << " queries, seed " << config.seed << ", tolerance "
            << format_number(config.effective_tolerance()) << '\n';

  if (shards > 1) {
    std::cout << "sharded: " << shards
              << " independent hierarchies on disjoint sub-streams (not equivalent to one sequential run)\n";
    const auto outcomes = execute_sharded(config, mode, queries, shards);
    int status = 0;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      const auto& out = outcomes[s];
      std::cout << "shard " << s << ": " << out.rows.size() << " rows -> "
                << shard_path(config.output.results_path, s) << ", wall "
                << format_number(out.wall_s) << " s\n";
      if (out.oracle) print_oracle(*out.oracle);
      if (out.error) {
        std::cerr << "shard " << s << " aborted: " << *out.error << '\n';
        status = kExitFailed;
      }
    }
    return status;
  }

  Instance instance = build_instance(config, mode);
  ResultWriter writer(config.output.results_path, config.box().dimension());
  const RunOutcome outcome = execute(instance, queries, 0, &writer);
  writer.close();

  const double c = std::isnan(instance.qoi_constant) ? 1.0 : instance.qoi_constant;
  const Report report = build_report(outcome.rows, c);
  std::cout << report_text(report);
  std::cout << "wall time: " << format_number(outcome.wall_s) << " s\n";
  if (config.scenario == Scenario::kParabolic) {
    std::cout << "monte carlo qoi mean: " << format_number(report.qoi_mean)
              << "; every row satisfies |s - s_fom| <= c_l * estimate with c_l = "
              << format_number(c) << ", mean bound " << format_number(report.qoi_bound) << '\n';
  }
  if (outcome.oracle) print_oracle(*outcome.oracle);
  std::cout << "results: " << config.output.results_path << '\n';
  if (mode == Mode::kHierarchy) {
    for (const std::string& note : write_dumps(config, instance)) std::cout << "dump: " << note << '\n';
  }
  if (!summary_json.empty()) {
    std::ofstream out(summary_json);
    if (!out) throw IoError("cannot open '" + summary_json + "' for writing");
    out << report_json(report) << '\n';
    if (!out) throw IoError("write to '" + summary_json + "' failed");
  }
  if (outcome.error) {
    std::cerr << "stream aborted after " << outcome.rows.size() << " queries: " << *outcome.error << '\n';
    return kExitFailed;
  }
  return 0;
}

int verify(const Overrides& o, bool sabotage) {
  const RunConfig config = resolve(o);
  VerifyOptions options;
  options.seed = config.seed;
  options.sabotage_gramian = sabotage;
  const auto checks = run_verification(config, options);
  int failed = 0;
  for (const auto& check : checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
    if (!check.passed) ++failed;
  }
  if (failed > 0) {
    std::cerr << failed << " check(s) failed:";
    for (const auto& check : checks)
      if (!check.passed) std::cerr << ' ' << '"' << check.name << '"';
    std::cerr << '\n';
    return kExitFailed;
  }
  return 0;
}

int report(const std::string& path, const std::string& format, const std::string& json_path,
           double qoi_constant, bool with_rows) {
  const auto rows = read_results(path);
  const Report summary = build_report(rows, qoi_constant);
  if (format == "json") {
    std::cout << report_json(summary, with_rows ? &rows : nullptr) << '\n';
  } else {
    std::cout << report_text(summary);
  }
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot open '" + json_path + "' for writing");
    out << report_json(summary, with_rows ? &rows : nullptr) << '\n';
    if (!out) throw IoError("write to '" + json_path + "' failed");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified adaptive model hierarchy"};
  app.require_subcommand(1);

  Overrides run_opts;
  std::size_t shards = 1;
  std::string run_summary;
  auto* run = app.add_subcommand("run", "stream seeded queries through the hierarchy");
  add_config_options(*run, run_opts);
  run->add_option("--shards", shards, "independent hierarchies on disjoint sub-streams")
      ->check(CLI::PositiveNumber);
  run->add_option("--dump-trajectory", run_opts.dump_trajectory, "CSV of the last FOM trajectory");
  run->add_option("--dump-basis", run_opts.dump_basis, "CSV of the final reduced basis");
  run->add_option("--dump-training", run_opts.dump_training, "CSV of the final ML training set");
  run->add_option("--summary-json", run_summary, "write the summary as JSON");

  Overrides base_opts;
  std::size_t base_shards = 1;
  std::string base_summary;
  auto* baseline = app.add_subcommand("baseline", "same stream answered by the top model only");
  add_config_options(*baseline, base_opts);
  baseline->add_option("--shards", base_shards, "independent runs on disjoint sub-streams")
      ->check(CLI::PositiveNumber);
  baseline->add_option("--summary-json", base_summary, "write the summary as JSON");

  Overrides verify_opts;
  bool sabotage = false;
  auto* verify_cmd = app.add_subcommand("verify", "analytic, offline/online, orthonormality and rigor checks");
  verify_cmd->add_option("--config", verify_opts.config_path, "JSON run configuration");
  verify_cmd->add_option("--seed", verify_opts.seed, "seed of the random trials");
  verify_cmd->add_flag("--sabotage-gramian", sabotage, "test hook: corrupt the online residual data");

  std::string results_path;
  std::string format = "text";
  std::string json_path;
  double qoi_constant = 1.0;
  bool with_rows = false;
  auto* report_cmd = app.add_subcommand("report", "aggregate a results CSV");
  report_cmd->add_option("results", results_path, "results CSV")->required();
  report_cmd->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  report_cmd->add_option("--json", json_path, "also write the JSON summary to this path");
  report_cmd->add_option("--qoi-constant", qoi_constant, "c in |s - s_ref| <= c * estimate (default 1)");
  report_cmd->add_flag("--rows", with_rows, "include every row in the JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return stream(run_opts, Mode::kHierarchy, shards, run_summary);
    if (baseline->parsed()) return stream(base_opts, Mode::kBaseline, base_shards, base_summary);
    if (verify_cmd->parsed()) return verify(verify_opts, sabotage);
    if (report_cmd->parsed()) return report(results_path, format, json_path, qoi_constant, with_rows);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CsvError& e) {
    std::cerr << "malformed results file: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return 0;
}
