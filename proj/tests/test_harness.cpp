#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "amh/errors.hpp"
#include "amh/harness/config.hpp"
#include "amh/harness/report.hpp"
#include "amh/harness/results.hpp"
#include "amh/harness/rng.hpp"
#include "amh/harness/runner.hpp"
#include "amh/harness/verify.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace amh;
using namespace amh::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "amh_test_harness";
  fs::create_directories(dir);
  return dir / name;
}

RunConfig small_config(std::int64_t n = 60) {
  RunConfig c;
  c.fom.n_h = 40;
  c.fom.K = 20;
  c.n_queries = n;
  c.seed = 7;
  c.tolerance = 1e-3;
  return c;
}

std::vector<ResultRow> parse(const std::string& text, std::size_t* q = nullptr) {
  std::istringstream in(text);
  return parse_results(in, q);
}

std::size_t csv_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const CsvError& e) {
    return e.line();
  }
  return 0;
}

// Straight transcription of the published xoshiro256** reference step.
struct ReferenceXoshiro {
  std::uint64_t s[4];
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

}  // namespace

TEST_CASE("splitmix64 known outputs") {
  SplitMix64 m(0);
  CHECK(m.next() == 0xe220a8397b1dcdafULL);
  CHECK(m.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(m.next() == 0x06c45d188009454fULL);
}

TEST_CASE("xoshiro256** matches the reference step and is deterministic") {
  SplitMix64 m(42);
  ReferenceXoshiro ref{{m.next(), m.next(), m.next(), m.next()}};
  Xoshiro256ss a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a();
    CHECK(x == ref.next());
    CHECK(x == b());
    differs = differs || x != c();
  }
  CHECK(differs);
  Xoshiro256ss u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform(0.1, 10.0);
    CHECK(v >= 0.1);
    CHECK(v < 10.0);
  }
}

TEST_CASE("config defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.scenario == Scenario::kParabolic);
  CHECK(c.tolerance == 1e-3);
  CHECK(c.n_queries == 400);
  CHECK(c.seed == 42);
  CHECK(c.fom.n_h == 200);
  CHECK(c.fom.K == 100);
  CHECK(c.fom.T == 1.0);
  CHECK(c.fom.Q == 2);
  CHECK(c.rb.pod_tol == 1e-7);
  CHECK(c.rb.n_add_max == 5);
  CHECK(c.rb.n_max == 60);
  CHECK(c.ml.kernel.n_min == 10);
  CHECK(c.ml.kernel.ridge == 1e-8);
  CHECK(c.opt.tol_grad == 1e-3);
  CHECK(c.opt.max_iters == 500);
  CHECK(c.box().dimension() == 2);
  CHECK(c.box().lower(0) == 0.1);
  CHECK(c.box().upper(1) == 10.0);
  CHECK(c.adaptation);

  const RunConfig o = parse_config(R"({"scenario":"optdemo","opt":{"TOL_grad":0.01}})");
  CHECK(o.effective_tolerance() == 0.01);
  CHECK(o.box().lower(0) == -5.0);
  CHECK(o.box().upper(1) == 5.0);
}

TEST_CASE("config parsing of explicit values") {
  const RunConfig c = parse_config(R"({
    "tolerance": 0.01, "n_queries": 12, "seed": 9,
    "box": {"lo": [0.5, 1.0], "hi": 4},
    "fom": {"n_h": 30, "K": 10, "T": 0.5, "Q": 2, "source": [1, 0, 2], "u0": "sine"},
    "rb": {"pod_tol": 1e-6, "n_add_max": 3, "N_max": 20},
    "ml": {"n_min": 5, "lengthscale": "median", "ridge": 1e-6},
    "output": {"results_path": "x.csv", "dumps": {"basis": "b.csv", "training": null}},
    "adaptation": false})");
  CHECK(c.tolerance == 0.01);
  CHECK(c.n_queries == 12);
  CHECK(c.seed == 9);
  CHECK(c.box().lower(1) == 1.0);
  CHECK(c.box().upper(0) == 4.0);
  CHECK(c.fom.source == std::vector<double>{1, 0, 2});
  CHECK(c.fom.u0 == parabolic::InitialCondition::kSine);
  CHECK(c.rb.n_max == 20);
  CHECK(c.ml.kernel.lengthscale.median);
  CHECK(c.output.results_path == "x.csv");
  CHECK(c.output.dumps.basis == std::optional<std::string>("b.csv"));
  CHECK_FALSE(c.output.dumps.training.has_value());
  CHECK_FALSE(c.adaptation);
}

TEST_CASE("config errors") {
  const char* bad[] = {
      "not json",
      "[]",
      R"({"tolerence": 1e-3})",
      R"({"fom": {"nh": 10}})",
      R"({"scenario": "elliptic"})",
      R"({"tolerance": -1})",
      R"({"n_queries": -1})",
      R"({"n_queries": 1.5})",
      R"({"seed": -3})",
      R"({"fom": {"n_h": 0}})",
      R"({"fom": {"Q": 3, "n_h": 2}})",
      R"({"fom": {"source": "two"}})",
      R"({"fom": {"u0": "cos"}})",
      R"({"box": {"lo": 0}})",
      R"({"box": {"lo": 5, "hi": 1}})",
      R"({"box": {"lo": [1, 2, 3]}})",
      R"({"rb": {"pod_tol": 0}})",
      R"({"ml": {"lengthscale": "mean"}})",
      R"({"ml": {"lengthscale": -1}})",
      R"({"ml": {"n_min": 0}})",
      R"({"opt": {"TOL_grad": -1}})",
      R"({"adaptation": 1})",
      R"({"output": {"dumps": {"mesh": "m.csv"}}})",
  };
  for (const char* text : bad) {
    INFO(text);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/amh/config.json"), IoError);
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.0, 1.0, 0.1, 1e-300, 123456.789, -2.5e-7, 1.0 / 3.0}) {
    CHECK(std::stod(format_number(x)) == x);
  }
  CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("results CSV round-trip") {
  ResultRow a;
  a.query_id = 1;
  a.mu = {0.25, 7.0 / 3.0};
  a.stage = 3;
  a.qoi = 0.0123456789;
  a.durations = {std::nullopt, 1.5e-5, 0.002};
  a.basis_n = 5;
  a.events = {{3, 2}, {2, 1}};
  ResultRow b = a;
  b.query_id = 2;
  b.stage = 1;
  b.estimate = 3.0e-4;
  b.durations = {2e-6, std::nullopt, std::nullopt};
  b.ml_n = 11;
  b.events.clear();

  CHECK(csv_header(2) == "query_id,mu_1,mu_2,stage,estimate,qoi,dur_s1,dur_s2,dur_s3,basis_n,ml_n,events");
  CHECK(format_events(a.events) == "3>2;2>1");
  const std::string text = csv_header(2) + "\n" + format_row(a) + "\n" + format_row(b) + "\n";
  std::size_t q = 0;
  const auto rows = parse(text, &q);
  CHECK(q == 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == a);
  CHECK(rows[1] == b);

  const fs::path p = scratch("roundtrip.csv");
  write_results(p.string(), 2, {a, b});
  CHECK(read_results(p.string()) == std::vector<ResultRow>{a, b});
  CHECK_THROWS_AS(read_results("/nonexistent/amh/results.csv"), IoError);
}

TEST_CASE("malformed CSV reports the offending line") {
  const std::string h = csv_header(1) + "\n";
  const std::string good = "1,0.5,3,ref,0.1,,,0.01,3,0,\n";
  CHECK(parse(h + good).size() == 1);
  CHECK(csv_error_line("") == 1);
  CHECK(csv_error_line("query_id,mu_1,stage\n") == 1);
  CHECK(csv_error_line(h + good + "2,0.5,7,ref,0.1,,,0.01,3,0,\n") == 3);
  CHECK(csv_error_line(h + "1,0.5,3,ref,0.1,,,0.01,3,0\n") == 2);
  CHECK(csv_error_line(h + "1,abc,3,ref,0.1,,,0.01,3,0,\n") == 2);
  CHECK(csv_error_line(h + "1,0.5,1,-1,0.1,0.1,,,3,0,\n") == 2);
  CHECK(csv_error_line(h + "1,0.5,3,ref,0.1,,,,3,0,\n") == 2);
  CHECK(csv_error_line(h + "1,0.5,3,ref,0.1,,,0.01,3,0,3-2\n") == 2);
  CHECK(csv_error_line(h + "1,0.5,3,ref,nan,,,0.01,3,0,\n") == 2);
}

TEST_CASE("report of a header-only file is all zeros") {
  const Report r = build_report({});
  CHECK(r.queries == 0);
  for (const auto& s : r.stages) {
    CHECK(s.accepted == 0);
    CHECK(s.fraction == 0.0);
    CHECK(s.mean_eval_s == 0.0);
  }
  CHECK(r.adaptation_events == 0);
  CHECK(r.qoi_mean == 0.0);
  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["queries"] == 0);
}

TEST_CASE("report aggregates") {
  ResultRow one;
  one.query_id = 1;
  one.mu = {1.0};
  one.stage = 1;
  one.estimate = 1e-4;
  one.qoi = 2.0;
  one.durations = {1e-5, std::nullopt, std::nullopt};
  Report single = build_report({one});
  CHECK(single.stages[0].fraction == 1.0);
  CHECK(single.stages[0].mean_eval_s == 1e-5);
  CHECK(single.qoi_mean == 2.0);
  CHECK(single.qoi_bound == doctest::Approx(1e-4));

  ResultRow three = one;
  three.query_id = 2;
  three.stage = 3;
  three.estimate.reset();
  three.qoi = 4.0;
  three.durations = {2e-5, 3e-5, 1e-2};
  three.events = {{3, 2}, {2, 1}};
  ResultRow two = three;
  two.query_id = 3;
  two.stage = 2;
  two.estimate = 5e-4;
  two.durations = {std::nullopt, 5e-5, std::nullopt};
  two.events = {{2, 1}};
  ResultRow last = one;
  last.query_id = 4;

  const Report r = build_report({one, three, two, last}, 0.5);
  CHECK(r.queries == 4);
  double total = 0.0;
  for (const auto& s : r.stages) total += s.fraction;
  CHECK(total == doctest::Approx(1.0));
  CHECK(r.stages[0].accepted == 2);
  CHECK(r.stages[0].evaluations == 3);
  CHECK(r.stages[0].mean_eval_s == doctest::Approx((1e-5 + 2e-5 + 1e-5) / 3));
  CHECK(r.stages[1].evaluations == 2);
  CHECK(r.stages[1].mean_eval_s == doctest::Approx(4e-5));
  CHECK(r.adaptation_events == 3);
  CHECK(r.events_by_pair.at("2>1") == 2);
  CHECK(r.events_by_pair.at("3>2") == 1);
  CHECK(r.first_half.queries == 2);
  CHECK(r.first_half.accepted[2] == 1);
  CHECK(r.second_half.accepted[0] == 1);
  CHECK(r.second_half.adaptation_events == 1);
  CHECK(r.qoi_mean == doctest::Approx(3.0));
  CHECK(r.qoi_bound == doctest::Approx(0.5 * (1e-4 + 0 + 5e-4 + 1e-4) / 4));

  std::vector<ResultRow> rows{one, three, two, last};
  const auto j = nlohmann::json::parse(report_json(r, &rows));
  CHECK(j["queries"] == 4);
  CHECK(j["adaptation_events"] == 3);
  CHECK(j["qoi_mean"].get<double>() == r.qoi_mean);
  CHECK(j["rows"].size() == 4);
  CHECK(report_text(r).find("2>1") != std::string::npos);
}

TEST_CASE("query stream is drawn from the box with the seeded generator") {
  const RunConfig c = small_config(5);
  const auto q = draw_queries(c);
  REQUIRE(q.size() == 5);
  Xoshiro256ss rng(c.seed);
  for (const auto& mu : q) {
    CHECK(mu[0] == 0.1 + 9.9 * rng.uniform01());
    CHECK(mu[1] == 0.1 + 9.9 * rng.uniform01());
  }
  CHECK(draw_queries(small_config(0)).empty());
}

TEST_CASE("runs are deterministic apart from durations") {
  const RunConfig c = small_config();
  const auto q = draw_queries(c);
  Instance a = build_instance(c, Mode::kHierarchy);
  Instance b = build_instance(c, Mode::kHierarchy);
  const RunOutcome x = execute(a, q);
  const RunOutcome y = execute(b, q);
  REQUIRE(x.rows.size() == q.size());
  REQUIRE(y.rows.size() == q.size());
  CHECK_FALSE(x.error.has_value());
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(x.rows[i].same_except_durations(y.rows[i]));
  CHECK(x.rows.front().stage == 3);
  CHECK(x.rows.front().query_id == 1);
  CHECK(x.rows.back().query_id == q.size());
  for (const auto& row : x.rows) {
    CHECK(row.durations[static_cast<std::size_t>(row.stage - 1)].has_value());
    if (row.stage < 3) CHECK(*row.estimate <= c.tolerance);
  }
}

TEST_CASE("baseline matches a zero-tolerance hierarchy") {
  RunConfig c = small_config(25);
  const auto q = draw_queries(c);
  Instance base = build_instance(c, Mode::kBaseline);
  const RunOutcome b = execute(base, q);
  RunConfig zero = c;
  zero.tolerance = 0.0;
  Instance z = build_instance(zero, Mode::kHierarchy);
  const RunOutcome h = execute(z, q);
  Instance adaptive = build_instance(c, Mode::kHierarchy);
  const RunOutcome a = execute(adaptive, q);
  REQUIRE(b.rows.size() == q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(b.rows[i].stage == 3);
    CHECK_FALSE(b.rows[i].estimate.has_value());
    CHECK(h.rows[i].stage == 3);
    CHECK(h.rows[i].qoi == b.rows[i].qoi);
    const double bound = a.rows[i].estimate.value_or(0.0) * adaptive.qoi_constant;
    CHECK(std::abs(a.rows[i].qoi - b.rows[i].qoi) <= bound + 1e-12);
  }
}

TEST_CASE("Monte Carlo mean is certified on a subsample") {
  RunConfig c = small_config(25);
  const auto q = draw_queries(c);
  Instance inst = build_instance(c, Mode::kHierarchy);
  const RunOutcome out = execute(inst, q);
  const Report r = build_report(out.rows, inst.qoi_constant);
  double reference_mean = 0.0;
  for (const auto& mu : q) reference_mean += parabolic::compute_qoi(*inst.system, parabolic::solve_fom(*inst.system, mu));
  reference_mean /= static_cast<double>(q.size());
  CHECK(std::abs(r.qoi_mean - reference_mean) <= r.qoi_bound + 1e-12);
}

TEST_CASE("streaming writer and zero queries") {
  const fs::path p = scratch("empty.csv");
  RunConfig c = small_config(0);
  Instance inst = build_instance(c, Mode::kHierarchy);
  ResultWriter w(p.string(), 2);
  execute(inst, {}, 0, &w);
  w.close();
  std::ifstream in(p);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == csv_header(2) + "\n");
  CHECK(read_results(p.string()).empty());
  CHECK_THROWS_AS(ResultWriter("/nonexistent/amh/out.csv", 2), IoError);
}

TEST_CASE("shard paths and sharded runs") {
  CHECK(shard_path("results.csv", 0) == "results.shard0.csv");
  CHECK(shard_path("out/run.csv", 3) == "out/run.shard3.csv");
  CHECK(shard_path("plain", 1) == "plain.shard1");

  RunConfig c = small_config(30);
  c.output.results_path = scratch("sharded.csv").string();
  const auto q = draw_queries(c);
  const auto outcomes = execute_sharded(c, Mode::kHierarchy, q, 3);
  REQUIRE(outcomes.size() == 3);
  std::uint64_t expected_id = 1;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto rows = read_results(shard_path(c.output.results_path, s));
    CHECK(rows.size() == 10);
    for (const auto& row : rows) CHECK(row.query_id == expected_id++);
    CHECK(rows.front().stage == 3);
  }
}

TEST_CASE("dumps of the adaptive state") {
  RunConfig c = small_config(30);
  c.output.dumps.trajectory = scratch("traj.csv").string();
  c.output.dumps.basis = scratch("basis.csv").string();
  c.output.dumps.training = scratch("training.csv").string();
  Instance inst = build_instance(c, Mode::kHierarchy);
  execute(inst, draw_queries(c));
  const auto notes = write_dumps(c, inst);
  CHECK(notes.size() == 3);

  auto count_lines = [](const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
  };
  CHECK(count_lines(*c.output.dumps.trajectory) == static_cast<std::size_t>(c.fom.K + 1));
  CHECK(count_lines(*c.output.dumps.basis) == static_cast<std::size_t>(c.fom.n_h));
  CHECK(count_lines(*c.output.dumps.basis + ".meta") == 1);
  CHECK(count_lines(*c.output.dumps.training) == inst.surrogate->training_set().size());
}

TEST_CASE("optimisation scenario runs") {
  RunConfig c;
  c.scenario = Scenario::kOptDemo;
  c.opt.delay_s = 0.0;
  c.n_queries = 15;
  Instance inst = build_instance(c, Mode::kHierarchy);
  const RunOutcome out = execute(inst, draw_queries(c));
  REQUIRE(out.oracle.has_value());
  CHECK(out.oracle->total == out.oracle->descent + out.oracle->criterion);
  CHECK(out.rows.front().stage == 2);
  for (const auto& row : out.rows) CHECK(row.stage <= 2);
  CHECK(std::isnan(inst.qoi_constant));
}

TEST_CASE("verification passes on a small problem and detects sabotage") {
  RunConfig c = small_config();
  VerifyOptions o;
  o.equality_trials = 5;
  o.rigor_trials = 10;
  for (const auto& check : run_verification(c, o)) {
    INFO(check.name << ": " << check.detail);
    CHECK(check.passed);
  }
  o.sabotage_gramian = true;
  bool any_failed = false;
  for (const auto& check : run_verification(c, o)) any_failed = any_failed || !check.passed;
  CHECK(any_failed);
  CHECK(analytic_heat_error(100, 1000, 0.1) <= 1e-3);
}
