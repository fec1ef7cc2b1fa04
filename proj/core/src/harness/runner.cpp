#include "amh/harness/runner.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "amh/errors.hpp"
#include "amh/harness/rng.hpp"

namespace amh::harness {

namespace {

using namespace amh::parabolic;

Instance build_parabolic(const RunConfig& config, Mode mode) {
  Instance instance;
  auto system = std::make_shared<const AffineSystem>(assemble(config.fom));
  instance.system = system;
  instance.qoi_constant = system->qoi_constant();
  instance.top_stage = 3;

  auto fom = std::make_unique<FomLevel>(system, config.fom_delay_s);
  instance.fom = fom.get();
  std::vector<std::unique_ptr<ModelLevel>> levels;
  if (mode == Mode::kHierarchy) {
    instance.reduced = std::make_shared<ReducedModel>(system, config.rb);
    instance.surrogate = std::make_shared<CoefficientSurrogate>(
        config.box(), instance.reduced, config.ml.kernel, config.ml.compression_tol);
    levels.push_back(std::make_unique<MlLevel>(instance.surrogate));
    levels.push_back(std::make_unique<RbLevel>(instance.reduced));
  } else {
    instance.stage_offset = 2;
  }
  levels.push_back(std::move(fom));
  instance.hierarchy = std::make_unique<Hierarchy>(config.box(), std::move(levels),
                                                   config.effective_tolerance(), config.adaptation);
  return instance;
}

Instance build_opt(const RunConfig& config, Mode mode) {
  Instance instance;
  instance.qoi_constant = std::numeric_limits<double>::quiet_NaN();
  instance.top_stage = 2;
  instance.oracle = opt::ObjectiveOracle::himmelblau(config.opt.delay_s);

  opt::DescentSettings descent;
  descent.max_iters = config.opt.max_iters;
  auto full = std::make_unique<opt::FullDescentLevel>(instance.oracle, config.box(), descent);
  instance.opt_full = full.get();
  std::vector<std::unique_ptr<ModelLevel>> levels;
  if (mode == Mode::kHierarchy) {
    opt::SurrogateSettings surrogate;
    surrogate.kernel = config.ml.kernel;
    surrogate.kernel.lengthscale = LengthscalePolicy::fixed(config.opt.lengthscale);
    surrogate.min_spacing = config.opt.min_spacing;
    auto level = std::make_unique<opt::SurrogateDescentLevel>(config.box(), descent, surrogate);
    instance.opt_surrogate = level.get();
    levels.push_back(std::move(level));
  } else {
    instance.stage_offset = 1;
  }
  levels.push_back(std::move(full));
  instance.hierarchy = std::make_unique<Hierarchy>(config.box(), std::move(levels),
                                                   config.effective_tolerance(), config.adaptation);
  return instance;
}

std::ofstream open_for_writing(const std::string& path) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace

std::size_t Instance::basis_n() const {
  return reduced ? static_cast<std::size_t>(reduced->dimension()) : 0;
}

std::size_t Instance::ml_n() const {
  if (surrogate) return surrogate->training_set().size();
  if (opt_surrogate) return opt_surrogate->state_size();
  return 0;
}

Instance build_instance(const RunConfig& config, Mode mode) {
  config.validate();
  return config.scenario == Scenario::kParabolic ? build_parabolic(config, mode)
                                                 : build_opt(config, mode);
}

std::vector<ParameterVector> draw_queries(const RunConfig& config) {
  const ParameterBox box = config.box();
  Xoshiro256ss rng(config.seed);
  std::vector<ParameterVector> queries;
  queries.reserve(static_cast<std::size_t>(config.n_queries));
  for (std::int64_t i = 0; i < config.n_queries; ++i) {
    std::vector<double> mu(box.dimension());
    for (std::size_t q = 0; q < mu.size(); ++q) mu[q] = rng.uniform(box.lower(q), box.upper(q));
    queries.emplace_back(std::move(mu));
  }
  return queries;
}

ResultRow to_row(const QueryRecord& record, const Instance& instance, std::uint64_t id_offset) {
  ResultRow row;
  row.query_id = id_offset + record.query_id;
  row.mu.assign(record.mu.values().begin(), record.mu.values().end());
  row.stage = record.answer.stage + instance.stage_offset;
  if (!record.answer.estimate.is_reference()) row.estimate = record.answer.estimate.value();
  row.qoi = record.answer.payload.qoi;
  for (const StageAttempt& attempt : record.answer.attempts) {
    const int stage = attempt.stage + instance.stage_offset;
    detail::require(stage >= 1 && stage <= static_cast<int>(kCsvStages),
                    "to_row: stage outside the CSV schema");
    row.durations[static_cast<std::size_t>(stage - 1)] = attempt.duration_s;
  }
  row.basis_n = instance.basis_n();
  row.ml_n = instance.ml_n();
  for (const AdaptationEvent& e : record.adaptation_events) {
    row.events.push_back(
        {e.source_stage + instance.stage_offset, e.target_stage + instance.stage_offset});
  }
  return row;
}

RunOutcome execute(Instance& instance, std::span<const ParameterVector> queries,
                   std::uint64_t id_offset, ResultWriter* writer) {
  RunOutcome outcome;
  const std::size_t oracle_before = instance.oracle ? instance.oracle->eval_count() : 0;
  const auto start = std::chrono::steady_clock::now();
  StreamResult stream =
      instance.hierarchy->run_query_stream(queries, [&](const QueryRecord& record) {
        ResultRow row = to_row(record, instance, id_offset);
        if (writer) writer->write(row);
        outcome.rows.push_back(std::move(row));
      });
  outcome.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  outcome.records = std::move(stream.records);
  outcome.error = std::move(stream.error);
  if (instance.oracle) {
    OracleCounts counts;
    counts.total = instance.oracle->eval_count() - oracle_before;
    counts.descent = instance.opt_full ? instance.opt_full->oracle_calls() : 0;
    counts.criterion = instance.opt_surrogate ? instance.opt_surrogate->oracle_calls() : 0;
    outcome.oracle = counts;
  }
  return outcome;
}

std::string shard_path(const std::string& path, std::size_t shard) {
  const std::filesystem::path p(path);
  std::filesystem::path out = p.parent_path() / p.stem();
  out += ".shard" + std::to_string(shard);
  out += p.extension();
  return out.string();
}

std::vector<RunOutcome> execute_sharded(const RunConfig& config, Mode mode,
                                        std::span<const ParameterVector> queries,
                                        std::size_t shards) {
  if (shards < 1) throw ConfigError("--shards must be at least 1");
  const std::size_t dimension = config.box().dimension();
  std::vector<RunOutcome> outcomes(shards);
  std::vector<std::exception_ptr> failures(shards);
  std::vector<std::thread> threads;
  const std::size_t n = queries.size();
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = n * s / shards;
    const std::size_t end = n * (s + 1) / shards;
    threads.emplace_back([&, s, begin, end] {
      try {
        Instance instance = build_instance(config, mode);
        ResultWriter writer(shard_path(config.output.results_path, s), dimension);
        outcomes[s] = execute(instance, queries.subspan(begin, end - begin), begin, &writer);
        writer.close();
      } catch (...) {
        failures[s] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return outcomes;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out = open_for_writing(path);
  const Eigen::MatrixXd& u = trajectory.states;
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (i > 0) out << ',';
      out << format_number(u(i, k));
    }
    out << '\n';
  }
  finish(out, path);
}

void write_basis_csv(const std::string& path, const ReducedBasis& basis, const PodSettings& settings) {
  std::ofstream out = open_for_writing(path);
  const Eigen::MatrixXd& v = basis.vectors;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_number(v(i, j));
    }
    out << '\n';
  }
  finish(out, path);
  const std::string meta_path = path + ".meta";
  std::ofstream meta = open_for_writing(meta_path);
  meta << "generation=" << basis.generation << ",N=" << basis.dimension()
       << ",pod_tol=" << format_number(settings.pod_tol) << '\n';
  finish(meta, meta_path);
}

void write_training_csv(const std::string& path, const CoefficientTrainingSet& training) {
  std::ofstream out = open_for_writing(path);
  const Eigen::MatrixXd outputs = training.outputs();
  for (std::size_t r = 0; r < training.size(); ++r) {
    bool first = true;
    for (double m : training.parameters()[r].values()) {
      if (!first) out << ',';
      out << format_number(m);
      first = false;
    }
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < outputs.cols(); ++j) out << ',' << format_number(outputs(row, j));
    out << '\n';
  }
  finish(out, path);
}

std::vector<std::string> write_dumps(const RunConfig& config, const Instance& instance) {
  std::vector<std::string> notes;
  const DumpPaths& dumps = config.output.dumps;
  if (dumps.trajectory) {
    if (instance.fom && instance.fom->last_trajectory()) {
      write_trajectory_csv(*dumps.trajectory, *instance.fom->last_trajectory());
      notes.push_back("trajectory of the last FOM solve -> " + *dumps.trajectory);
    } else {
      notes.push_back("trajectory dump skipped: no FOM solve in this run");
    }
  }
  if (dumps.basis) {
    if (instance.reduced) {
      write_basis_csv(*dumps.basis, instance.reduced->basis(), instance.reduced->settings());
      notes.push_back("reduced basis -> " + *dumps.basis + " (+ .meta)");
    } else {
      notes.push_back("basis dump skipped: no reduced basis in this run");
    }
  }
  if (dumps.training) {
    if (instance.surrogate) {
      write_training_csv(*dumps.training, instance.surrogate->training_set());
      notes.push_back("ML training set -> " + *dumps.training);
    } else {
      notes.push_back("training dump skipped: no coefficient surrogate in this run");
    }
  }
  return notes;
}

}  // namespace amh::harness
