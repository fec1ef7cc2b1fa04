#pragma once

// Builds the hierarchy of a scenario, streams a seeded query sequence through
// it and turns the query log into result rows.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amh/harness/config.hpp"
#include "amh/harness/results.hpp"
#include "amh/hierarchy.hpp"
#include "amh/opt/opt_demo.hpp"
#include "amh/parabolic/fom.hpp"
#include "amh/parabolic/ml.hpp"
#include "amh/parabolic/rb.hpp"

namespace amh::harness {

enum class Mode {
  kHierarchy,
  kBaseline,  ///< only the top level, reported under its stage number
};

/// A hierarchy plus typed handles to the state of its levels.
struct Instance {
  std::unique_ptr<Hierarchy> hierarchy;
  /// CSV stage = hierarchy stage + stage_offset (nonzero for baselines).
  int stage_offset = 0;
  int top_stage = 0;
  /// c_l for the parabolic scenario, NaN otherwise.
  double qoi_constant = 0.0;

  std::shared_ptr<const parabolic::AffineSystem> system;
  std::shared_ptr<parabolic::ReducedModel> reduced;
  std::shared_ptr<parabolic::CoefficientSurrogate> surrogate;
  const parabolic::FomLevel* fom = nullptr;

  std::shared_ptr<opt::ObjectiveOracle> oracle;
  const opt::SurrogateDescentLevel* opt_surrogate = nullptr;
  const opt::FullDescentLevel* opt_full = nullptr;

  std::size_t basis_n() const;
  std::size_t ml_n() const;
};

Instance build_instance(const RunConfig& config, Mode mode);

/// n_queries points drawn uniformly from the box with xoshiro256** (component
/// by component, query by query).
std::vector<ParameterVector> draw_queries(const RunConfig& config);

ResultRow to_row(const QueryRecord& record, const Instance& instance, std::uint64_t id_offset);

struct OracleCounts {
  std::size_t total = 0;
  std::size_t descent = 0;    ///< charged by full-level descents
  std::size_t criterion = 0;  ///< charged by stage-1 gradient checks
};

struct RunOutcome {
  std::vector<ResultRow> rows;
  std::vector<QueryRecord> records;
  std::optional<std::string> error;
  double wall_s = 0.0;
  std::optional<OracleCounts> oracle;
};

/// Streams `queries` through `instance`. Rows are numbered from id_offset + 1
/// and, if `writer` is given, written as they are produced.
RunOutcome execute(Instance& instance, std::span<const ParameterVector> queries,
                   std::uint64_t id_offset = 0, ResultWriter* writer = nullptr);

/// results.csv -> results.shard<i>.csv
std::string shard_path(const std::string& path, std::size_t shard);

/// Splits the query stream into `shards` contiguous chunks, each answered by
/// its own hierarchy on its own thread and written to shard_path(results, i).
/// Shards never share adaptive state.
std::vector<RunOutcome> execute_sharded(const RunConfig& config, Mode mode,
                                        std::span<const ParameterVector> queries,
                                        std::size_t shards);

/// Dumps of the final adaptive state; paths from config.output.dumps. Returns
/// a line per file written or skipped.
std::vector<std::string> write_dumps(const RunConfig& config, const Instance& instance);

void write_trajectory_csv(const std::string& path, const parabolic::Trajectory& trajectory);
/// Writes the basis (n_h rows x N columns) and a `<path>.meta` sidecar.
void write_basis_csv(const std::string& path, const parabolic::ReducedBasis& basis,
                     const parabolic::PodSettings& settings);
void write_training_csv(const std::string& path, const parabolic::CoefficientTrainingSet& training);

}  // namespace amh::harness
