#pragma once

// Aggregates of a results file: per-stage counts, fractions and mean
// evaluation times, adaptation counts, first/second half comparison and the
// QoI mean with its certified bound.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "amh/harness/results.hpp"

namespace amh::harness {

struct StageReport {
  std::size_t accepted = 0;
  double fraction = 0.0;
  std::size_t evaluations = 0;
  double mean_eval_s = 0.0;  ///< over rows with a duration for this stage
};

struct HalfReport {
  std::size_t queries = 0;
  std::array<std::size_t, kCsvStages> accepted{};
  std::size_t adaptation_events = 0;
};

struct Report {
  std::size_t queries = 0;
  std::array<StageReport, kCsvStages> stages{};
  std::size_t adaptation_events = 0;
  std::map<std::string, std::size_t> events_by_pair;  ///< "3>2" -> count
  HalfReport first_half;   ///< rows [0, n/2)
  HalfReport second_half;  ///< rows [n/2, n)
  double qoi_mean = 0.0;
  /// c * mean(estimate) over all rows, `ref` counting as 0: bounds the
  /// distance between qoi_mean and the mean of the reference QoIs.
  double qoi_bound = 0.0;
  double qoi_constant = 1.0;
};

/// `qoi_constant` scales the estimates into QoI errors; 1 is an upper bound
/// of c_l for every parabolic discretization.
Report build_report(const std::vector<ResultRow>& rows, double qoi_constant = 1.0);

std::string report_text(const Report& report);
/// JSON mirror of report_text; with `rows`, also every row's non-duration
/// fields and durations.
std::string report_json(const Report& report, const std::vector<ResultRow>* rows = nullptr,
                        int indent = 2);

}  // namespace amh::harness
