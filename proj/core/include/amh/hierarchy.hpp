#pragma once

// Tolerance-gated model hierarchy: a request is answered by the cheapest
// ready level whose error estimate meets the tolerance. Every evaluation of a
// more expensive level is offered back to the cheaper levels so they improve
// over the course of a query stream.

#include <any>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace amh {

/// A point in the admissible parameter set.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> values) : values_(std::move(values)) {}
  ParameterVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Closed box [lo_q, hi_q] in R^Q.
class ParameterBox {
 public:
  /// Throws ConfigError unless both bounds have the same length Q >= 1 and lo_q < hi_q.
  ParameterBox(std::vector<double> lower, std::vector<double> upper);

  static ParameterBox uniform(std::size_t dimension, double lower, double upper);

  std::size_t dimension() const { return lower_.size(); }
  double lower(std::size_t q) const { return lower_[q]; }
  double upper(std::size_t q) const { return upper_[q]; }
  std::span<const double> lower() const { return lower_; }
  std::span<const double> upper() const { return upper_; }

  bool contains(const ParameterVector& mu) const;
  /// Throws DomainError naming the offending component.
  void check(const ParameterVector& mu) const;
  /// Componentwise affine map of the box onto [0,1]^Q.
  std::vector<double> to_unit(const ParameterVector& mu) const;
  ParameterVector from_unit(std::span<const double> unit) const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// Nonnegative error estimate, or the marker of the unconditionally
/// accepted reference model.
class ErrorEstimate {
 public:
  static ErrorEstimate reference() { return ErrorEstimate(true, 0.0); }
  /// Throws ContractViolation for negative or NaN values.
  static ErrorEstimate of(double value);

  bool is_reference() const { return reference_; }
  /// Only meaningful when !is_reference().
  double value() const { return value_; }

  bool operator==(const ErrorEstimate&) const = default;

 private:
  ErrorEstimate(bool reference, double value) : reference_(reference), value_(value) {}
  bool reference_;
  double value_;
};

struct ModelOutput {
  std::any data;       ///< application payload, e.g. shared_ptr<const Trajectory>
  double qoi = 0.0;    ///< scalar summary written to result logs
  double duration_s = 0.0;
};

/// Anything a level emits for others to learn from. Levels recognise payloads
/// by their concrete type and ignore the rest.
using AdaptationPayload = std::any;

struct AbsorbResult {
  bool used = false;
  /// Forwarded to every level cheaper than the absorbing one.
  std::vector<AdaptationPayload> emitted;

  static AbsorbResult ignored() { return {}; }
};

/// Contract every hierarchy level implements.
class ModelLevel {
 public:
  virtual ~ModelLevel() = default;

  virtual std::string name() const = 0;
  virtual ModelOutput evaluate(const ParameterVector& mu) = 0;
  /// `next` is the following level in the hierarchy (nullptr for the last one);
  /// criteria that need more information than the output itself consult it.
  virtual ErrorEstimate estimate_error(const ModelOutput& output, const ParameterVector& mu,
                                       const ModelLevel* next) = 0;
  virtual AbsorbResult absorb(const AdaptationPayload& payload) = 0;
  virtual bool is_ready() const = 0;
  /// Size of the adaptive state (basis dimension, training-set size, ...).
  virtual std::size_t state_size() const { return 0; }
};

struct StageAttempt {
  int stage = 0;  ///< 1-based
  double duration_s = 0.0;
  ErrorEstimate estimate = ErrorEstimate::reference();
  double criterion_duration_s = 0.0;
};

struct CertifiedAnswer {
  ModelOutput payload;
  int stage = 0;
  ErrorEstimate estimate = ErrorEstimate::reference();
  double tolerance = 0.0;
  std::vector<StageAttempt> attempts;
  double wall_s = 0.0;  ///< total time spent in the request, adaptation included
};

struct AdaptationEvent {
  int source_stage = 0;
  int target_stage = 0;
  bool operator==(const AdaptationEvent&) const = default;
  auto operator<=>(const AdaptationEvent&) const = default;
};

struct QueryRecord {
  std::uint64_t query_id = 0;
  ParameterVector mu;
  CertifiedAnswer answer;
  std::vector<AdaptationEvent> adaptation_events;
};

struct StreamResult {
  std::vector<QueryRecord> records;
  /// Set when a query aborted the stream; `records` then holds the prefix.
  std::optional<std::string> error;
};

/// Ordered list of levels, cheapest first. The last level must answer with
/// ErrorEstimate::reference() and must always be ready.
///
/// Not thread-safe: requests mutate the adaptive state of the levels.
class Hierarchy {
 public:
  /// tolerance == 0 never accepts a surrogate answer.
  Hierarchy(ParameterBox box, std::vector<std::unique_ptr<ModelLevel>> levels, double tolerance,
            bool adaptation_enabled = true);

  Hierarchy(const Hierarchy&) = delete;
  Hierarchy& operator=(const Hierarchy&) = delete;
  Hierarchy(Hierarchy&&) noexcept = default;
  Hierarchy& operator=(Hierarchy&&) noexcept = default;

  /// Throws DomainError (nothing evaluated) when mu is outside the box.
  CertifiedAnswer handle_request(const ParameterVector& mu,
                                 std::vector<AdaptationEvent>* events = nullptr);

  /// Stops at the first failing query and reports it through StreamResult::error.
  StreamResult run_query_stream(std::span<const ParameterVector> mus,
                                const std::function<void(const QueryRecord&)>& on_record = {});

  std::size_t num_levels() const { return levels_.size(); }
  const ModelLevel& level(std::size_t index) const { return *levels_.at(index); }
  const ParameterBox& box() const { return box_; }
  double tolerance() const { return tolerance_; }
  bool adaptation_enabled() const { return adaptation_enabled_; }

 private:
  bool accepts(const ErrorEstimate& estimate) const;
  void broadcast(std::size_t source, AdaptationPayload payload, std::vector<AdaptationEvent>& events);

  ParameterBox box_;
  std::vector<std::unique_ptr<ModelLevel>> levels_;
  double tolerance_;
  bool adaptation_enabled_;
  std::uint64_t next_query_id_ = 1;
};

struct StageStats {
  std::size_t accepted = 0;
  std::size_t evaluations = 0;
  double total_eval_s = 0.0;
  double mean_eval_s = 0.0;
};

struct SegmentStats {
  std::size_t queries = 0;
  std::vector<StageStats> stages;  ///< index 0 is stage 1
  std::size_t adaptation_events = 0;
  std::map<AdaptationEvent, std::size_t> events_by_pair;
  double wall_s = 0.0;
};

struct StatsSummary {
  SegmentStats all;
  SegmentStats first_half;   ///< records [0, n/2)
  SegmentStats second_half;  ///< records [n/2, n)
};

/// Aggregates a query log. `num_stages` fixes the length of the per-stage
/// vectors; stages beyond it in the records are counted too.
StatsSummary summarize(std::span<const QueryRecord> records, std::size_t num_stages);

}  // namespace amh
