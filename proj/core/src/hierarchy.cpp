#include "amh/hierarchy.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <sstream>

#include "amh/errors.hpp"

namespace amh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

ParameterBox::ParameterBox(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty()) throw ConfigError("parameter box must have dimension >= 1");
  if (lower_.size() != upper_.size())
    throw ConfigError("parameter box bounds have different lengths");
  for (std::size_t q = 0; q < lower_.size(); ++q) {
    if (!(lower_[q] < upper_[q]) || !std::isfinite(lower_[q]) || !std::isfinite(upper_[q])) {
      std::ostringstream msg;
      msg << "parameter box component " << q + 1 << " needs finite lo < hi";
      throw ConfigError(msg.str());
    }
  }
}

ParameterBox ParameterBox::uniform(std::size_t dimension, double lower, double upper) {
  return {std::vector<double>(dimension, lower), std::vector<double>(dimension, upper)};
}

bool ParameterBox::contains(const ParameterVector& mu) const {
  if (mu.size() != dimension()) return false;
  for (std::size_t q = 0; q < mu.size(); ++q) {
    if (!(mu[q] >= lower_[q] && mu[q] <= upper_[q])) return false;
  }
  return true;
}

void ParameterBox::check(const ParameterVector& mu) const {
  if (mu.size() != dimension()) {
    std::ostringstream msg;
    msg << "parameter has " << mu.size() << " components, expected " << dimension();
    throw DomainError(msg.str());
  }
  for (std::size_t q = 0; q < mu.size(); ++q) {
    if (!(mu[q] >= lower_[q] && mu[q] <= upper_[q])) {
      std::ostringstream msg;
      msg << "parameter component " << q + 1 << " = " << mu[q] << " outside [" << lower_[q]
          << ", " << upper_[q] << "]";
      throw DomainError(msg.str());
    }
  }
}

std::vector<double> ParameterBox::to_unit(const ParameterVector& mu) const {
  detail::require(mu.size() == dimension(), "to_unit: dimension mismatch");
  std::vector<double> unit(mu.size());
  for (std::size_t q = 0; q < mu.size(); ++q)
    unit[q] = (mu[q] - lower_[q]) / (upper_[q] - lower_[q]);
  return unit;
}

ParameterVector ParameterBox::from_unit(std::span<const double> unit) const {
  detail::require(unit.size() == dimension(), "from_unit: dimension mismatch");
  std::vector<double> values(unit.size());
  for (std::size_t q = 0; q < unit.size(); ++q)
    values[q] = lower_[q] + (upper_[q] - lower_[q]) * unit[q];
  return ParameterVector(std::move(values));
}

ErrorEstimate ErrorEstimate::of(double value) {
  if (!(value >= 0.0)) throw ContractViolation("error estimate must be a nonnegative number");
  return ErrorEstimate(false, value);
}

Hierarchy::Hierarchy(ParameterBox box, std::vector<std::unique_ptr<ModelLevel>> levels,
                     double tolerance, bool adaptation_enabled)
    : box_(std::move(box)),
      levels_(std::move(levels)),
      tolerance_(tolerance),
      adaptation_enabled_(adaptation_enabled) {
  if (levels_.empty()) throw ConfigError("hierarchy needs at least one level");
  for (const auto& level : levels_) {
    if (!level) throw ConfigError("hierarchy level is null");
  }
  if (!(tolerance_ >= 0.0)) throw ConfigError("tolerance must be >= 0");
}

bool Hierarchy::accepts(const ErrorEstimate& estimate) const {
  if (estimate.is_reference()) return true;
  return tolerance_ > 0.0 && estimate.value() <= tolerance_;
}

// Offers `payload` from level `source` to every cheaper level. Payloads a
// level emits while absorbing travel further down from that level.
void Hierarchy::broadcast(std::size_t source, AdaptationPayload payload,
                          std::vector<AdaptationEvent>& events) {
  std::deque<std::pair<std::size_t, AdaptationPayload>> pending;
  pending.emplace_back(source, std::move(payload));
  while (!pending.empty()) {
    auto [from, data] = std::move(pending.front());
    pending.pop_front();
    for (std::size_t target = 0; target < from; ++target) {
      AbsorbResult result = levels_[target]->absorb(data);
      if (result.used) {
        events.push_back({static_cast<int>(from) + 1, static_cast<int>(target) + 1});
      }
      for (auto& emitted : result.emitted) pending.emplace_back(target, std::move(emitted));
    }
  }
}

CertifiedAnswer Hierarchy::handle_request(const ParameterVector& mu,
                                          std::vector<AdaptationEvent>* events) {
  box_.check(mu);
  const auto request_start = Clock::now();

  std::vector<AdaptationEvent> local_events;
  CertifiedAnswer answer;
  answer.tolerance = tolerance_;

  const std::size_t last = levels_.size() - 1;
  if (!levels_[last]->is_ready()) {
    throw ConfigError("top level '" + levels_[last]->name() + "' is not ready");
  }

  for (std::size_t l = 0; l <= last; ++l) {
    ModelLevel& level = *levels_[l];
    if (!level.is_ready()) continue;

    auto start = Clock::now();
    ModelOutput output = level.evaluate(mu);
    output.duration_s = seconds_since(start);

    const ModelLevel* next = l < last ? levels_[l + 1].get() : nullptr;
    start = Clock::now();
    ErrorEstimate estimate = level.estimate_error(output, mu, next);
    const double criterion_s = seconds_since(start);
    if (estimate.is_reference() && l != last) {
      throw ContractViolation("level '" + level.name() +
                              "' returned a reference estimate but is not the last level");
    }
    answer.attempts.push_back({static_cast<int>(l) + 1, output.duration_s, estimate, criterion_s});

    if (adaptation_enabled_ && l > 0) broadcast(l, output.data, local_events);

    if (accepts(estimate)) {
      answer.payload = std::move(output);
      answer.stage = static_cast<int>(l) + 1;
      answer.estimate = estimate;
      answer.wall_s = seconds_since(request_start);
      if (events) *events = std::move(local_events);
      return answer;
    }
  }
  throw ContractViolation("top level '" + levels_[last]->name() +
                          "' did not produce a reference estimate");
}

StreamResult Hierarchy::run_query_stream(std::span<const ParameterVector> mus,
                                         const std::function<void(const QueryRecord&)>& on_record) {
  StreamResult result;
  result.records.reserve(mus.size());
  for (const auto& mu : mus) {
    QueryRecord record;
    record.mu = mu;
    try {
      record.answer = handle_request(mu, &record.adaptation_events);
    } catch (const DomainError& e) {
      result.error = e.what();
      return result;
    }
    record.query_id = next_query_id_++;
    if (on_record) on_record(record);
    result.records.push_back(std::move(record));
  }
  return result;
}

namespace {

SegmentStats summarize_segment(std::span<const QueryRecord> records, std::size_t num_stages) {
  SegmentStats stats;
  stats.queries = records.size();
  stats.stages.resize(num_stages);
  auto stage_slot = [&stats](int stage) -> StageStats& {
    const auto index = static_cast<std::size_t>(stage - 1);
    if (index >= stats.stages.size()) stats.stages.resize(index + 1);
    return stats.stages[index];
  };
  for (const auto& record : records) {
    stage_slot(record.answer.stage).accepted += 1;
    for (const auto& attempt : record.answer.attempts) {
      auto& slot = stage_slot(attempt.stage);
      slot.evaluations += 1;
      slot.total_eval_s += attempt.duration_s;
    }
    for (const auto& event : record.adaptation_events) stats.events_by_pair[event] += 1;
    stats.adaptation_events += record.adaptation_events.size();
    stats.wall_s += record.answer.wall_s;
  }
  for (auto& stage : stats.stages) {
    stage.mean_eval_s =
        stage.evaluations ? stage.total_eval_s / static_cast<double>(stage.evaluations) : 0.0;
  }
  return stats;
}

}  // namespace

StatsSummary summarize(std::span<const QueryRecord> records, std::size_t num_stages) {
  StatsSummary summary;
  const std::size_t half = records.size() / 2;
  summary.all = summarize_segment(records, num_stages);
  summary.first_half = summarize_segment(records.first(half), num_stages);
  summary.second_half = summarize_segment(records.subspan(half), num_stages);
  const std::size_t stages = summary.all.stages.size();
  summary.first_half.stages.resize(stages);
  summary.second_half.stages.resize(stages);
  return summary;
}

}  // namespace amh
