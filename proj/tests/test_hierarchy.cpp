#include <algorithm>
#include <memory>
#include <vector>

#include "amh/errors.hpp"
#include "amh/hierarchy.hpp"
#include "amh/parabolic/fom.hpp"
#include "amh/parabolic/ml.hpp"
#include "amh/parabolic/rb.hpp"
#include "doctest.h"

using namespace amh;

namespace {

struct Probe {
  std::vector<std::vector<int>> absorbed;  // per level: payload tags received
  std::vector<int> evaluated;
};

// A level answering with a fixed estimate. Its payload is its stage number;
// absorbing a payload makes it used and, if `emit_on_absorb`, re-emits -tag.
class ScriptedLevel final : public ModelLevel {
 public:
  ScriptedLevel(int stage, std::optional<double> estimate, Probe& probe, bool ready = true)
      : stage_(stage), estimate_(estimate), probe_(probe), ready_(ready) {}

  std::string name() const override { return "scripted" + std::to_string(stage_); }
  ModelOutput evaluate(const ParameterVector& mu) override {
    probe_.evaluated.push_back(stage_);
    ModelOutput out;
    out.qoi = 10.0 * stage_ + mu[0];
    out.data = stage_;
    return out;
  }
  ErrorEstimate estimate_error(const ModelOutput&, const ParameterVector&, const ModelLevel* next) override {
    last_next = next;
    return estimate_ ? ErrorEstimate::of(*estimate_) : ErrorEstimate::reference();
  }
  AbsorbResult absorb(const AdaptationPayload& payload) override {
    const int* tag = std::any_cast<int>(&payload);
    if (!tag) return AbsorbResult::ignored();
    probe_.absorbed[static_cast<std::size_t>(stage_ - 1)].push_back(*tag);
    ++absorbed_count;
    if (become_ready_after_absorb) ready_ = true;
    AbsorbResult result{true, {}};
    if (emit_on_absorb) result.emitted.push_back(-*tag);
    return result;
  }
  bool is_ready() const override { return ready_; }
  std::size_t state_size() const override { return absorbed_count; }

  const ModelLevel* last_next = nullptr;
  bool emit_on_absorb = false;
  bool become_ready_after_absorb = false;
  std::size_t absorbed_count = 0;

 private:
  int stage_;
  std::optional<double> estimate_;
  Probe& probe_;
  bool ready_;
};

ParameterBox unit_box() { return ParameterBox::uniform(1, 0.0, 1.0); }

}  // namespace

TEST_CASE("parameter box validates bounds and maps to the unit cube") {
  CHECK_THROWS_AS(ParameterBox({1.0}, {1.0}), ConfigError);
  CHECK_THROWS_AS(ParameterBox({0.0, 0.0}, {1.0}), ConfigError);
  CHECK_THROWS_AS(ParameterBox({}, {}), ConfigError);
  const ParameterBox box({0.1, -5.0}, {10.0, 5.0});
  CHECK(box.contains({0.1, 5.0}));
  CHECK_FALSE(box.contains({0.09, 0.0}));
  CHECK_FALSE(box.contains({1.0}));
  CHECK_THROWS_AS(box.check({20.0, 0.0}), DomainError);
  const auto unit = box.to_unit({10.0, 0.0});
  CHECK(unit[0] == doctest::Approx(1.0));
  CHECK(unit[1] == doctest::Approx(0.5));
  const ParameterVector back = box.from_unit(unit);
  CHECK(back[0] == doctest::Approx(10.0));
  CHECK(back[1] == doctest::Approx(0.0));
}

TEST_CASE("error estimates reject negative and NaN values") {
  CHECK_THROWS_AS(ErrorEstimate::of(-1e-12), ContractViolation);
  CHECK_THROWS_AS(ErrorEstimate::of(std::nan("")), ContractViolation);
  CHECK(ErrorEstimate::of(0.0).value() == 0.0);
  CHECK(ErrorEstimate::reference().is_reference());
}

TEST_CASE("hierarchy construction rejects empty level lists and negative tolerances") {
  Probe probe;
  probe.absorbed.resize(1);
  std::vector<std::unique_ptr<ModelLevel>> none;
  CHECK_THROWS_AS(Hierarchy(unit_box(), std::move(none), 0.1), ConfigError);
  std::vector<std::unique_ptr<ModelLevel>> one;
  one.push_back(std::make_unique<ScriptedLevel>(1, std::nullopt, probe));
  CHECK_THROWS_AS(Hierarchy(unit_box(), std::move(one), -1.0), ConfigError);
}

TEST_CASE("single reference level answers every query at stage 1") {
  Probe probe;
  probe.absorbed.resize(1);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 1e-3);
  const CertifiedAnswer a = h.handle_request({0.5});
  CHECK(a.stage == 1);
  CHECK(a.estimate.is_reference());
  REQUIRE(a.attempts.size() == 1);
  CHECK(a.attempts[0].stage == 1);
  CHECK(a.payload.qoi == doctest::Approx(10.5));
}

TEST_CASE("out-of-box parameters raise a domain error before any evaluation") {
  Probe probe;
  probe.absorbed.resize(2);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 0.0, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 1e-3);
  CHECK_THROWS_AS(h.handle_request({1.5}), DomainError);
  CHECK(probe.evaluated.empty());
}

TEST_CASE("zero tolerance falls through to the top and fires 3>2 and 2>1") {
  Probe probe;
  probe.absorbed.resize(3);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 1e-9, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, 1e-9, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(3, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.0);
  for (double mu : {0.1, 0.2, 0.3}) {
    std::vector<AdaptationEvent> events;
    const CertifiedAnswer a = h.handle_request({mu}, &events);
    CHECK(a.stage == 3);
    CHECK(a.attempts.size() == 3);
    const AdaptationEvent e32{3, 2};
    const AdaptationEvent e21{2, 1};
    CHECK(std::find(events.begin(), events.end(), e32) != events.end());
    CHECK(std::find(events.begin(), events.end(), e21) != events.end());
  }
}

TEST_CASE("first accepted stage wins and estimates above TOL are recorded") {
  Probe probe;
  probe.absorbed.resize(3);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 0.5, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, 0.05, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(3, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  const CertifiedAnswer a = h.handle_request({0.25});
  CHECK(a.stage == 2);
  CHECK(a.estimate.value() == doctest::Approx(0.05));
  REQUIRE(a.attempts.size() == 2);
  CHECK(a.attempts[0].estimate.value() > a.tolerance);
  CHECK(probe.evaluated == std::vector<int>{1, 2});
}

TEST_CASE("estimate equal to TOL is accepted") {
  Probe probe;
  probe.absorbed.resize(2);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 0.1, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  CHECK(h.handle_request({0.0}).stage == 1);
}

TEST_CASE("not-ready levels are skipped without evaluation") {
  Probe probe;
  probe.absorbed.resize(3);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 0.0, probe, false));
  levels.push_back(std::make_unique<ScriptedLevel>(2, 1.0, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(3, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  const CertifiedAnswer a = h.handle_request({0.5});
  CHECK(a.stage == 3);
  REQUIRE(a.attempts.size() == 2);
  CHECK(a.attempts[0].stage == 2);
  CHECK(a.attempts[1].stage == 3);
}

TEST_CASE("top level that is not ready is a configuration error") {
  Probe probe;
  probe.absorbed.resize(1);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, std::nullopt, probe, false));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  CHECK_THROWS_AS(h.handle_request({0.5}), ConfigError);
}

TEST_CASE("reference estimate from a non-top level is a contract violation") {
  Probe probe;
  probe.absorbed.resize(2);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, std::nullopt, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  CHECK_THROWS_AS(h.handle_request({0.5}), ContractViolation);
}

TEST_CASE("criterion receives the next level; the top level receives nullptr") {
  Probe probe;
  probe.absorbed.resize(2);
  auto l1 = std::make_unique<ScriptedLevel>(1, 1.0, probe);
  auto l2 = std::make_unique<ScriptedLevel>(2, std::nullopt, probe);
  ScriptedLevel* p1 = l1.get();
  ScriptedLevel* p2 = l2.get();
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::move(l1));
  levels.push_back(std::move(l2));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  h.handle_request({0.5});
  CHECK(p1->last_next == p2);
  CHECK(p2->last_next == nullptr);
}

TEST_CASE("emitted payloads travel further down and are counted as events") {
  Probe probe;
  probe.absorbed.resize(3);
  auto l2 = std::make_unique<ScriptedLevel>(2, 1.0, probe, false);
  l2->emit_on_absorb = true;
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 1.0, probe, false));
  levels.push_back(std::move(l2));
  levels.push_back(std::make_unique<ScriptedLevel>(3, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  std::vector<AdaptationEvent> events;
  h.handle_request({0.5}, &events);
  // 3's payload reaches 2 and 1; 2 re-emits -3 which reaches 1.
  CHECK(probe.absorbed[1] == std::vector<int>{3});
  CHECK(probe.absorbed[0] == std::vector<int>{3, -3});
  CHECK(events == std::vector<AdaptationEvent>{{3, 1}, {3, 2}, {2, 1}});
}

TEST_CASE("adaptation can be disabled") {
  Probe probe;
  probe.absorbed.resize(2);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, 1.0, probe));
  levels.push_back(std::make_unique<ScriptedLevel>(2, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1, false);
  std::vector<AdaptationEvent> events;
  h.handle_request({0.5}, &events);
  CHECK(events.empty());
  CHECK(probe.absorbed[0].empty());
}

TEST_CASE("query streams number records and abort on the first domain error") {
  Probe probe;
  probe.absorbed.resize(1);
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<ScriptedLevel>(1, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);

  CHECK(h.run_query_stream({}).records.empty());

  const std::vector<ParameterVector> mus{{0.1}, {0.2}, {2.0}, {0.3}};
  std::vector<std::uint64_t> seen;
  const StreamResult r = h.run_query_stream(mus, [&](const QueryRecord& rec) { seen.push_back(rec.query_id); });
  CHECK(r.records.size() == 2);
  CHECK(r.error.has_value());
  CHECK(seen == std::vector<std::uint64_t>{1, 2});
  CHECK(r.records[0].query_id < r.records[1].query_id);
}

TEST_CASE("summarize splits the log into halves") {
  CHECK(summarize({}, 3).all.queries == 0);
  CHECK(summarize({}, 3).all.stages.size() == 3);

  std::vector<QueryRecord> log(5);
  for (std::size_t i = 0; i < log.size(); ++i) {
    log[i].query_id = i + 1;
    log[i].answer.stage = i < 2 ? 3 : 1;
    log[i].answer.attempts.push_back({log[i].answer.stage, 0.5, ErrorEstimate::reference(), 0.0});
    log[i].adaptation_events = {{3, 2}};
  }
  const StatsSummary s = summarize(log, 3);
  CHECK(s.all.stages[2].accepted == 2);
  CHECK(s.all.stages[0].accepted == 3);
  CHECK(s.all.stages[0].mean_eval_s == doctest::Approx(0.5));
  CHECK(s.first_half.queries == 2);
  CHECK(s.second_half.queries == 3);
  CHECK(s.first_half.stages[2].accepted == 2);
  CHECK(s.second_half.stages[2].accepted == 0);
  CHECK(s.all.adaptation_events == 5);
  CHECK(s.all.events_by_pair.at({3, 2}) == 5);

  std::vector<QueryRecord> top(4);
  for (auto& r : top) r.answer.stage = 3;
  const StatsSummary t = summarize(top, 3);
  CHECK(t.all.stages[2].accepted == 4);
  CHECK(t.all.stages[0].accepted + t.all.stages[1].accepted == 0);
}

TEST_CASE("parabolic hierarchy reproduces a previously solved parameter") {
  using namespace amh::parabolic;
  auto system = std::make_shared<const AffineSystem>(assemble(DiscretizationConfig{}));
  // a tight POD tolerance keeps the whole trajectory; at 1e-7 the residual
  // of the discarded tail leaves an estimate around 1e-4
  auto reduced = std::make_shared<ReducedModel>(system, PodSettings{1e-13, 20, 60});
  const ParameterBox box = ParameterBox::uniform(2, 0.1, 10.0);
  auto surrogate = std::make_shared<CoefficientSurrogate>(box, reduced, KernelRidgeSettings{});
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::make_unique<MlLevel>(surrogate));
  levels.push_back(std::make_unique<RbLevel>(reduced));
  levels.push_back(std::make_unique<FomLevel>(system));
  Hierarchy h(box, std::move(levels), 1e-3);

  const ParameterVector mu{0.7, 3.2};
  std::vector<AdaptationEvent> first_events;
  const CertifiedAnswer first = h.handle_request(mu, &first_events);
  CHECK(first.stage == 3);
  CHECK(std::find(first_events.begin(), first_events.end(), AdaptationEvent{3, 2}) != first_events.end());
  const CertifiedAnswer second = h.handle_request(mu);
  CHECK(second.stage <= 2);
  CHECK(second.estimate.value() <= 1e-6);
  CHECK(second.stage <= first.stage);
}

TEST_CASE("adaptation never shrinks level state") {
  Probe probe;
  probe.absorbed.resize(2);
  auto l1 = std::make_unique<ScriptedLevel>(1, 1.0, probe, false);
  l1->become_ready_after_absorb = true;
  ScriptedLevel* p1 = l1.get();
  std::vector<std::unique_ptr<ModelLevel>> levels;
  levels.push_back(std::move(l1));
  levels.push_back(std::make_unique<ScriptedLevel>(2, std::nullopt, probe));
  Hierarchy h(unit_box(), std::move(levels), 0.1);
  std::size_t before = p1->state_size();
  for (double mu : {0.1, 0.4, 0.9}) {
    const CertifiedAnswer a = h.handle_request({mu});
    CHECK(p1->state_size() >= before);
    before = p1->state_size();
    CHECK(a.stage == 2);
  }
  // first query skipped level 1; later ones tried it once it became ready
  CHECK(probe.evaluated == std::vector<int>{2, 1, 2, 1, 2});
}
