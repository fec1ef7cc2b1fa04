#include "amh/harness/report.hpp"

#include <sstream>

#include "json.hpp"

namespace amh::harness {

namespace {

void add_to_half(HalfReport& half, const ResultRow& row) {
  ++half.queries;
  ++half.accepted[static_cast<std::size_t>(row.stage - 1)];
  half.adaptation_events += row.events.size();
}

nlohmann::json half_json(const HalfReport& half) {
  return {{"queries", half.queries},
          {"accepted", half.accepted},
          {"adaptation_events", half.adaptation_events}};
}

}  // namespace

Report build_report(const std::vector<ResultRow>& rows, double qoi_constant) {
  Report report;
  report.queries = rows.size();
  report.qoi_constant = qoi_constant;
  std::array<double, kCsvStages> total_time{};
  double qoi_sum = 0.0;
  double estimate_sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ResultRow& row = rows[i];
    ++report.stages[static_cast<std::size_t>(row.stage - 1)].accepted;
    for (std::size_t s = 0; s < kCsvStages; ++s) {
      if (!row.durations[s]) continue;
      ++report.stages[s].evaluations;
      total_time[s] += *row.durations[s];
    }
    report.adaptation_events += row.events.size();
    for (const auto& e : row.events)
      ++report.events_by_pair[std::to_string(e.source_stage) + ">" + std::to_string(e.target_stage)];
    add_to_half(i < rows.size() / 2 ? report.first_half : report.second_half, row);
    qoi_sum += row.qoi;
    if (row.estimate) estimate_sum += *row.estimate;
  }
  for (std::size_t s = 0; s < kCsvStages; ++s) {
    StageReport& stage = report.stages[s];
    if (!rows.empty()) stage.fraction = static_cast<double>(stage.accepted) / static_cast<double>(rows.size());
    if (stage.evaluations > 0) stage.mean_eval_s = total_time[s] / static_cast<double>(stage.evaluations);
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    report.qoi_mean = qoi_sum / n;
    report.qoi_bound = qoi_constant * estimate_sum / n;
  }
  return report;
}

std::string report_text(const Report& r) {
  std::ostringstream out;
  out << "queries: " << r.queries << '\n';
  out << "stage  accepted  fraction  evaluations  mean_eval_s\n";
  for (std::size_t s = 0; s < kCsvStages; ++s) {
    const StageReport& st = r.stages[s];
    out << "  " << s + 1 << "    " << st.accepted << "  " << format_number(st.fraction) << "  "
        << st.evaluations << "  " << format_number(st.mean_eval_s) << '\n';
  }
  out << "adaptation events: " << r.adaptation_events;
  for (const auto& [pair, count] : r.events_by_pair) out << "  " << pair << ':' << count;
  out << '\n';
  for (const auto* half : {&r.first_half, &r.second_half}) {
    out << (half == &r.first_half ? "first half:  " : "second half: ") << half->queries
        << " queries, accepted by stage";
    for (std::size_t a : half->accepted) out << ' ' << a;
    out << ", " << half->adaptation_events << " adaptation events\n";
  }
  out << "qoi mean: " << format_number(r.qoi_mean) << " +- " << format_number(r.qoi_bound)
      << " (c = " << format_number(r.qoi_constant) << ")\n";
  return out.str();
}

std::string report_json(const Report& r, const std::vector<ResultRow>* rows, int indent) {
  nlohmann::json doc;
  doc["queries"] = r.queries;
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t s = 0; s < kCsvStages; ++s) {
    const StageReport& st = r.stages[s];
    stages.push_back({{"stage", s + 1},
                      {"accepted", st.accepted},
                      {"fraction", st.fraction},
                      {"evaluations", st.evaluations},
                      {"mean_eval_s", st.mean_eval_s}});
  }
  doc["stages"] = stages;
  doc["adaptation_events"] = r.adaptation_events;
  doc["events_by_pair"] = r.events_by_pair;
  doc["first_half"] = half_json(r.first_half);
  doc["second_half"] = half_json(r.second_half);
  doc["qoi_mean"] = r.qoi_mean;
  doc["qoi_bound"] = r.qoi_bound;
  doc["qoi_constant"] = r.qoi_constant;
  if (rows) {
    nlohmann::json list = nlohmann::json::array();
    for (const ResultRow& row : *rows) {
      nlohmann::json item;
      item["query_id"] = row.query_id;
      item["mu"] = row.mu;
      item["stage"] = row.stage;
      item["estimate"] = row.estimate ? nlohmann::json(*row.estimate) : nlohmann::json("ref");
      item["qoi"] = row.qoi;
      nlohmann::json durations = nlohmann::json::array();
      for (const auto& d : row.durations) durations.push_back(d ? nlohmann::json(*d) : nlohmann::json());
      item["durations"] = durations;
      item["basis_n"] = row.basis_n;
      item["ml_n"] = row.ml_n;
      item["events"] = format_events(row.events);
      list.push_back(item);
    }
    doc["rows"] = list;
  }
  return doc.dump(indent);
}

}  // namespace amh::harness
