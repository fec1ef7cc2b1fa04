#include "amh/harness/results.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "amh/errors.hpp"

namespace amh::harness {

namespace {

std::vector<std::string> split(const std::string& text, char separator) {
  std::vector<std::string> parts;
  std::string::size_type start = 0;
  while (true) {
    const auto end = text.find(separator, start);
    parts.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

std::optional<double> parse_double(const std::string& field) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

template <typename T>
std::optional<T> parse_unsigned(const std::string& field) {
  if (field.empty()) return std::nullopt;
  T value{};
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

bool ResultRow::same_except_durations(const ResultRow& other) const {
  return query_id == other.query_id && mu == other.mu && stage == other.stage &&
         estimate == other.estimate && qoi == other.qoi && basis_n == other.basis_n &&
         ml_n == other.ml_n && events == other.events;
}

CsvError::CsvError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

std::string format_number(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  detail::require(ec == std::errc(), "format_number: buffer too small");
  return std::string(buffer, ptr);
}

std::string csv_header(std::size_t dimension) {
  std::string header = "query_id";
  for (std::size_t q = 1; q <= dimension; ++q) header += ",mu_" + std::to_string(q);
  header += ",stage,estimate,qoi,dur_s1,dur_s2,dur_s3,basis_n,ml_n,events";
  return header;
}

std::string format_events(const std::vector<AdaptationEvent>& events) {
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(events[i].source_stage) + '>' + std::to_string(events[i].target_stage);
  }
  return out;
}

std::string format_row(const ResultRow& row) {
  std::string line = std::to_string(row.query_id);
  for (double m : row.mu) line += ',' + format_number(m);
  line += ',' + std::to_string(row.stage);
  line += ',' + (row.estimate ? format_number(*row.estimate) : std::string("ref"));
  line += ',' + format_number(row.qoi);
  for (const auto& d : row.durations) line += ',' + (d ? format_number(*d) : std::string());
  line += ',' + std::to_string(row.basis_n);
  line += ',' + std::to_string(row.ml_n);
  line += ',' + format_events(row.events);
  return line;
}

std::vector<ResultRow> parse_results(std::istream& in, std::size_t* dimension) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError(1, "missing header");
  const std::vector<std::string> header = split(trim_cr(line), ',');
  // query_id + Q mu columns + 9 trailing columns
  if (header.size() < 11 || header.front() != "query_id")
    throw CsvError(1, "header does not match the results schema");
  const std::size_t q = header.size() - 10;
  if (csv_header(q) != trim_cr(line)) throw CsvError(1, "header does not match the results schema");
  if (dimension) *dimension = q;

  std::vector<ResultRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    line = trim_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != header.size()) {
      throw CsvError(number, "expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(f.size()));
    }
    ResultRow row;
    std::size_t i = 0;
    const auto id = parse_unsigned<std::uint64_t>(f[i++]);
    if (!id) throw CsvError(number, "query_id is not an unsigned integer");
    row.query_id = *id;
    for (std::size_t k = 0; k < q; ++k) {
      const auto m = parse_double(f[i++]);
      if (!m) throw CsvError(number, "mu_" + std::to_string(k + 1) + " is not a finite number");
      row.mu.push_back(*m);
    }
    const auto stage = parse_unsigned<int>(f[i++]);
    if (!stage || *stage < 1 || *stage > static_cast<int>(kCsvStages))
      throw CsvError(number, "stage must be 1, 2 or 3");
    row.stage = *stage;
    const std::string& est = f[i++];
    if (est != "ref") {
      const auto e = parse_double(est);
      if (!e || *e < 0.0) throw CsvError(number, "estimate must be `ref` or a non-negative number");
      row.estimate = *e;
    }
    const auto qoi = parse_double(f[i++]);
    if (!qoi) throw CsvError(number, "qoi is not a finite number");
    row.qoi = *qoi;
    for (std::size_t s = 0; s < kCsvStages; ++s) {
      const std::string& field = f[i++];
      if (field.empty()) continue;
      const auto d = parse_double(field);
      if (!d || *d < 0.0) throw CsvError(number, "dur_s" + std::to_string(s + 1) + " is invalid");
      row.durations[s] = *d;
    }
    if (!row.durations[static_cast<std::size_t>(row.stage - 1)])
      throw CsvError(number, "accepted stage has no duration");
    const auto basis_n = parse_unsigned<std::size_t>(f[i++]);
    const auto ml_n = parse_unsigned<std::size_t>(f[i++]);
    if (!basis_n || !ml_n) throw CsvError(number, "basis_n and ml_n must be unsigned integers");
    row.basis_n = *basis_n;
    row.ml_n = *ml_n;
    const std::string& events = f[i++];
    if (!events.empty()) {
      for (const std::string& item : split(events, ';')) {
        const auto gt = item.find('>');
        if (gt == std::string::npos) throw CsvError(number, "event '" + item + "' is not source>target");
        const auto source = parse_unsigned<int>(item.substr(0, gt));
        const auto target = parse_unsigned<int>(item.substr(gt + 1));
        if (!source || !target || *source < 1 || *target < 1)
          throw CsvError(number, "event '" + item + "' is not source>target");
        row.events.push_back({*source, *target});
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> read_results(const std::string& path, std::size_t* dimension) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read results file '" + path + "'");
  return parse_results(in, dimension);
}

struct ResultWriter::Impl {
  std::ofstream out;
  std::string path;
};

ResultWriter::ResultWriter(const std::string& path, std::size_t dimension)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->out.open(path, std::ios::out | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot open '" + path + "' for writing");
  impl_->out << csv_header(dimension) << '\n';
}

ResultWriter::~ResultWriter() = default;

void ResultWriter::write(const ResultRow& row) {
  impl_->out << format_row(row) << '\n';
  if (!impl_->out) throw IoError("write to '" + impl_->path + "' failed");
}

void ResultWriter::close() {
  impl_->out.flush();
  if (!impl_->out) throw IoError("write to '" + impl_->path + "' failed");
  impl_->out.close();
}

void write_results(const std::string& path, std::size_t dimension,
                   const std::vector<ResultRow>& rows) {
  ResultWriter writer(path, dimension);
  for (const auto& row : rows) writer.write(row);
  writer.close();
}

}  // namespace amh::harness
