#pragma once

// Results CSV: one row per query.
//
//   query_id,mu_1,...,mu_Q,stage,estimate,qoi,dur_s1,dur_s2,dur_s3,basis_n,ml_n,events
//
// `estimate` is a decimal or the literal `ref`; an empty duration means the
// stage was not attempted; `events` lists source>target pairs separated by `;`.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amh/hierarchy.hpp"

namespace amh::harness {

inline constexpr std::size_t kCsvStages = 3;

struct ResultRow {
  std::uint64_t query_id = 0;
  std::vector<double> mu;
  int stage = 0;
  std::optional<double> estimate;  ///< nullopt is `ref`
  double qoi = 0.0;
  std::array<std::optional<double>, kCsvStages> durations{};
  std::size_t basis_n = 0;
  std::size_t ml_n = 0;
  std::vector<AdaptationEvent> events;

  bool operator==(const ResultRow&) const = default;
  /// Equality ignoring the duration columns.
  bool same_except_durations(const ResultRow& other) const;
};

/// Malformed CSV input; `line` is 1-based and counts the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Shortest decimal that parses back to the same double.
std::string format_number(double value);

std::string csv_header(std::size_t dimension);
std::string format_row(const ResultRow& row);
std::string format_events(const std::vector<AdaptationEvent>& events);

/// Parses a whole results file. `dimension` receives Q from the header.
std::vector<ResultRow> parse_results(std::istream& in, std::size_t* dimension = nullptr);
/// Throws IoError if unreadable, CsvError if malformed.
std::vector<ResultRow> read_results(const std::string& path, std::size_t* dimension = nullptr);

/// Writes the header and rows; throws IoError on failure.
void write_results(const std::string& path, std::size_t dimension,
                   const std::vector<ResultRow>& rows);

/// Streams rows to a file as they are produced.
class ResultWriter {
 public:
  ResultWriter(const std::string& path, std::size_t dimension);
  ~ResultWriter();
  ResultWriter(const ResultWriter&) = delete;
  ResultWriter& operator=(const ResultWriter&) = delete;

  void write(const ResultRow& row);
  /// Flushes and throws IoError if any write failed.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace amh::harness
