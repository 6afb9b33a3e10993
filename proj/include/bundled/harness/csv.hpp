#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bundled/harness/runner.hpp"

namespace bundled::harness {

inline constexpr std::string_view kCsvHeader =
    "ds,workload,threads,rq_size,key_range,trial,duration_s,total_ops,updates,contains,rqs,throughput_mops,"
    "violations";

struct CsvRow {
  std::string ds;
  std::string workload;
  std::size_t threads = 0;
  Key rq_size = 0;
  Key key_range = 0;
  std::size_t trial = 0;
  double duration_s = 0.0;
  std::uint64_t total_ops = 0;
  std::uint64_t updates = 0;
  std::uint64_t contains = 0;
  std::uint64_t rqs = 0;
  double throughput_mops = 0.0;
  std::uint64_t violations = 0;

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

/// `duration_s` is the measured run time; violations are 0 for runs that
/// were not validated.
[[nodiscard]] CsvRow to_csv_row(const RunStats& stats);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const CsvRow& row);

/// Appends one row per run, writing the header first when the file is new
/// or empty. Throws std::runtime_error on I/O failure.
void emit_csv(const std::vector<RunStats>& runs, const std::filesystem::path& path);

/// Parses a file produced by emit_csv. Throws std::runtime_error when the
/// header or a row does not match the schema.
[[nodiscard]] std::vector<CsvRow> read_csv(std::istream& in);

}  // namespace bundled::harness
