#include "bundled/harness/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bundled::harness {

namespace {

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) throw std::runtime_error{"cannot format number"};
  return {buffer.data(), end};
}

template <class T>
T parse_field(std::string_view field, std::size_t line) {
  T value{};
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || end != field.data() + field.size()) {
    throw std::runtime_error{"csv line " + std::to_string(line) + ": bad numeric field '" + std::string{field} + "'"};
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    fields.push_back(text.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) return fields;
    start = comma + 1;
  }
}

}  // namespace

CsvRow to_csv_row(const RunStats& stats) {
  const auto& config = stats.config;
  return {std::string{to_string(config.ds)},
          to_string(config.mix),
          config.threads,
          config.rq_size,
          config.key_range,
          stats.trial,
          stats.elapsed_s,
          stats.total_ops,
          stats.updates,
          stats.contains,
          stats.rqs,
          stats.throughput_mops,
          stats.violations()};
}

void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const CsvRow& row) {
  out << row.ds << ',' << row.workload << ',' << row.threads << ',' << row.rq_size << ',' << row.key_range << ','
      << row.trial << ',' << format_double(row.duration_s) << ',' << row.total_ops << ',' << row.updates << ','
      << row.contains << ',' << row.rqs << ',' << format_double(row.throughput_mops) << ',' << row.violations
      << '\n';
}

void emit_csv(const std::vector<RunStats>& runs, const std::filesystem::path& path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  std::ofstream out{path, std::ios::app};
  if (!out) throw std::runtime_error{"cannot open " + path.string() + " for appending"};
  if (fresh) write_csv_header(out);
  for (const auto& run : runs) write_csv_row(out, to_csv_row(run));
  out.flush();
  if (!out) throw std::runtime_error{"write to " + path.string() + " failed"};
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error{"csv header does not match schema"};
  std::vector<CsvRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 13) throw std::runtime_error{"csv line " + std::to_string(number) + ": expected 13 fields"};
    rows.push_back({std::string{f[0]}, std::string{f[1]}, parse_field<std::size_t>(f[2], number),
                    parse_field<Key>(f[3], number), parse_field<Key>(f[4], number),
                    parse_field<std::size_t>(f[5], number), parse_field<double>(f[6], number),
                    parse_field<std::uint64_t>(f[7], number), parse_field<std::uint64_t>(f[8], number),
                    parse_field<std::uint64_t>(f[9], number), parse_field<std::uint64_t>(f[10], number),
                    parse_field<double>(f[11], number), parse_field<std::uint64_t>(f[12], number)});
  }
  return rows;
}

}  // namespace bundled::harness
