#include "bundled/harness/workload.hpp"

#include <charconv>
#include <stdexcept>
#include <vector>

namespace bundled::harness {

std::string_view to_string(StructureKind kind) noexcept {
  switch (kind) {
    case StructureKind::list:
      return "list";
    case StructureKind::skiplist:
      return "skiplist";
    case StructureKind::bst:
      return "bst";
  }
  return "?";
}

std::optional<StructureKind> parse_structure(std::string_view name) noexcept {
  for (auto kind : {StructureKind::list, StructureKind::skiplist, StructureKind::bst}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

Mix parse_mix(std::string_view text) {
  std::vector<unsigned> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dash = text.find('-', start);
    const std::string_view part = text.substr(start, dash == std::string_view::npos ? dash : dash - start);
    unsigned value = 0;
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (part.empty() || ec != std::errc{} || end != part.data() + part.size()) {
      throw std::invalid_argument{"mix must look like U-C-RQ, got '" + std::string{text} + "'"};
    }
    parts.push_back(value);
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  if (parts.size() != 3) throw std::invalid_argument{"mix needs three parts U-C-RQ"};
  if (parts[0] + parts[1] + parts[2] != 100) {
    throw std::invalid_argument{"mix percentages must sum to 100, got '" + std::string{text} + "'"};
  }
  return {parts[0], parts[1], parts[2]};
}

std::string to_string(const Mix& mix) {
  return std::to_string(mix.updates) + "-" + std::to_string(mix.contains) + "-" +
         std::to_string(mix.range_queries);
}

Key default_key_range(StructureKind kind) noexcept {
  return kind == StructureKind::list ? 10'000 : 1'000'000;
}

void WorkloadConfig::check() const {
  if (threads == 0) throw std::invalid_argument{"threads must be at least 1"};
  if (!(duration_s > 0.0) && max_ops_per_thread == 0) {
    throw std::invalid_argument{"duration must be positive"};
  }
  if (mix.updates + mix.contains + mix.range_queries != 100) {
    throw std::invalid_argument{"mix percentages must sum to 100"};
  }
  if (rq_size < 1) throw std::invalid_argument{"range size must be at least 1"};
  if (key_range < 2 * rq_size) throw std::invalid_argument{"key range must be at least twice the range size"};
  if (unsafe_rq && rq_advance) throw std::invalid_argument{"--unsafe-rq and --rq-advance are exclusive"};
  if (cleanup && cleanup_interval.count() <= 0) throw std::invalid_argument{"cleanup interval must be positive"};
  if (epoch_advance_ops == 0) throw std::invalid_argument{"epoch advance threshold must be positive"};
}

}  // namespace bundled::harness
