#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt {

/// Parse one NDJSON event record. Field names: traveler_id, ts, type,
/// listing_id, destination_id, value. Unknown fields are ignored. Returns
/// nullopt and fills *error for malformed lines.
std::optional<ActivityEvent> parse_event_line(const std::string& line,
                                              std::string* error);

std::string event_to_ndjson(const ActivityEvent& e);

struct LogReadResult {
  std::vector<ActivityEvent> events;
  size_t total_lines = 0;
  size_t malformed_lines = 0;
  std::string first_error;
};

/// Read a whole event log. Malformed lines are counted and skipped; the read
/// fails with DataError only when they exceed 1% of non-empty lines.
LogReadResult read_event_log(std::istream& in);
LogReadResult read_event_log_file(const std::string& path);

}  // namespace dprt
