#include "dprt/core/ndjson.hpp"

#include <fstream>
#include <istream>

#include "dprt/mathutil.hpp"
#include "json.hpp"

namespace dprt {

namespace {
using nlohmann::json;
}

std::optional<ActivityEvent> parse_event_line(const std::string& line,
                                              std::string* error) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    if (error) *error = "not a JSON object";
    return std::nullopt;
  }
  ActivityEvent e;
  try {
    if (!j.contains("traveler_id") || !j["traveler_id"].is_string() ||
        !j.contains("ts") || !j["ts"].is_number_integer() ||
        !j.contains("type") || !j["type"].is_string()) {
      if (error) *error = "missing traveler_id/ts/type";
      return std::nullopt;
    }
    e.traveler_id = j["traveler_id"].get<std::string>();
    e.timestamp_ms = j["ts"].get<int64_t>();
    const auto type = parse_activity_type(j["type"].get<std::string>());
    if (!type) {
      if (error) *error = "unknown type '" + j["type"].get<std::string>() + "'";
      return std::nullopt;
    }
    e.activity_type = *type;
    if (j.contains("listing_id") && j["listing_id"].is_string()) {
      e.listing_id = j["listing_id"].get<std::string>();
    }
    if (j.contains("destination_id") && j["destination_id"].is_string()) {
      e.destination_id = j["destination_id"].get<std::string>();
    }
    if (j.contains("value") && j["value"].is_number()) {
      e.booking_value = j["value"].get<double>();
    }
  } catch (const json::exception& ex) {
    if (error) *error = ex.what();
    return std::nullopt;
  }
  if (auto reason = validate_event(e)) {
    if (error) *error = *reason;
    return std::nullopt;
  }
  return e;
}

std::string event_to_ndjson(const ActivityEvent& e) {
  json j;
  j["traveler_id"] = e.traveler_id;
  j["ts"] = e.timestamp_ms;
  j["type"] = to_string(e.activity_type);
  if (e.listing_id) j["listing_id"] = *e.listing_id;
  if (e.destination_id) j["destination_id"] = *e.destination_id;
  if (e.booking_value) j["value"] = *e.booking_value;
  return j.dump();
}

LogReadResult read_event_log(std::istream& in) {
  LogReadResult r;
  std::string line, err;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++r.total_lines;
    if (auto e = parse_event_line(line, &err)) {
      r.events.push_back(std::move(*e));
    } else {
      ++r.malformed_lines;
      if (r.first_error.empty()) {
        r.first_error = err + " (line " + std::to_string(r.total_lines) + ")";
      }
    }
  }
  if (r.total_lines > 0 &&
      static_cast<double>(r.malformed_lines) > 0.01 * static_cast<double>(r.total_lines)) {
    throw DataError("event log: " + std::to_string(r.malformed_lines) + " of " +
                    std::to_string(r.total_lines) +
                    " lines malformed (> 1%); first: " + r.first_error);
  }
  return r;
}

LogReadResult read_event_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event log '" + path + "'");
  return read_event_log(in);
}

}  // namespace dprt
