#pragma once

#include <list>
#include <optional>
#include <string>
#include <unordered_map>

#include "dprt/pipeline/pipeline.hpp"

namespace dprt::pipe {

/// Per-event scorer over an NDJSON stream. State per traveler is the session
/// list grown incrementally with the same gap rule as batch sessionization;
/// one scored line is emitted per event. Travelers beyond the cap are
/// evicted least-recently-updated; an evicted traveler who returns is
/// rebuilt from their subsequent events only.
class StreamScorer {
 public:
  explicit StreamScorer(ModelBundle bundle, size_t max_travelers = 100000);

  /// Returns the scored NDJSON line, or nullopt with *error set when the
  /// line is malformed or out of order (the stream keeps going).
  std::optional<std::string> process_line(const std::string& line,
                                          std::string* error);

  /// Score after applying one parsed event.
  ScoredTraveler process_event(const ActivityEvent& event);

  size_t tracked_travelers() const { return states_.size(); }

 private:
  struct TravelerState {
    TravelerHistory history;
    int64_t last_ts = INT64_MIN;
    std::list<std::string>::iterator lru_pos;
  };

  TravelerState& touch(const std::string& traveler_id);

  ModelBundle bundle_;
  size_t max_travelers_;
  std::unordered_map<std::string, TravelerState> states_;
  std::list<std::string> lru_;  // front = most recently updated
};

std::string scored_to_ndjson(const ScoredTraveler& s);

}  // namespace dprt::pipe
