#include "dprt/pipeline/stream.hpp"

#include "json.hpp"

namespace dprt::pipe {

StreamScorer::StreamScorer(ModelBundle bundle, size_t max_travelers)
    : bundle_(std::move(bundle)), max_travelers_(std::max<size_t>(1, max_travelers)) {}

StreamScorer::TravelerState& StreamScorer::touch(const std::string& traveler_id) {
  auto it = states_.find(traveler_id);
  if (it != states_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.lru_pos);
    return it->second;
  }
  if (states_.size() >= max_travelers_) {
    const std::string& victim = lru_.back();
    states_.erase(victim);
    lru_.pop_back();
  }
  lru_.push_front(traveler_id);
  TravelerState& st = states_[traveler_id];
  st.history.traveler_id = traveler_id;
  st.lru_pos = lru_.begin();
  return st;
}

ScoredTraveler StreamScorer::process_event(const ActivityEvent& event) {
  if (auto reason = validate_event(event)) {
    throw DataError("invalid event: " + *reason);
  }
  TravelerState& st = touch(event.traveler_id);
  if (event.timestamp_ms < st.last_ts) {
    throw DataError("non-monotonic timestamp for traveler '" + event.traveler_id +
                    "': " + std::to_string(event.timestamp_ms) + " after " +
                    std::to_string(st.last_ts));
  }
  const bool new_session = st.history.sessions.empty() ||
                           event.timestamp_ms - st.last_ts >= bundle_.session_gap_ms;
  if (new_session) {
    st.history.sessions.emplace_back();
    st.history.sessions.back().traveler_id = event.traveler_id;
  }
  Session& s = st.history.sessions.back();
  s.events.push_back(event);
  if ((event.activity_type == ActivityType::View ||
       event.activity_type == ActivityType::Click) &&
      event.listing_id.has_value()) {
    s.listing_sequence.push_back(*event.listing_id);
    st.history.context_listings.push_back(*event.listing_id);
  }
  if (event.activity_type == ActivityType::Booking) {
    s.label_booked = true;
    s.label_value += event.booking_value.value_or(0.0);
  }
  st.last_ts = event.timestamp_ms;
  return score_history(bundle_, st.history);
}

std::optional<std::string> StreamScorer::process_line(const std::string& line,
                                                      std::string* error) {
  std::string parse_error;
  const auto event = parse_event_line(line, &parse_error);
  if (!event) {
    if (error) *error = "malformed line: " + parse_error;
    return std::nullopt;
  }
  try {
    return scored_to_ndjson(process_event(*event));
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return std::nullopt;
  }
}

std::string scored_to_ndjson(const ScoredTraveler& s) {
  nlohmann::json j;
  j["traveler_id"] = s.traveler_id;
  j["r"] = s.r;
  j["m"] = s.m;
  j["u"] = s.u;
  j["bucket"] = s.bucket;
  return j.dump();
}

}  // namespace dprt::pipe
