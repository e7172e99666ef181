#include "dprt/core/sessionize.hpp"

#include <unordered_map>

#include "dprt/mathutil.hpp"

namespace dprt {

const char* to_string(ActivityType t) {
  switch (t) {
    case ActivityType::View: return "view";
    case ActivityType::Click: return "click";
    case ActivityType::Search: return "search";
    case ActivityType::Booking: return "booking";
  }
  return "?";
}

std::optional<ActivityType> parse_activity_type(const std::string& s) {
  if (s == "view") return ActivityType::View;
  if (s == "click") return ActivityType::Click;
  if (s == "search") return ActivityType::Search;
  if (s == "booking") return ActivityType::Booking;
  return std::nullopt;
}

std::optional<std::string> validate_event(const ActivityEvent& e) {
  if (e.traveler_id.empty()) return "empty traveler_id";
  const bool needs_listing = e.activity_type == ActivityType::View ||
                             e.activity_type == ActivityType::Click ||
                             e.activity_type == ActivityType::Booking;
  if (needs_listing && !e.listing_id.has_value()) {
    return std::string("missing listing_id for ") + to_string(e.activity_type);
  }
  if (e.activity_type == ActivityType::Booking) {
    if (!e.booking_value.has_value()) return "booking without value";
    if (*e.booking_value < 0.0) return "negative booking value";
  } else if (e.booking_value.has_value()) {
    return std::string("value on non-booking event ") + to_string(e.activity_type);
  }
  return std::nullopt;
}

namespace {

// Per-traveler buckets in first-appearance order.
std::vector<std::vector<ActivityEvent>> group_by_traveler(
    const std::vector<ActivityEvent>& events) {
  std::vector<std::vector<ActivityEvent>> groups;
  std::unordered_map<std::string, size_t> index;
  for (const ActivityEvent& e : events) {
    auto [it, inserted] = index.try_emplace(e.traveler_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(e);
  }
  return groups;
}

void append_to_session(Session& s, const ActivityEvent& e) {
  if ((e.activity_type == ActivityType::View ||
       e.activity_type == ActivityType::Click) &&
      e.listing_id.has_value()) {
    s.listing_sequence.push_back(*e.listing_id);
  }
  if (e.activity_type == ActivityType::Booking) {
    s.label_booked = true;
    s.label_value += e.booking_value.value_or(0.0);
  }
  s.events.push_back(e);
}

}  // namespace

std::vector<Session> sessionize(const std::vector<ActivityEvent>& events,
                                int64_t gap_ms) {
  if (gap_ms <= 0) throw std::invalid_argument("sessionize: gap_ms must be positive");
  std::vector<Session> sessions;
  for (const auto& group : group_by_traveler(events)) {
    for (size_t i = 0; i < group.size(); ++i) {
      const ActivityEvent& e = group[i];
      if (i > 0 && e.timestamp_ms < group[i - 1].timestamp_ms) {
        throw DataError("non-monotonic timestamps for traveler '" +
                        e.traveler_id + "' at ts " +
                        std::to_string(e.timestamp_ms));
      }
      const bool new_session =
          i == 0 || e.timestamp_ms - group[i - 1].timestamp_ms >= gap_ms;
      if (new_session) {
        sessions.emplace_back();
        sessions.back().traveler_id = e.traveler_id;
      }
      append_to_session(sessions.back(), e);
    }
  }
  // regroup so each traveler's sessions are contiguous
  std::vector<Session> ordered;
  ordered.reserve(sessions.size());
  std::unordered_map<std::string, std::vector<size_t>> per_traveler;
  std::vector<std::string> traveler_order;
  for (size_t i = 0; i < sessions.size(); ++i) {
    auto [it, inserted] =
        per_traveler.try_emplace(sessions[i].traveler_id);
    if (inserted) traveler_order.push_back(sessions[i].traveler_id);
    it->second.push_back(i);
  }
  for (const std::string& t : traveler_order) {
    for (size_t i : per_traveler[t]) ordered.push_back(std::move(sessions[i]));
  }
  return ordered;
}

std::vector<TravelerHistory> build_histories(const std::vector<Session>& sessions) {
  std::vector<TravelerHistory> histories;
  std::unordered_map<std::string, size_t> index;
  for (const Session& s : sessions) {
    auto [it, inserted] = index.try_emplace(s.traveler_id, histories.size());
    if (inserted) {
      histories.emplace_back();
      histories.back().traveler_id = s.traveler_id;
    }
    TravelerHistory& h = histories[it->second];
    h.context_listings.insert(h.context_listings.end(),
                              s.listing_sequence.begin(),
                              s.listing_sequence.end());
    h.sessions.push_back(s);
  }
  return histories;
}

std::vector<ActivityEvent> filter_bot_travelers(
    const std::vector<ActivityEvent>& events, int64_t max_events_per_hour) {
  constexpr int64_t kHourMs = 3600 * 1000;
  std::unordered_map<std::string, bool> is_bot;
  for (const auto& group : group_by_traveler(events)) {
    bool bot = false;
    size_t lo = 0;
    for (size_t hi = 0; hi < group.size() && !bot; ++hi) {
      while (group[hi].timestamp_ms - group[lo].timestamp_ms >= kHourMs) ++lo;
      if (static_cast<int64_t>(hi - lo + 1) > max_events_per_hour) bot = true;
    }
    is_bot[group.front().traveler_id] = bot;
  }
  std::vector<ActivityEvent> kept;
  kept.reserve(events.size());
  for (const ActivityEvent& e : events) {
    if (!is_bot[e.traveler_id]) kept.push_back(e);
  }
  return kept;
}

}  // namespace dprt
