#include "dprt/core/features.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace dprt {

std::vector<double> handcrafted_features(const TravelerHistory& history,
                                         int64_t window_ms) {
  if (history.sessions.empty()) {
    throw std::invalid_argument("handcrafted_features: empty history");
  }
  int64_t anchor = history.sessions.front().events.front().timestamp_ms;
  for (const Session& s : history.sessions) {
    anchor = std::max(anchor, s.end_ts());
  }
  const int64_t window_start = anchor - window_ms;

  double views = 0, clicks = 0, searches = 0, sessions_in_window = 0;
  std::unordered_set<std::string> listings, destinations;
  int64_t last_view_ts = -1, last_search_ts = -1;
  double booking_count = 0, booking_value_sum = 0;
  size_t total_events = 0;

  for (const Session& s : history.sessions) {
    bool session_touches_window = false;
    total_events += s.events.size();
    for (const ActivityEvent& e : s.events) {
      if (e.activity_type == ActivityType::Booking) {
        booking_count += 1;
        booking_value_sum += e.booking_value.value_or(0.0);
      }
      if (e.activity_type == ActivityType::View) {
        last_view_ts = std::max(last_view_ts, e.timestamp_ms);
      }
      if (e.activity_type == ActivityType::Search) {
        last_search_ts = std::max(last_search_ts, e.timestamp_ms);
      }
      if (e.timestamp_ms < window_start) continue;
      session_touches_window = true;
      switch (e.activity_type) {
        case ActivityType::View: views += 1; break;
        case ActivityType::Click: clicks += 1; break;
        case ActivityType::Search: searches += 1; break;
        case ActivityType::Booking: break;
      }
      if ((e.activity_type == ActivityType::View ||
           e.activity_type == ActivityType::Click) &&
          e.listing_id.has_value()) {
        listings.insert(*e.listing_id);
      }
      if (e.destination_id.has_value()) destinations.insert(*e.destination_id);
    }
    if (session_touches_window) sessions_in_window += 1;
  }

  constexpr double kMsPerHour = 3600.0 * 1000.0;
  std::vector<double> f(kHandcraftedDim, 0.0);
  f[0] = views;
  f[1] = clicks;
  f[2] = searches;
  f[3] = static_cast<double>(listings.size());
  f[4] = static_cast<double>(destinations.size());
  f[5] = sessions_in_window;
  f[6] = last_view_ts < 0 ? 0.0 : static_cast<double>(anchor - last_view_ts) / kMsPerHour;
  f[7] = last_search_ts < 0 ? 0.0 : static_cast<double>(anchor - last_search_ts) / kMsPerHour;
  f[8] = static_cast<double>(total_events) / static_cast<double>(history.sessions.size());
  f[9] = booking_count;
  f[10] = booking_value_sum;
  return f;
}

const std::vector<std::string>& handcrafted_feature_names() {
  static const std::vector<std::string> names = {
      "views_7d",
      "clicks_7d",
      "searches_7d",
      "distinct_listings_7d",
      "distinct_destinations_7d",
      "sessions_7d",
      "hours_since_last_view",
      "hours_since_last_search",
      "mean_session_length",
      "booking_count",
      "booking_value_sum",
  };
  return names;
}

}  // namespace dprt
