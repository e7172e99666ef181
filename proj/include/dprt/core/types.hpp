#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dprt {

enum class ActivityType { View, Click, Search, Booking };

const char* to_string(ActivityType t);
std::optional<ActivityType> parse_activity_type(const std::string& s);

/// One clickstream record. listing_id is required for View/Click/Booking;
/// booking_value is present exactly when the event is a Booking.
struct ActivityEvent {
  std::string traveler_id;
  int64_t timestamp_ms = 0;
  ActivityType activity_type = ActivityType::View;
  std::optional<std::string> listing_id;
  std::optional<std::string> destination_id;
  std::optional<double> booking_value;
};

/// Validates the per-event invariants; returns a reason on failure.
std::optional<std::string> validate_event(const ActivityEvent& e);

/// A gap-delimited slice of one traveler's event stream.
struct Session {
  std::string traveler_id;
  std::vector<ActivityEvent> events;
  /// listing ids of View/Click events, in time order
  std::vector<std::string> listing_sequence;
  bool label_booked = false;
  double label_value = 0.0;

  int64_t start_ts() const { return events.front().timestamp_ms; }
  int64_t end_ts() const { return events.back().timestamp_ms; }
};

/// All of one traveler's sessions, chronological by first event.
struct TravelerHistory {
  std::string traveler_id;
  std::vector<Session> sessions;
  /// listing ids across sessions, in time order
  std::vector<std::string> context_listings;
};

struct Listing {
  std::string listing_id;
  double latitude = 0.0;   // degrees, [-90, 90]
  double longitude = 0.0;  // degrees, [-180, 180]
  int64_t view_count = 0;
};

/// One row of a supervised dataset: dense features plus the two targets.
struct LabeledExample {
  std::string traveler_id;
  std::vector<double> features;
  int label_intent = 0;        // 0/1
  double label_value = 0.0;    // 0 when not booked
};

}  // namespace dprt
