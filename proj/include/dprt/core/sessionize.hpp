#pragma once

#include <cstdint>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt {

constexpr int64_t kDefaultSessionGapMs = 30 * 60 * 1000;

/// Split an event stream into per-traveler sessions at inactivity gaps of
/// gap_ms or more. Events may interleave travelers but must be
/// time-ordered within each traveler; violations raise DataError.
/// Sessions come back grouped per traveler in first-appearance order.
std::vector<Session> sessionize(const std::vector<ActivityEvent>& events,
                                int64_t gap_ms = kDefaultSessionGapMs);

/// Group sessions into one history per traveler (first-appearance order).
std::vector<TravelerHistory> build_histories(const std::vector<Session>& sessions);

/// Drop every traveler that produced more than max_events_per_hour events
/// inside any sliding one-hour window. Stands in for upstream bot removal.
std::vector<ActivityEvent> filter_bot_travelers(
    const std::vector<ActivityEvent>& events, int64_t max_events_per_hour = 500);

}  // namespace dprt
