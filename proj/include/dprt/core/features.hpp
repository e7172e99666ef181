#pragma once

#include <string>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt {

constexpr int64_t kFeatureWindowMs = 7LL * 24 * 3600 * 1000;

/// Number of handcrafted features; see handcrafted_feature_names() for the
/// fixed order.
constexpr int kHandcraftedDim = 11;

/// Documented feature order:
///   0 views_7d                views in the window
///   1 clicks_7d               clicks in the window
///   2 searches_7d             searches in the window
///   3 distinct_listings_7d    distinct View/Click listing ids in the window
///   4 distinct_destinations_7d distinct destination ids in the window
///   5 sessions_7d             sessions with at least one event in the window
///   6 hours_since_last_view   anchor minus last view, hours (0 if none)
///   7 hours_since_last_search anchor minus last search, hours (0 if none)
///   8 mean_session_length     mean events per session, whole history
///   9 booking_count           bookings in the whole history
///  10 booking_value_sum       summed booking value in the whole history
///
/// The window covers the window_ms milliseconds up to and including the
/// traveler's latest event (the anchor). Counts (0-5, 9, 10) are
/// permutation-invariant; recency features (6, 7) are order-sensitive.
std::vector<double> handcrafted_features(const TravelerHistory& history,
                                         int64_t window_ms = kFeatureWindowMs);

const std::vector<std::string>& handcrafted_feature_names();

}  // namespace dprt
