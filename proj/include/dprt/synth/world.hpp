#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

namespace dprt::synth {

enum class BookingRule {
  Linear,     // p = sigmoid(scale * w.zbar + bias)
  Nonlinear,  // p = sigmoid(scale * zbar[0]*zbar[1] + bias)
};

const char* to_string(BookingRule r);

/// A seeded world: destinations carry latent centers and geo coordinates,
/// listings cluster around their destination in both spaces, travelers run
/// Markov browse sessions inside (mostly) their home destination across two
/// adjacent periods, and book per period with a probability driven by the
/// latent vectors of what they viewed.
struct SyntheticWorldConfig {
  int n_destinations = 20;
  int listings_per_destination = 25;
  int latent_dim = 4;
  int n_travelers = 1000;
  double mean_sessions_per_traveler = 2.2;
  double mean_session_length = 8.0;
  int max_session_length = 30;
  BookingRule rule = BookingRule::Linear;
  double noise = 0.35;  // listing latent jitter around the destination center
  double session_explore_prob = 0.15;   // session starts outside the home destination
  double mid_session_drift_prob = 0.10; // per-step destination hop
  uint64_t seed = 1;
  int64_t start_ts_ms = 1600000000000LL;
  int64_t period_ms = 7LL * 24 * 3600 * 1000;  // two periods are generated
};

/// The booking probability the generator applies to a mean viewed-latent
/// vector. Exposed so tests can recompute ground truth independently.
double true_booking_probability(BookingRule rule, std::span<const double> zbar,
                                std::span<const double> w, double scale,
                                double bias);

struct WorldSummary {
  int64_t n_events = 0;
  int64_t n_bookings = 0;
  int64_t n_traveler_periods = 0;
  double mean_true_probability = 0.0;
  int64_t boundary_ms = 0;  // start of the second period
};

/// Writes the NDJSON event log and the ground-truth NDJSON (meta,
/// destination, listing and traveler_period records). Byte-identical for a
/// fixed config.
WorldSummary generate_world(const SyntheticWorldConfig& config,
                            std::ostream& events_out, std::ostream& truth_out);

WorldSummary generate_world_files(const SyntheticWorldConfig& config,
                                  const std::string& events_path,
                                  const std::string& truth_path);

}  // namespace dprt::synth
