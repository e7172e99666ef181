#include "dprt/synth/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "dprt/core/ndjson.hpp"
#include "dprt/core/types.hpp"
#include "dprt/mathutil.hpp"
#include "json.hpp"

namespace dprt::synth {

const char* to_string(BookingRule r) {
  return r == BookingRule::Linear ? "linear" : "nonlinear";
}

double true_booking_probability(BookingRule rule, std::span<const double> zbar,
                                std::span<const double> w, double scale,
                                double bias) {
  if (rule == BookingRule::Linear) {
    return stable_sigmoid(scale * dot(zbar, w) + bias);
  }
  if (zbar.size() < 2) {
    throw std::invalid_argument("nonlinear rule needs latent_dim >= 2");
  }
  return stable_sigmoid(scale * zbar[0] * zbar[1] + bias);
}

namespace {

constexpr double kLinearScale = 3.0;
constexpr double kLinearBias = -1.1;
constexpr double kNonlinearScale = 3.0;
constexpr double kNonlinearBias = -0.9;


constexpr double kSearchProb = 0.7;
constexpr double kClickProb = 0.3;
constexpr int64_t kSessionMarginMs = 4 * 3600 * 1000;

std::string dest_id(int d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "D%03d", d);
  return buf;
}

std::string listing_id(int l) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "L%05d", l);
  return buf;
}

std::string traveler_id(int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "T%06d", t);
  return buf;
}

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

WorldSummary generate_world(const SyntheticWorldConfig& config,
                            std::ostream& events_out, std::ostream& truth_out) {
  if (config.n_destinations < 1 || config.listings_per_destination < 1 ||
      config.latent_dim < 1 || config.n_travelers < 1 ||
      config.mean_sessions_per_traveler < 1.0 || config.mean_session_length < 1.0 ||
      config.max_session_length < 1 || config.noise < 0.0 ||
      config.period_ms <= kSessionMarginMs) {
    throw std::invalid_argument("generate_world: invalid config");
  }
  if (config.rule == BookingRule::Nonlinear && config.latent_dim < 2) {
    throw std::invalid_argument("generate_world: nonlinear rule needs latent_dim >= 2");
  }
  Rng rng(config.seed);
  const int q = config.latent_dim;
  const int D = config.n_destinations;
  const int L = D * config.listings_per_destination;

  auto unit_normal_vec = [&](int dim) {
    Vec v(dim);
    double norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    return v;
  };
  const Vec w_book = unit_normal_vec(q);
  const Vec w_value = unit_normal_vec(q);

  struct Destination {
    Vec latent;
    double lat, lon;
  };
  std::vector<Destination> dests(D);
  for (Destination& d : dests) {
    d.latent.resize(q);
    for (double& x : d.latent) x = rng.normal();
    d.lat = rng.uniform(25.0, 48.0);
    d.lon = rng.uniform(-120.0, -70.0);
  }

  struct WorldListing {
    int dest;
    Vec latent;
    double lat, lon;
  };
  std::vector<WorldListing> listings(L);
  for (int l = 0; l < L; ++l) {
    WorldListing& x = listings[l];
    x.dest = l / config.listings_per_destination;
    x.latent.resize(q);
    for (int k = 0; k < q; ++k) {
      x.latent[k] = dests[x.dest].latent[k] + config.noise * rng.normal();
    }
    x.lat = std::clamp(dests[x.dest].lat + 0.25 * rng.normal(), -90.0, 90.0);
    x.lon = std::clamp(dests[x.dest].lon + 0.25 * rng.normal(), -180.0, 180.0);
  }

  const double scale = config.rule == BookingRule::Linear ? kLinearScale : kNonlinearScale;
  const double bias = config.rule == BookingRule::Linear ? kLinearBias : kNonlinearBias;

  std::vector<ActivityEvent> events;
  struct TravelerPeriodTruth {
    std::string traveler;
    int period;
    double p_book;
    bool booked;
    Vec zbar;
  };
  std::vector<TravelerPeriodTruth> truth_rows;

  for (int t = 0; t < config.n_travelers; ++t) {
    const std::string tid = traveler_id(t);
    const int home = static_cast<int>(rng.below(D));
    const int n_sessions = 1 + rng.poisson(config.mean_sessions_per_traveler - 1.0);
    std::vector<std::pair<int64_t, int>> session_starts;  // (ts, period)
    for (int s = 0; s < n_sessions; ++s) {
      const int period = static_cast<int>(rng.below(2));
      const int64_t lo = config.start_ts_ms + period * config.period_ms;
      const int64_t span = config.period_ms - kSessionMarginMs;
      const int64_t ts = lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(span)));
      session_starts.emplace_back(ts, period);
    }
    std::sort(session_starts.begin(), session_starts.end());

    std::vector<const WorldListing*> viewed[2];
    int64_t last_ts[2] = {0, 0};
    int last_listing[2] = {-1, -1};
    for (const auto& [start, period] : session_starts) {
      int dest = home;
      if (rng.real01() < config.session_explore_prob) dest = static_cast<int>(rng.below(D));
      int len = 1 + rng.poisson(config.mean_session_length - 1.0);
      len = std::min(len, config.max_session_length);
      int64_t ts = start;
      if (rng.real01() < kSearchProb) {
        ActivityEvent e;
        e.traveler_id = tid;
        e.timestamp_ms = ts;
        e.activity_type = ActivityType::Search;
        e.destination_id = dest_id(dest);
        events.push_back(std::move(e));
        ts += 10000 + static_cast<int64_t>(rng.below(50000));
      }
      for (int step = 0; step < len; ++step) {
        if (rng.real01() < config.mid_session_drift_prob) dest = static_cast<int>(rng.below(D));
        const int l = dest * config.listings_per_destination +
                      static_cast<int>(rng.below(config.listings_per_destination));
        ActivityEvent view;
        view.traveler_id = tid;
        view.timestamp_ms = ts;
        view.activity_type = ActivityType::View;
        view.listing_id = listing_id(l);
        view.destination_id = dest_id(listings[l].dest);
        events.push_back(std::move(view));
        viewed[period].push_back(&listings[l]);
        last_ts[period] = std::max(last_ts[period], ts);
        last_listing[period] = l;
        if (rng.real01() < kClickProb) {
          ActivityEvent click;
          click.traveler_id = tid;
          click.timestamp_ms = ts + 2000 + static_cast<int64_t>(rng.below(8000));
          click.activity_type = ActivityType::Click;
          click.listing_id = listing_id(l);
          click.destination_id = dest_id(listings[l].dest);
          last_ts[period] = std::max(last_ts[period], click.timestamp_ms);
          events.push_back(std::move(click));
        }
        ts += 30000 + static_cast<int64_t>(rng.below(270000));
      }
    }

    for (int period = 0; period < 2; ++period) {
      if (viewed[period].empty()) continue;
      Vec zbar(q, 0.0);
      for (const WorldListing* l : viewed[period]) {
        for (int k = 0; k < q; ++k) zbar[k] += l->latent[k];
      }
      for (double& z : zbar) z /= static_cast<double>(viewed[period].size());
      const double p = true_booking_probability(config.rule, zbar, w_book, scale, bias);
      const bool booked = rng.real01() < p;
      if (booked) {
        const int64_t period_end =
            config.start_ts_ms + (period + 1) * config.period_ms;
        ActivityEvent b;
        b.traveler_id = tid;
        b.timestamp_ms = std::min(
            last_ts[period] + 300000 + static_cast<int64_t>(rng.below(1500000)),
            period_end - 1000);
        b.activity_type = ActivityType::Booking;
        b.listing_id = listing_id(last_listing[period]);
        b.destination_id = dest_id(listings[last_listing[period]].dest);
        b.booking_value = round_cents(
            120.0 * std::exp(0.35 * dot(zbar, w_value) + 0.25 * rng.normal()));
        events.push_back(std::move(b));
      }
      truth_rows.push_back({tid, period, p, booked, zbar});
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const ActivityEvent& a, const ActivityEvent& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });

  WorldSummary summary;
  summary.boundary_ms = config.start_ts_ms + config.period_ms;
  summary.n_events = static_cast<int64_t>(events.size());
  for (const ActivityEvent& e : events) {
    if (e.activity_type == ActivityType::Booking) ++summary.n_bookings;
  }
  summary.n_traveler_periods = static_cast<int64_t>(truth_rows.size());
  for (const TravelerPeriodTruth& r : truth_rows) {
    summary.mean_true_probability += r.p_book;
  }
  if (!truth_rows.empty()) {
    summary.mean_true_probability /= static_cast<double>(truth_rows.size());
  }

  for (const ActivityEvent& e : events) events_out << event_to_ndjson(e) << '\n';

  using nlohmann::json;
  {
    json meta;
    meta["kind"] = "meta";
    meta["rule"] = to_string(config.rule);
    meta["seed"] = config.seed;
    meta["boundary_ms"] = summary.boundary_ms;
    meta["start_ts_ms"] = config.start_ts_ms;
    meta["period_ms"] = config.period_ms;
    meta["n_destinations"] = D;
    meta["n_listings"] = L;
    meta["n_travelers"] = config.n_travelers;
    meta["booking_weight"] = w_book;
    meta["value_weight"] = w_value;
    truth_out << meta.dump() << '\n';
  }
  for (int d = 0; d < D; ++d) {
    json j;
    j["kind"] = "destination";
    j["destination_id"] = dest_id(d);
    j["lat"] = dests[d].lat;
    j["lon"] = dests[d].lon;
    j["latent"] = dests[d].latent;
    truth_out << j.dump() << '\n';
  }
  for (int l = 0; l < L; ++l) {
    json j;
    j["kind"] = "listing";
    j["listing_id"] = listing_id(l);
    j["destination_id"] = dest_id(listings[l].dest);
    j["lat"] = listings[l].lat;
    j["lon"] = listings[l].lon;
    j["latent"] = listings[l].latent;
    truth_out << j.dump() << '\n';
  }
  for (const TravelerPeriodTruth& r : truth_rows) {
    json j;
    j["kind"] = "traveler_period";
    j["traveler_id"] = r.traveler;
    j["period"] = r.period;
    j["p_book"] = r.p_book;
    j["booked"] = r.booked;
    j["zbar"] = r.zbar;
    truth_out << j.dump() << '\n';
  }
  return summary;
}

WorldSummary generate_world_files(const SyntheticWorldConfig& config,
                                  const std::string& events_path,
                                  const std::string& truth_path) {
  std::ofstream events(events_path);
  if (!events) throw DataError("cannot write '" + events_path + "'");
  std::ofstream truth(truth_path);
  if (!truth) throw DataError("cannot write '" + truth_path + "'");
  return generate_world(config, events, truth);
}

}  // namespace dprt::synth
