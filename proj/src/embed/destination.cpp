#include "dprt/embed/destination.hpp"

#include <cmath>

namespace dprt::embed {

DemandMatrix build_demand_matrix(const std::vector<ActivityEvent>& events) {
  std::map<std::string, std::map<std::string, double>> bookings, views;
  for (const ActivityEvent& e : events) {
    if (!e.listing_id || !e.destination_id) continue;
    if (e.activity_type == ActivityType::Booking) {
      bookings[*e.listing_id][*e.destination_id] += 1.0;
    } else if (e.activity_type == ActivityType::View ||
               e.activity_type == ActivityType::Click) {
      views[*e.listing_id][*e.destination_id] += 1.0;
    }
  }
  DemandMatrix m;
  for (auto& [listing, counts] : views) {
    auto booked = bookings.find(listing);
    const auto& chosen = booked != bookings.end() ? booked->second : counts;
    double total = 0.0;
    for (const auto& [dest, c] : chosen) total += c;
    auto& row = m.rows[listing];
    for (const auto& [dest, c] : chosen) row[dest] = c / total;
  }
  // listings booked but never viewed
  for (auto& [listing, counts] : bookings) {
    if (m.rows.count(listing)) continue;
    double total = 0.0;
    for (const auto& [dest, c] : counts) total += c;
    auto& row = m.rows[listing];
    for (const auto& [dest, c] : counts) row[dest] = c / total;
  }
  return m;
}

DestinationEmbeddings destination_embeddings(const SkipGramModel& model,
                                             const DemandMatrix& demand) {
  const int d = model.dim;
  std::map<std::string, Vec> sums;
  std::map<std::string, double> mass;
  for (const auto& [listing, row] : demand.rows) {
    const int idx = model.vocab.lookup(listing);
    if (idx < 0) continue;
    const auto vec = model.input_row(idx);
    for (const auto& [dest, p] : row) {
      if (p <= 0.0) continue;
      auto [it, inserted] = sums.try_emplace(dest, Vec(d, 0.0));
      for (int k = 0; k < d; ++k) it->second[k] += p * vec[k];
      mass[dest] += p;
    }
  }
  DestinationEmbeddings out;
  out.dim = d;
  for (auto& [dest, sum] : sums) {
    const double n = mass[dest];
    if (n <= 0.0) continue;
    Vec v(d);
    for (int k = 0; k < d; ++k) v[k] = sum[k] / n;
    out.vectors.emplace(dest, std::move(v));
  }
  return out;
}

Vec cold_start_embedding(const DestinationEmbeddings& destinations,
                         const std::map<std::string, GeoPoint>& centroids,
                         double latitude, double longitude, double tau_km) {
  if (tau_km <= 0.0) throw std::invalid_argument("cold_start_embedding: tau must be positive");
  // destinations usable: embedding and centroid both known
  std::vector<std::pair<const Vec*, double>> candidates;  // (vector, distance)
  double min_dist = HUGE_VAL;
  for (const auto& [dest, vec] : destinations.vectors) {
    auto c = centroids.find(dest);
    if (c == centroids.end()) continue;
    const double dist =
        haversine_km(latitude, longitude, c->second.latitude, c->second.longitude);
    min_dist = std::min(min_dist, dist);
    candidates.emplace_back(&vec, dist);
  }
  if (candidates.empty()) {
    throw DataError("cold_start_embedding: no destination with a known centroid");
  }
  // max-shift by the nearest distance keeps tiny tau stable
  double total = 0.0;
  Vec out(destinations.dim, 0.0);
  std::vector<double> weights(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    weights[i] = std::exp(-(candidates[i].second - min_dist) / tau_km);
    total += weights[i];
  }
  for (size_t i = 0; i < candidates.size(); ++i) {
    const double w = weights[i] / total;
    const Vec& v = *candidates[i].first;
    for (int k = 0; k < destinations.dim; ++k) out[k] += w * v[k];
  }
  return out;
}

Vec cold_start_embedding(const DestinationEmbeddings& destinations,
                         const std::map<std::string, GeoPoint>& centroids,
                         const Listing& listing, double tau_km) {
  if (listing.latitude < -90.0 || listing.latitude > 90.0 ||
      listing.longitude < -180.0 || listing.longitude > 180.0) {
    throw std::invalid_argument("cold_start_embedding: listing '" +
                                listing.listing_id + "' has out-of-range coordinates");
  }
  return cold_start_embedding(destinations, centroids, listing.latitude,
                              listing.longitude, tau_km);
}

}  // namespace dprt::embed
