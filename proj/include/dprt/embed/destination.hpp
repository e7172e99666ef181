#pragma once

#include <map>
#include <string>
#include <vector>

#include "dprt/core/types.hpp"
#include "dprt/embed/skipgram.hpp"

namespace dprt::embed {

/// Per-listing demand proportions over destinations. Each listing's
/// proportions are non-negative and sum to 1.
struct DemandMatrix {
  // listing id -> (destination id -> proportion), ordered for determinism
  std::map<std::string, std::map<std::string, double>> rows;
};

/// Demand proportions from the event log: booking counts per
/// (listing, destination); listings with no bookings fall back to
/// View/Click counts. Listings with no destination signal get no row.
DemandMatrix build_demand_matrix(const std::vector<ActivityEvent>& events);

struct DestinationEmbeddings {
  int dim = 0;
  std::map<std::string, Vec> vectors;  // destination id -> d-vector
};

/// Demand-weighted expectation of listing vectors per destination:
/// nu_d = sum_l p_ld nu_l / sum_l p_ld. Zero-mass destinations are absent.
DestinationEmbeddings destination_embeddings(const SkipGramModel& model,
                                             const DemandMatrix& demand);

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

/// Embedding for a listing with no interaction data: destination weights
/// p_d proportional to exp(-distance_km/tau), normalized, applied to the
/// destination vectors. The result is a convex combination.
Vec cold_start_embedding(const DestinationEmbeddings& destinations,
                         const std::map<std::string, GeoPoint>& centroids,
                         double latitude, double longitude,
                         double tau_km = 50.0);

/// Same, from a Listing record; validates the coordinate ranges.
Vec cold_start_embedding(const DestinationEmbeddings& destinations,
                         const std::map<std::string, GeoPoint>& centroids,
                         const Listing& listing, double tau_km = 50.0);

}  // namespace dprt::embed
