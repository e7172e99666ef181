#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dprt::funnel {

/// Bid utility u = r * m: conversion probability times marginal value.
struct UtilityScore {
  std::string traveler_id;
  double r = 0.0;
  double m = 0.0;
  double u = 0.0;
};

/// Validates r in [0,1], m >= 0 and forms the product.
UtilityScore utility(const std::string& traveler_id, double r, double m);

/// Cut points at the k/N empirical quantiles, k = 1..N-1. Buckets then hold
/// an even share of the population up to tie mass at the cuts.
struct BucketThresholds {
  int n_buckets = 0;
  std::vector<double> cuts;  // N-1 non-decreasing values
};

/// Quantile cuts over at least N scores: cut_k = sorted[ceil(k*n/N) - 1].
BucketThresholds fit_thresholds(const std::vector<double>& scores, int n_buckets);

/// Bucket of u: the smallest k with u <= cut_k, else N. 1-based; monotone
/// non-decreasing in u.
int assign(const BucketThresholds& thresholds, double u);

struct RealizedOutcome {
  bool booked = false;
  double value = 0.0;
  int64_t clicks = 0;
};

struct BucketStats {
  int64_t count = 0;
  std::optional<double> booking_rate;
  std::optional<double> mean_value;
  std::optional<double> rpc;  // summed value / summed clicks (min 1 click)
  std::optional<double> mean_predicted_u;
};

struct BucketReport {
  std::vector<BucketStats> buckets;  // index k-1 holds bucket k
  /// Spearman rank correlation of bucket index vs realized RPC over
  /// non-empty buckets; absent with fewer than two populated buckets.
  std::optional<double> spearman_bucket_rpc;
};

BucketReport bucket_report(int n_buckets, const std::vector<int>& assignments,
                           const std::vector<RealizedOutcome>& outcomes,
                           const std::vector<double>* predicted_u = nullptr);

/// Threshold file "DPRT-BKT 1 <N>" + one cut per line, exact decimals.
void save_thresholds(const BucketThresholds& t, std::ostream& out);
BucketThresholds load_thresholds(std::istream& in);
void save_thresholds_file(const BucketThresholds& t, const std::string& path);
BucketThresholds load_thresholds_file(const std::string& path);

}  // namespace dprt::funnel
