#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dprt/funnel/buckets.hpp"
#include "dprt/mathutil.hpp"

using namespace dprt;
using namespace dprt::funnel;

TEST_CASE("utility validates the domain and forms the product") {
  CHECK(utility("t", 0.0, 123.0).u == 0.0);
  const UtilityScore s = utility("t", 0.2, 500.0);
  CHECK(s.u == doctest::Approx(100.0).epsilon(1e-15));
  CHECK_THROWS_AS(utility("t", -0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(utility("t", 1.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(utility("t", 0.5, -1.0), std::invalid_argument);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double r = rng.real01();
    const double m = rng.uniform(0, 1000);
    CHECK(utility("t", r, m).u == r * m);
  }
}

TEST_CASE("fit_thresholds puts quarter cuts on 1..100") {
  std::vector<double> scores(100);
  for (int i = 0; i < 100; ++i) scores[i] = i + 1;
  const BucketThresholds t = fit_thresholds(scores, 4);
  REQUIRE(t.cuts.size() == 3);
  CHECK(t.cuts[0] == 25.0);
  CHECK(t.cuts[1] == 50.0);
  CHECK(t.cuts[2] == 75.0);
  std::vector<int> counts(4, 0);
  for (double s : scores) ++counts[assign(t, s) - 1];
  for (int c : counts) CHECK(c == 25);
}

TEST_CASE("fit_thresholds needs at least as many scores as buckets") {
  CHECK_THROWS_AS(fit_thresholds({1.0, 2.0}, 3), std::invalid_argument);
}

TEST_CASE("all-tied scores give identical cuts and one occupied bucket") {
  const std::vector<double> scores(50, 3.25);
  const BucketThresholds t = fit_thresholds(scores, 5);
  for (double c : t.cuts) CHECK(c == 3.25);
  // with u <= cut_k the tie mass lands in the first bucket
  for (double s : scores) CHECK(assign(t, s) == 1);
  CHECK(assign(t, 3.26) == 5);
  CHECK(assign(t, 3.24) == 1);
}

TEST_CASE("bucket sizes match a sort-and-slice oracle on random scores") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50 + static_cast<int>(rng.below(400));
    const int buckets = 2 + static_cast<int>(rng.below(10));
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.uniform(0, 100);
    const BucketThresholds t = fit_thresholds(scores, buckets);

    // oracle: rank-based slice of the sorted sample; rank r belongs to the
    // smallest bucket k whose quantile index ceil(k*n/N) reaches it
    auto rank_bucket = [&](int rank) {
      for (int k = 1; k < buckets; ++k) {
        if (rank <= (static_cast<int64_t>(k) * n + buckets - 1) / buckets) return k;
      }
      return buckets;
    };
    std::vector<int> oracle_counts(buckets, 0);
    for (int i = 0; i < n; ++i) ++oracle_counts[rank_bucket(i + 1) - 1];
    std::vector<int> counts(buckets, 0);
    for (double s : scores) ++counts[assign(t, s) - 1];
    // continuous scores: exact agreement (ties have probability zero)
    CHECK(counts == oracle_counts);
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
  }
}

TEST_CASE("assign handles the extremes and is monotone") {
  const BucketThresholds t = fit_thresholds({1, 2, 3, 4, 5, 6, 7, 8}, 4);
  CHECK(assign(t, -100.0) == 1);
  CHECK(assign(t, 1e9) == 4);
  Rng rng(13);
  std::vector<double> sample(1000);
  for (double& s : sample) s = rng.uniform(-5, 15);
  std::sort(sample.begin(), sample.end());
  int prev = 1;
  for (double s : sample) {
    const int b = assign(t, s);
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("assign equals the rank/ceil oracle on 1000 random scores") {
  Rng rng(17);
  const int n = 1000, buckets = 10;
  std::vector<double> scores(n);
  for (double& s : scores) s = rng.uniform(0, 1);
  const BucketThresholds t = fit_thresholds(scores, buckets);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  auto rank_bucket = [&](int rank) {
    for (int k = 1; k < buckets; ++k) {
      if (rank <= (static_cast<int64_t>(k) * n + buckets - 1) / buckets) return k;
    }
    return buckets;
  };
  for (int rank = 1; rank <= n; ++rank) {
    CHECK(assign(t, scores[order[rank - 1]]) == rank_bucket(rank));
  }
}

TEST_CASE("bucket_report on a perfect predictor has Spearman 1") {
  const int n = 200, buckets = 10;
  std::vector<int> assignments(n);
  std::vector<RealizedOutcome> outcomes(n);
  std::vector<double> predicted(n);
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = i + 1.0;
  const BucketThresholds t = fit_thresholds(u, buckets);
  for (int i = 0; i < n; ++i) {
    assignments[i] = assign(t, u[i]);
    outcomes[i] = {true, u[i], 1};  // realized value equals the prediction
    predicted[i] = u[i];
  }
  const BucketReport r = bucket_report(buckets, assignments, outcomes, &predicted);
  REQUIRE(r.spearman_bucket_rpc.has_value());
  CHECK(*r.spearman_bucket_rpc == doctest::Approx(1.0).epsilon(1e-12));
  int64_t total = 0;
  for (const BucketStats& b : r.buckets) total += b.count;
  CHECK(total == n);
  // predicted means strictly increase with the bucket index
  for (size_t b = 1; b < r.buckets.size(); ++b) {
    CHECK(*r.buckets[b].mean_predicted_u > *r.buckets[b - 1].mean_predicted_u);
  }
}

TEST_CASE("bucket_report under a random predictor centers near zero Spearman") {
  Rng rng(23);
  const int n = 400, buckets = 10;
  double mean_rho = 0.0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> u(n);
    for (double& x : u) x = rng.real01();
    const BucketThresholds t = fit_thresholds(u, buckets);
    std::vector<int> assignments(n);
    std::vector<RealizedOutcome> outcomes(n);
    for (int i = 0; i < n; ++i) {
      assignments[i] = assign(t, u[i]);
      const bool booked = rng.real01() < 0.3;  // independent of u
      outcomes[i] = {booked, booked ? rng.uniform(50, 150) : 0.0,
                     1 + static_cast<int64_t>(rng.below(5))};
    }
    mean_rho += *bucket_report(buckets, assignments, outcomes).spearman_bucket_rpc;
  }
  mean_rho /= trials;
  CHECK(std::fabs(mean_rho) < 0.1);
}

TEST_CASE("bucket_report flags empty buckets instead of inventing numbers") {
  std::vector<int> assignments = {1, 1, 3};
  std::vector<RealizedOutcome> outcomes = {{true, 10, 1}, {false, 0, 2}, {false, 0, 1}};
  const BucketReport r = bucket_report(3, assignments, outcomes);
  CHECK(r.buckets[0].count == 2);
  CHECK(r.buckets[1].count == 0);
  CHECK_FALSE(r.buckets[1].booking_rate.has_value());
  CHECK_FALSE(r.buckets[1].rpc.has_value());
  CHECK(r.buckets[2].count == 1);
  CHECK(*r.buckets[0].booking_rate == doctest::Approx(0.5));
  CHECK(*r.buckets[0].rpc == doctest::Approx(10.0 / 3.0));
}

TEST_CASE("threshold files round-trip exactly") {
  Rng rng(29);
  std::vector<double> scores(64);
  for (double& s : scores) s = rng.uniform(0, 1e6);
  const BucketThresholds t = fit_thresholds(scores, 8);
  std::stringstream buf;
  save_thresholds(t, buf);
  const BucketThresholds back = load_thresholds(buf);
  CHECK(back.n_buckets == t.n_buckets);
  CHECK(back.cuts == t.cuts);
}
