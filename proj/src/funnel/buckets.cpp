#include "dprt/funnel/buckets.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dprt/mathutil.hpp"

namespace dprt::funnel {

UtilityScore utility(const std::string& traveler_id, double r, double m) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument("utility: r must be in [0,1], got " + format_double(r));
  }
  if (!(m >= 0.0)) {
    throw std::invalid_argument("utility: m must be non-negative, got " + format_double(m));
  }
  return {traveler_id, r, m, r * m};
}

BucketThresholds fit_thresholds(const std::vector<double>& scores, int n_buckets) {
  if (n_buckets < 2) throw std::invalid_argument("fit_thresholds: need at least 2 buckets");
  const int64_t n = static_cast<int64_t>(scores.size());
  if (n < n_buckets) {
    throw std::invalid_argument("fit_thresholds: fewer scores (" + std::to_string(n) +
                                ") than buckets (" + std::to_string(n_buckets) + ")");
  }
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  BucketThresholds t;
  t.n_buckets = n_buckets;
  t.cuts.reserve(n_buckets - 1);
  for (int k = 1; k < n_buckets; ++k) {
    const int64_t idx = (k * n + n_buckets - 1) / n_buckets - 1;  // ceil(kn/N)-1
    t.cuts.push_back(sorted[idx]);
  }
  return t;
}

int assign(const BucketThresholds& thresholds, double u) {
  if (thresholds.n_buckets < 2 ||
      static_cast<int>(thresholds.cuts.size()) != thresholds.n_buckets - 1) {
    throw std::invalid_argument("assign: thresholds not fitted");
  }
  const auto it =
      std::lower_bound(thresholds.cuts.begin(), thresholds.cuts.end(), u);
  if (it == thresholds.cuts.end()) return thresholds.n_buckets;
  return static_cast<int>(it - thresholds.cuts.begin()) + 1;
}

BucketReport bucket_report(int n_buckets, const std::vector<int>& assignments,
                           const std::vector<RealizedOutcome>& outcomes,
                           const std::vector<double>* predicted_u) {
  if (assignments.size() != outcomes.size()) {
    throw std::invalid_argument("bucket_report: assignment/outcome size mismatch");
  }
  if (predicted_u != nullptr && predicted_u->size() != assignments.size()) {
    throw std::invalid_argument("bucket_report: predicted_u size mismatch");
  }
  struct Accum {
    int64_t count = 0;
    double booked = 0.0, value = 0.0, clicks = 0.0, pred = 0.0;
  };
  std::vector<Accum> acc(n_buckets);
  for (size_t i = 0; i < assignments.size(); ++i) {
    const int b = assignments[i];
    if (b < 1 || b > n_buckets) {
      throw std::invalid_argument("bucket_report: assignment out of range");
    }
    Accum& a = acc[b - 1];
    a.count += 1;
    a.booked += outcomes[i].booked ? 1.0 : 0.0;
    a.value += outcomes[i].value;
    a.clicks += static_cast<double>(outcomes[i].clicks);
    if (predicted_u != nullptr) a.pred += (*predicted_u)[i];
  }
  BucketReport report;
  report.buckets.resize(n_buckets);
  std::vector<double> idx_pts, rpc_pts;
  for (int b = 0; b < n_buckets; ++b) {
    BucketStats& s = report.buckets[b];
    s.count = acc[b].count;
    if (acc[b].count == 0) continue;
    const double cnt = static_cast<double>(acc[b].count);
    s.booking_rate = acc[b].booked / cnt;
    s.mean_value = acc[b].value / cnt;
    s.rpc = acc[b].value / std::max(1.0, acc[b].clicks);
    if (predicted_u != nullptr) s.mean_predicted_u = acc[b].pred / cnt;
    idx_pts.push_back(static_cast<double>(b + 1));
    rpc_pts.push_back(*s.rpc);
  }
  if (idx_pts.size() >= 2) {
    report.spearman_bucket_rpc = spearman(idx_pts, rpc_pts);
  }
  return report;
}

void save_thresholds(const BucketThresholds& t, std::ostream& out) {
  out << "DPRT-BKT 1 " << t.n_buckets << '\n';
  for (double c : t.cuts) out << format_double(c) << '\n';
}

BucketThresholds load_thresholds(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty threshold file");
  std::istringstream header(line);
  std::string magic, version;
  int n = 0;
  header >> magic >> version >> n;
  if (magic != "DPRT-BKT" || version != "1" || n < 2) {
    throw DataError("bad DPRT-BKT header");
  }
  BucketThresholds t;
  t.n_buckets = n;
  for (int k = 1; k < n; ++k) {
    if (!std::getline(in, line)) throw DataError("truncated threshold file");
    t.cuts.push_back(parse_double(line));
  }
  return t;
}

void save_thresholds_file(const BucketThresholds& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  save_thresholds(t, out);
}

BucketThresholds load_thresholds_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_thresholds(in);
}

}  // namespace dprt::funnel
