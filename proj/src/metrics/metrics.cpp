#include "dprt/metrics/metrics.hpp"

#include <cstdio>

#include "dprt/mathutil.hpp"
#include "json.hpp"

namespace dprt::metrics {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("auc: scores/labels must be equal-length and non-empty");
  }
  int64_t positives = 0, negatives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("auc: labels must be 0/1");
    y == 1 ? ++positives : ++negatives;
  }
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("auc: needs at least one positive and one negative");
  }
  const std::vector<double> ranks =
      midranks(std::vector<double>(scores.begin(), scores.end()));
  double rank_sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

PRF1 prf1(std::span<const double> scores, std::span<const int> labels,
          double threshold) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("prf1: scores/labels size mismatch");
  }
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++tp;
    if (pred && !truth) ++fp;
    if (!pred && truth) ++fn;
  }
  PRF1 out;
  if (tp + fp == 0) {
    out.precision = 0.0;
    out.precision_defined = false;
  } else {
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  out.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

MetricReport evaluate_scores(std::span<const double> scores,
                             std::span<const int> labels, double threshold) {
  MetricReport r;
  r.auc = auc(scores, labels);
  const PRF1 p = prf1(scores, labels, threshold);
  r.precision = p.precision;
  r.recall = p.recall;
  r.f1 = p.f1;
  r.precision_defined = p.precision_defined;
  r.threshold = threshold;
  for (int y : labels) y == 1 ? ++r.positives : ++r.negatives;
  return r;
}

std::string metric_report_json(const MetricReport& r) {
  nlohmann::json j;
  j["auc"] = r.auc;
  j["precision"] = r.precision;
  j["precision_defined"] = r.precision_defined;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["threshold"] = r.threshold;
  j["positives"] = r.positives;
  j["negatives"] = r.negatives;
  return j.dump(2);
}

std::string metric_report_table(const MetricReport& r) {
  char buf[256];
  std::string out = "AUC       Precision  Recall    F1-Score\n";
  std::snprintf(buf, sizeof(buf), "%-8.6f  %-9.6f  %-8.6f  %-8.6f\n", r.auc,
                r.precision, r.recall, r.f1);
  out += buf;
  std::snprintf(buf, sizeof(buf), "(threshold %.2f, %lld positives, %lld negatives%s)\n",
                r.threshold, static_cast<long long>(r.positives),
                static_cast<long long>(r.negatives),
                r.precision_defined ? "" : "; precision undefined, reported as 0");
  out += buf;
  return out;
}

std::pair<std::vector<ActivityEvent>, std::vector<ActivityEvent>> temporal_split(
    const std::vector<ActivityEvent>& events, int64_t boundary_ms) {
  std::vector<ActivityEvent> before, after;
  for (const ActivityEvent& e : events) {
    (e.timestamp_ms < boundary_ms ? before : after).push_back(e);
  }
  if (before.empty() || after.empty()) {
    throw DataError("temporal_split: boundary " + std::to_string(boundary_ms) +
                    " leaves an empty side (" + std::to_string(before.size()) +
                    " / " + std::to_string(after.size()) + ")");
  }
  return {std::move(before), std::move(after)};
}

}  // namespace dprt::metrics
