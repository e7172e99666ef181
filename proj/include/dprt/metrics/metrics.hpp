#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt::metrics {

/// Rank-based AUC with midranks for ties; equals the probability that a
/// random positive outranks a random negative (ties count one half).
/// Requires at least one positive and one negative.
double auc(std::span<const double> scores, std::span<const int> labels);

struct PRF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when nothing was predicted positive
};

/// Confusion-matrix metrics at a threshold; score >= threshold is positive.
PRF1 prf1(std::span<const double> scores, std::span<const int> labels,
          double threshold);

struct MetricReport {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  double threshold = 0.5;
  int64_t positives = 0;
  int64_t negatives = 0;
};

MetricReport evaluate_scores(std::span<const double> scores,
                             std::span<const int> labels, double threshold = 0.5);

std::string metric_report_json(const MetricReport& r);
std::string metric_report_table(const MetricReport& r);

/// Strict timestamp partition: (events before boundary, events at or after).
/// Both sides must be non-empty.
std::pair<std::vector<ActivityEvent>, std::vector<ActivityEvent>> temporal_split(
    const std::vector<ActivityEvent>& events, int64_t boundary_ms);

}  // namespace dprt::metrics
