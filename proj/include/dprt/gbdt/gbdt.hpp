#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt::gbdt {

enum class Objective {
  Logistic,         // booking intent; margin -> sigmoid probability
  SquaredLogValue,  // booking value; squared loss on log1p(value)
};

const char* to_string(Objective o);

struct BoostConfig {
  int rounds = 100;
  double learning_rate = 0.1;   // shrinkage, folded into stored leaf weights
  int max_depth = 6;
  double lambda = 1.0;          // leaf L2
  double gamma = 0.0;           // per-split penalty
  double colsample = 0.8;       // feature fraction per tree
  double min_child_hessian = 1e-3;
  uint64_t seed = 7;
  Objective objective = Objective::Logistic;
};

struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

/// First and second derivatives of the loss at the current prediction.
/// Logistic: y in {0,1}, prediction is a margin. SquaredLogValue: y is the
/// log1p target.
GradHess grad_hess(Objective objective, double y, double prediction);

/// Optimal leaf value -sum_g / (sum_h + lambda).
double leaf_weight(double sum_g, double sum_h, double lambda);

/// Gain of splitting a parent into (left, parent - left):
/// 0.5 [GL^2/(HL+l) + GR^2/(HR+l) - GP^2/(HP+l)] - gamma.
double split_gain(double parent_g, double parent_h, double left_g, double left_h,
                  double lambda, double gamma);

struct TreeNode {
  int feature = -1;        // -1 for leaves
  double threshold = 0.0;  // x[feature] < threshold goes left
  int left = -1;
  int right = -1;
  double weight = 0.0;     // leaf value, learning rate included
  bool is_leaf() const { return feature < 0; }
};

struct RegTree {
  std::vector<TreeNode> nodes;  // preorder, root first
  double value(std::span<const double> features) const;
};

struct Ensemble {
  Objective objective = Objective::Logistic;
  double base_score = 0.0;
  int n_features = 0;
  std::vector<RegTree> trees;
};

/// Greedy exact second-order boosting. Trees stop growing when no split has
/// positive gain; a round whose root cannot split ends the fit.
Ensemble fit(const std::vector<LabeledExample>& data, const BoostConfig& config);

/// Raw additive score base_score + sum of tree outputs.
double predict_margin(const Ensemble& model, std::span<const double> features);

/// Final-scale prediction: sigmoid(margin) for Logistic, max(0, expm1(margin))
/// for SquaredLogValue.
double predict(const Ensemble& model, std::span<const double> features);

/// Text model file, header "DPRT-GBT 1" + config echo + preorder trees.
/// Reload reproduces predictions exactly.
void save_ensemble(const Ensemble& model, const BoostConfig& config, std::ostream& out);
Ensemble load_ensemble(std::istream& in);
void save_ensemble_file(const Ensemble& model, const BoostConfig& config,
                        const std::string& path);
Ensemble load_ensemble_file(const std::string& path);

}  // namespace dprt::gbdt
