#include "dprt/gbdt/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dprt/mathutil.hpp"

namespace dprt::gbdt {

const char* to_string(Objective o) {
  return o == Objective::Logistic ? "logistic" : "squared_log_value";
}

GradHess grad_hess(Objective objective, double y, double prediction) {
  if (objective == Objective::Logistic) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("grad_hess: logistic label must be 0 or 1");
    }
    const double p = stable_sigmoid(prediction);
    return {p - y, p * (1.0 - p)};
  }
  return {prediction - y, 1.0};
}

double leaf_weight(double sum_g, double sum_h, double lambda) {
  const double denom = sum_h + lambda;
  if (denom <= 0.0) throw std::invalid_argument("leaf_weight: sum_h + lambda must be positive");
  return -sum_g / denom;
}

double split_gain(double parent_g, double parent_h, double left_g, double left_h,
                  double lambda, double gamma) {
  const double right_g = parent_g - left_g;
  const double right_h = parent_h - left_h;
  auto score = [lambda](double g, double h) { return g * g / (h + lambda); };
  return 0.5 * (score(left_g, left_h) + score(right_g, right_h) -
                score(parent_g, parent_h)) -
         gamma;
}

double RegTree::value(std::span<const double> features) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    node = features[nodes[node].feature] < nodes[node].threshold
               ? nodes[node].left
               : nodes[node].right;
  }
  return nodes[node].weight;
}

namespace {

struct BuildNode {
  double g = 0.0, h = 0.0;
  int64_t count = 0;
  int depth = 0;
  // chosen split (feature < 0 means leaf)
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  int left = -1, right = -1;
};

struct ScanState {
  double gl = 0.0, hl = 0.0;
  int64_t count = 0;
  double prev = 0.0;
};

// Preorder emission of the build tree; eta is folded into leaf weights.
int emit_preorder(const std::vector<BuildNode>& bn, int id, double eta,
                  double lambda, RegTree& tree) {
  const int my = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (bn[id].feature < 0) {
    const double denom = bn[id].h + lambda;
    tree.nodes[my].weight = denom > 0.0 ? eta * (-bn[id].g / denom) : 0.0;
  } else {
    tree.nodes[my].feature = bn[id].feature;
    tree.nodes[my].threshold = bn[id].threshold;
    const int l = emit_preorder(bn, bn[id].left, eta, lambda, tree);
    const int r = emit_preorder(bn, bn[id].right, eta, lambda, tree);
    tree.nodes[my].left = l;
    tree.nodes[my].right = r;
  }
  return my;
}

}  // namespace

Ensemble fit(const std::vector<LabeledExample>& data, const BoostConfig& config) {
  if (data.empty()) throw std::invalid_argument("gbdt::fit: empty dataset");
  const int n = static_cast<int>(data.size());
  const int n_features = static_cast<int>(data.front().features.size());
  if (n_features < 1) throw std::invalid_argument("gbdt::fit: no features");
  for (const LabeledExample& ex : data) {
    if (static_cast<int>(ex.features.size()) != n_features) {
      throw std::invalid_argument("gbdt::fit: inconsistent feature length");
    }
  }
  if (config.rounds < 0 || config.learning_rate <= 0.0 ||
      config.learning_rate > 1.0 || config.max_depth < 1 ||
      config.lambda < 0.0 || config.gamma < 0.0 || config.colsample <= 0.0 ||
      config.colsample > 1.0 || config.min_child_hessian < 0.0) {
    throw std::invalid_argument("gbdt::fit: invalid config");
  }

  // targets
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    if (config.objective == Objective::Logistic) {
      if (data[i].label_intent != 0 && data[i].label_intent != 1) {
        throw std::invalid_argument("gbdt::fit: intent label must be 0 or 1");
      }
      y[i] = data[i].label_intent;
    } else {
      if (data[i].label_value < 0.0) {
        throw std::invalid_argument("gbdt::fit: negative value label");
      }
      y[i] = std::log1p(data[i].label_value);
    }
  }

  Ensemble model;
  model.objective = config.objective;
  model.n_features = n_features;
  {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    if (config.objective == Objective::Logistic) {
      const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
      model.base_score = std::log(p / (1.0 - p));
    } else {
      model.base_score = mean;
    }
  }

  // column store + per-feature presorted row order
  std::vector<std::vector<double>> col(n_features, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < n_features; ++f) col[f][i] = data[i].features[f];
  }
  std::vector<std::vector<int>> order(n_features, std::vector<int>(n));
  for (int f = 0; f < n_features; ++f) {
    std::iota(order[f].begin(), order[f].end(), 0);
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](int a, int b) { return col[f][a] < col[f][b]; });
  }

  std::vector<double> margin(n, model.base_score);
  std::vector<double> g(n), h(n);
  Rng rng(config.seed);
  const int subset_size = std::clamp(
      static_cast<int>(std::ceil(config.colsample * n_features)), 1, n_features);

  for (int round = 0; round < config.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const GradHess gh = grad_hess(config.objective, y[i], margin[i]);
      g[i] = gh.g;
      h[i] = gh.h;
    }
    std::vector<int> features(n_features);
    std::iota(features.begin(), features.end(), 0);
    if (subset_size < n_features) {
      rng.shuffle(features);
      features.resize(subset_size);
      std::sort(features.begin(), features.end());
    }

    std::vector<BuildNode> bn(1);
    for (int i = 0; i < n; ++i) {
      bn[0].g += g[i];
      bn[0].h += h[i];
    }
    bn[0].count = n;
    std::vector<int> row_node(n, 0);
    std::vector<int> level = {0};

    while (!level.empty()) {
      std::vector<int> slot_of(bn.size(), -1);
      std::vector<int> scannable;
      for (int id : level) {
        if (bn[id].depth < config.max_depth && bn[id].count >= 2) {
          slot_of[id] = static_cast<int>(scannable.size());
          scannable.push_back(id);
        }
      }
      if (scannable.empty()) break;

      std::vector<ScanState> scan(scannable.size());
      for (int f : features) {
        for (ScanState& s : scan) s = ScanState{};
        for (int idx : order[f]) {
          const int nid = row_node[idx];
          if (nid >= static_cast<int>(slot_of.size()) || slot_of[nid] < 0) continue;
          ScanState& st = scan[slot_of[nid]];
          const double v = col[f][idx];
          if (st.count > 0 && v > st.prev) {
            const double hr = bn[nid].h - st.hl;
            if (st.hl >= config.min_child_hessian &&
                hr >= config.min_child_hessian) {
              const double gain = split_gain(bn[nid].g, bn[nid].h, st.gl, st.hl,
                                             config.lambda, config.gamma);
              if (gain > bn[nid].gain) {
                bn[nid].gain = gain;
                bn[nid].feature = f;
                bn[nid].threshold = (st.prev + v) / 2.0;
              }
            }
          }
          st.gl += g[idx];
          st.hl += h[idx];
          st.count += 1;
          st.prev = v;
        }
      }

      std::vector<int> next_level;
      for (int id : scannable) {
        if (bn[id].feature < 0) continue;
        bn[id].left = static_cast<int>(bn.size());
        bn.emplace_back();
        bn[id].right = static_cast<int>(bn.size());
        bn.emplace_back();
        bn[bn[id].left].depth = bn[id].depth + 1;
        bn[bn[id].right].depth = bn[id].depth + 1;
        next_level.push_back(bn[id].left);
        next_level.push_back(bn[id].right);
      }
      if (next_level.empty()) break;
      for (int i = 0; i < n; ++i) {
        const int nid = row_node[i];
        if (nid >= static_cast<int>(slot_of.size()) || slot_of[nid] < 0 ||
            bn[nid].feature < 0) {
          continue;
        }
        const int child = col[bn[nid].feature][i] < bn[nid].threshold
                              ? bn[nid].left
                              : bn[nid].right;
        row_node[i] = child;
        bn[child].g += g[i];
        bn[child].h += h[i];
        bn[child].count += 1;
      }
      level = std::move(next_level);
    }

    if (bn[0].feature < 0) break;  // no positive-gain split: stop boosting

    RegTree tree;
    emit_preorder(bn, 0, config.learning_rate, config.lambda, tree);
    for (int i = 0; i < n; ++i) margin[i] += tree.value(data[i].features);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_margin(const Ensemble& model, std::span<const double> features) {
  if (static_cast<int>(features.size()) != model.n_features) {
    throw std::invalid_argument("predict: feature length " +
                                std::to_string(features.size()) + " != " +
                                std::to_string(model.n_features));
  }
  double margin = model.base_score;
  for (const RegTree& t : model.trees) margin += t.value(features);
  return margin;
}

double predict(const Ensemble& model, std::span<const double> features) {
  const double margin = predict_margin(model, features);
  if (model.objective == Objective::Logistic) return stable_sigmoid(margin);
  return std::max(0.0, std::expm1(margin));
}

void save_ensemble(const Ensemble& model, const BoostConfig& config,
                   std::ostream& out) {
  out << "DPRT-GBT 1\n";
  out << "objective " << to_string(model.objective) << '\n';
  out << "base_score " << format_double(model.base_score) << '\n';
  out << "config rounds " << config.rounds << " learning_rate "
      << format_double(config.learning_rate) << " max_depth " << config.max_depth
      << " lambda " << format_double(config.lambda) << " gamma "
      << format_double(config.gamma) << " colsample "
      << format_double(config.colsample) << " min_child_hessian "
      << format_double(config.min_child_hessian) << " seed " << config.seed
      << '\n';
  out << "n_features " << model.n_features << '\n';
  out << "n_trees " << model.trees.size() << '\n';
  for (size_t t = 0; t < model.trees.size(); ++t) {
    const RegTree& tree = model.trees[t];
    out << "tree " << t << ' ' << tree.nodes.size() << '\n';
    for (const TreeNode& nd : tree.nodes) {
      if (nd.is_leaf()) {
        out << "leaf " << format_double(nd.weight) << '\n';
      } else {
        out << "split " << nd.feature << ' ' << format_double(nd.threshold)
            << ' ' << nd.left << ' ' << nd.right << '\n';
      }
    }
  }
}

Ensemble load_ensemble(std::istream& in) {
  std::string line;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw DataError("truncated DPRT-GBT file");
    return line;
  };
  if (next_line() != "DPRT-GBT 1") throw DataError("bad DPRT-GBT header");
  Ensemble model;
  {
    std::istringstream ss(next_line());
    std::string tag, obj;
    ss >> tag >> obj;
    if (tag != "objective") throw DataError("DPRT-GBT: expected objective");
    if (obj == "logistic") {
      model.objective = Objective::Logistic;
    } else if (obj == "squared_log_value") {
      model.objective = Objective::SquaredLogValue;
    } else {
      throw DataError("DPRT-GBT: unknown objective '" + obj + "'");
    }
  }
  {
    std::istringstream ss(next_line());
    std::string tag, v;
    ss >> tag >> v;
    if (tag != "base_score") throw DataError("DPRT-GBT: expected base_score");
    model.base_score = parse_double(v);
  }
  next_line();  // config echo, informational
  size_t n_trees = 0;
  {
    std::istringstream ss(next_line());
    std::string tag;
    ss >> tag >> model.n_features;
    if (tag != "n_features") throw DataError("DPRT-GBT: expected n_features");
  }
  {
    std::istringstream ss(next_line());
    std::string tag;
    ss >> tag >> n_trees;
    if (tag != "n_trees") throw DataError("DPRT-GBT: expected n_trees");
  }
  model.trees.resize(n_trees);
  for (size_t t = 0; t < n_trees; ++t) {
    std::istringstream ss(next_line());
    std::string tag;
    size_t index = 0, n_nodes = 0;
    ss >> tag >> index >> n_nodes;
    if (tag != "tree" || index != t) throw DataError("DPRT-GBT: bad tree header");
    model.trees[t].nodes.resize(n_nodes);
    for (size_t k = 0; k < n_nodes; ++k) {
      std::istringstream ns(next_line());
      std::string kind;
      ns >> kind;
      TreeNode& nd = model.trees[t].nodes[k];
      if (kind == "leaf") {
        std::string w;
        ns >> w;
        nd.weight = parse_double(w);
      } else if (kind == "split") {
        std::string thr;
        ns >> nd.feature >> thr >> nd.left >> nd.right;
        nd.threshold = parse_double(thr);
        if (nd.feature < 0 || nd.left < 0 || nd.right < 0 ||
            nd.left >= static_cast<int>(n_nodes) ||
            nd.right >= static_cast<int>(n_nodes)) {
          throw DataError("DPRT-GBT: bad split node");
        }
      } else {
        throw DataError("DPRT-GBT: unknown node kind '" + kind + "'");
      }
    }
  }
  return model;
}

void save_ensemble_file(const Ensemble& model, const BoostConfig& config,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  save_ensemble(model, config, out);
}

Ensemble load_ensemble_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_ensemble(in);
}

}  // namespace dprt::gbdt
