#include "dprt/embed/skipgram.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace dprt::embed {

double keep_probability(int64_t freq, int64_t total, double threshold) {
  if (freq < 1 || total < freq || threshold <= 0.0) {
    throw std::invalid_argument("keep_probability: need 1 <= freq <= total, t > 0");
  }
  const double rel = static_cast<double>(freq) / static_cast<double>(total);
  return std::min(1.0, std::sqrt(threshold / rel));
}

std::vector<std::pair<int, int>> generate_pairs(const std::vector<int>& sequence,
                                                int window,
                                                const std::vector<bool>& keep) {
  if (window < 1) throw std::invalid_argument("generate_pairs: window must be >= 1");
  if (keep.size() != sequence.size()) {
    throw std::invalid_argument("generate_pairs: keep mask size mismatch");
  }
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(sequence.size());
  for (int i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    for (int j = -window; j <= window; ++j) {
      const int k = i + j;
      if (j == 0 || k < 0 || k >= n || !keep[k]) continue;
      pairs.emplace_back(sequence[i], sequence[k]);
    }
  }
  return pairs;
}

double softmax_probability(const SkipGramModel& model, int center, int context) {
  const int L = model.vocab.size();
  if (center < 0 || center >= L || context < 0 || context >= L) {
    throw std::invalid_argument("softmax_probability: index out of range");
  }
  std::vector<double> logits(L);
  double max_logit = -HUGE_VAL;
  for (int l = 0; l < L; ++l) {
    logits[l] = dot(model.output_row(l), model.input_row(center));
    max_logit = std::max(max_logit, logits[l]);
  }
  double denom = 0.0;
  for (int l = 0; l < L; ++l) denom += std::exp(logits[l] - max_logit);
  return std::exp(logits[context] - max_logit) / denom;
}

NegativeSampler::NegativeSampler(const Vocabulary& vocab,
                                 NegativeDistribution dist) {
  cumulative_.resize(vocab.size());
  double acc = 0.0;
  for (int i = 0; i < vocab.size(); ++i) {
    const double w = dist == NegativeDistribution::Uniform
                         ? 1.0
                         : std::pow(static_cast<double>(vocab.frequencies[i]), 0.75);
    acc += w;
    cumulative_[i] = acc;
  }
  for (double& c : cumulative_) c /= acc;
}

int NegativeSampler::sample(Rng& rng, int positive) const {
  if (cumulative_.size() < 2) return -1;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double u = rng.real01();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    int idx = static_cast<int>(it - cumulative_.begin());
    if (idx >= static_cast<int>(cumulative_.size())) {
      idx = static_cast<int>(cumulative_.size()) - 1;
    }
    if (idx != positive) return idx;
  }
  return -1;
}

void sgns_step(SkipGramModel& model, int center, int positive,
               std::span<const int> negatives, double lr) {
  const int d = model.dim;
  double* in = model.input.data() + static_cast<size_t>(center) * d;
  std::vector<double> in_grad(d, 0.0);

  auto update_output = [&](int row, double label) {
    double* out = model.output.data() + static_cast<size_t>(row) * d;
    double score = 0.0;
    for (int k = 0; k < d; ++k) score += out[k] * in[k];
    // g = label - sigma(score): ascent direction for both row kinds
    const double g = (label - stable_sigmoid(score)) * lr;
    for (int k = 0; k < d; ++k) {
      in_grad[k] += g * out[k];
      out[k] += g * in[k];
    }
  };

  update_output(positive, 1.0);
  for (int neg : negatives) {
    if (neg >= 0 && neg != positive) update_output(neg, 0.0);
  }
  for (int k = 0; k < d; ++k) in[k] += in_grad[k];
}

namespace {

struct IndexedCorpus {
  std::vector<std::vector<int>> sequences;
  int64_t total_positions = 0;
};

IndexedCorpus index_corpus(const std::vector<Session>& sessions,
                           const Vocabulary& vocab) {
  IndexedCorpus c;
  for (const Session& s : sessions) {
    std::vector<int> seq;
    seq.reserve(s.listing_sequence.size());
    for (const std::string& id : s.listing_sequence) {
      const int idx = vocab.lookup(id);
      if (idx >= 0) seq.push_back(idx);
    }
    if (seq.size() >= 1) {
      c.total_positions += static_cast<int64_t>(seq.size());
      c.sequences.push_back(std::move(seq));
    }
  }
  return c;
}

}  // namespace

SkipGramModel train_skipgram(const std::vector<Session>& sessions,
                             const SkipGramConfig& config) {
  if (config.dim < 1 || config.window < 1 || config.negatives < 1 ||
      config.epochs < 1 || config.learning_rate <= 0.0 ||
      config.subsample_threshold <= 0.0 || config.min_count < 1) {
    throw std::invalid_argument("train_skipgram: invalid config");
  }
  SkipGramModel model;
  model.vocab = build_vocab(sessions, config.min_count);
  model.dim = config.dim;
  const int L = model.vocab.size();
  const int d = config.dim;
  model.input.resize(static_cast<size_t>(L) * d);
  model.output.assign(static_cast<size_t>(L) * d, 0.0);
  {
    Rng init_rng(mix_seed(config.seed, 0));
    const double half = 0.5 / d;
    for (double& v : model.input) v = init_rng.uniform(-half, half);
  }

  const IndexedCorpus corpus = index_corpus(sessions, model.vocab);
  if (corpus.sequences.empty()) return model;

  std::vector<double> keep_prob(L);
  for (int i = 0; i < L; ++i) {
    keep_prob[i] = keep_probability(model.vocab.frequencies[i],
                                    model.vocab.total_views,
                                    config.subsample_threshold);
  }
  const NegativeSampler sampler(model.vocab, config.negative_distribution);
  const int64_t planned =
      corpus.total_positions * static_cast<int64_t>(config.epochs);
  std::atomic<int64_t> processed{0};

  auto worker = [&](size_t begin, size_t end, uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::vector<bool> keep;
    std::vector<int> negs(config.negatives);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      for (size_t s = begin; s < end; ++s) {
        const std::vector<int>& seq = corpus.sequences[s];
        const int64_t done = processed.fetch_add(
            static_cast<int64_t>(seq.size()), std::memory_order_relaxed);
        const double progress =
            static_cast<double>(done) / static_cast<double>(planned);
        const double lr =
            config.learning_rate * std::max(1e-4, 1.0 - progress);
        keep.resize(seq.size());
        for (size_t i = 0; i < seq.size(); ++i) {
          keep[i] = rng.real01() < keep_prob[seq[i]];
        }
        for (const auto& [center, context] : generate_pairs(seq, config.window, keep)) {
          int n_negs = 0;
          for (int k = 0; k < config.negatives; ++k) {
            const int neg = sampler.sample(rng, context);
            if (neg >= 0) negs[n_negs++] = neg;
          }
          sgns_step(model, center, context,
                    std::span<const int>(negs.data(), n_negs), lr);
        }
      }
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1 || corpus.sequences.size() < 2) {
    worker(0, corpus.sequences.size(), mix_seed(config.seed, 1));
  } else {
    std::vector<std::thread> pool;
    const size_t n = corpus.sequences.size();
    const size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const size_t begin = std::min(n, t * chunk);
      const size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end, mix_seed(config.seed, 1 + t));
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

}  // namespace dprt::embed
