#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dprt/embed/vocab.hpp"
#include "dprt/mathutil.hpp"

namespace dprt::embed {

enum class NegativeDistribution {
  UnigramPow075,  // frequency^0.75, normalized
  Uniform,
};

struct SkipGramConfig {
  int dim = 32;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  double subsample_threshold = 1e-4;
  int min_count = 5;
  uint64_t seed = 42;
  int threads = 1;  // 1 = deterministic; >1 = lock-free racy updates
  NegativeDistribution negative_distribution = NegativeDistribution::UnigramPow075;
};

/// Input and output vector tables over the vocabulary. Input rows are the
/// final listing representation.
struct SkipGramModel {
  Vocabulary vocab;
  int dim = 0;
  std::vector<double> input;   // L x dim, row-major
  std::vector<double> output;  // L x dim, row-major

  std::span<const double> input_row(int i) const {
    return {input.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
  }
  std::span<const double> output_row(int i) const {
    return {output.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
  }
};

/// Keep probability for a listing during pair generation:
/// min(1, sqrt(t / relative_frequency)).
double keep_probability(int64_t freq, int64_t total, double threshold);

/// All (center, context) pairs within a window of c kept positions.
/// Window offsets run over the original positions; dropped positions
/// neither emit pairs nor serve as context.
std::vector<std::pair<int, int>> generate_pairs(const std::vector<int>& sequence,
                                                int window,
                                                const std::vector<bool>& keep);

/// Full-softmax probability p(context | center), max-shifted.
double softmax_probability(const SkipGramModel& model, int center, int context);

/// Negative sampler over the vocabulary.
class NegativeSampler {
 public:
  NegativeSampler(const Vocabulary& vocab, NegativeDistribution dist);
  /// Draws one index != positive. Returns -1 when that is impossible.
  int sample(Rng& rng, int positive) const;

 private:
  std::vector<double> cumulative_;
};

/// One gradient-ascent step of the negative-sampling objective
///   log sigmoid(out[pos].in[c]) + sum_neg log(1 - sigmoid(out[neg].in[c]))
/// touching only the center input row and the k+1 output rows.
void sgns_step(SkipGramModel& model, int center, int positive,
               std::span<const int> negatives, double lr);

/// Train listing embeddings over session listing sequences. Deterministic
/// for a fixed seed when threads == 1.
SkipGramModel train_skipgram(const std::vector<Session>& sessions,
                             const SkipGramConfig& config);

}  // namespace dprt::embed
