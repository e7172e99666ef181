#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dprt/nn/linalg.hpp"

namespace dprt::nn {

enum class CombinerKind { Random, Average, DAN, LSTM, LSTMAttention };

const char* to_string(CombinerKind k);
std::optional<CombinerKind> parse_combiner_kind(const std::string& s);

/// Parameters for every combiner variant. Only the tensors of the active
/// kind are populated:
///   Random/Average    readout (ro_w over the combined vector, ro_b)
///   DAN               w3/b3 expansion, w2/b2 contraction, w1/b1 output
///   LSTM              four gate blocks (h x (h+d)) + readout over h_T
///   LSTMAttention     LSTM blocks + attn_w scores + readout over context
struct CombinerParams {
  CombinerKind kind = CombinerKind::Average;
  int input_dim = 0;
  int hidden = 0;         // LSTM hidden width
  uint64_t pick_seed = 0; // Random kind selection stream

  Matrix w3;
  Vec b3;
  Matrix w2;
  Vec b2;
  Vec w1;
  double b1 = 0.0;

  Matrix wf, wi, wo, wc;
  Vec bf, bi, bo, bc;

  Vec attn_w;

  Vec ro_w;
  double ro_b = 0.0;
};

/// Fresh parameters: uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases,
/// forget-gate bias 1.
CombinerParams init_combiner(CombinerKind kind, int input_dim, int hidden,
                             uint64_t seed);

/// Width of the exported traveler embedding for this parameter set.
int traveler_embedding_dim(const CombinerParams& p);

/// One sequence element chosen uniformly under the seed.
Vec combine_random(std::span<const Vec> seq, uint64_t seed);

/// Coordinate-wise mean of the sequence.
Vec combine_average(std::span<const Vec> seq);

struct DanForward {
  Vec mean;
  Vec z2, h2;  // expansion pre-activation / relu output (2d)
  Vec z1, h1;  // contraction pre-activation / relu output (d/2)
  double logit = 0.0;
};
DanForward dan_forward(const CombinerParams& p, std::span<const Vec> seq);

struct LstmForward {
  std::vector<Vec> h, c;           // states, one per step
  std::vector<Vec> f, i, o, g;     // gate activations, kept for backward
};
LstmForward lstm_forward(const CombinerParams& p, std::span<const Vec> seq);

struct AttentionForward {
  Vec alpha;    // weights over steps, non-negative, sum 1
  Vec context;  // sum_t alpha_t h_t
};
AttentionForward attention_forward(const Vec& attn_w, const std::vector<Vec>& hidden);

struct CombinerOutput {
  double logit = 0.0;
  Vec embedding;
};

/// Forward pass for any kind. pick_salt individualizes the Random kind's
/// draw (e.g. a traveler-id hash); other kinds ignore it.
CombinerOutput combiner_forward(const CombinerParams& p, std::span<const Vec> seq,
                                uint64_t pick_salt = 0);

/// The penultimate representation exported as features: DAN -> h1,
/// LSTM -> h_T, LSTMAttention -> context, Average/Random -> combined vector.
Vec export_traveler_embedding(const CombinerParams& p, std::span<const Vec> seq,
                              uint64_t pick_salt = 0);

struct SequenceExample {
  std::vector<Vec> seq;
  int label = 0;  // 0/1
};

struct CombinerTrainConfig {
  int max_epochs = 100;
  double base_lr = 0.05;   // adaptive per-coordinate scaling on top
  int batch_size = 64;
  double val_fraction = 0.2;
  int patience = 3;        // epochs of no validation improvement
  uint64_t seed = 1;
};

/// Mean binary cross entropy over the indexed examples; accumulates the
/// gradient into *grad (same shapes as p) when grad is non-null. The
/// Random kind's pick for example i is derived from (p.pick_seed, i), so
/// gradients are well defined and repeatable.
double combiner_loss_and_grad(const CombinerParams& p,
                              const std::vector<SequenceExample>& data,
                              std::span<const size_t> indices,
                              CombinerParams* grad);

/// All trainable coordinates in a fixed documented order.
Vec flatten_params(const CombinerParams& p);
void set_flat_params(CombinerParams& p, std::span<const double> flat);

/// Minimize mean BCE with per-coordinate accumulated-squared-gradient
/// scaling; early stop after `patience` epochs without validation
/// improvement, returning the best-validation parameters.
CombinerParams train_combiner(CombinerKind kind,
                              const std::vector<SequenceExample>& data,
                              int input_dim, int hidden,
                              const CombinerTrainConfig& config);

}  // namespace dprt::nn
