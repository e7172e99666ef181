#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "dprt/nn/combiner.hpp"
#include "dprt/nn/combiner_io.hpp"
#include "oracles.hpp"

using namespace dprt;
using namespace dprt::nn;

namespace {

std::vector<Vec> random_seq(Rng& rng, int len, int dim) {
  std::vector<Vec> seq(len, Vec(dim));
  for (Vec& v : seq) {
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
  }
  return seq;
}

std::vector<SequenceExample> random_dataset(Rng& rng, int n, int dim) {
  std::vector<SequenceExample> data;
  for (int i = 0; i < n; ++i) {
    data.push_back({random_seq(rng, 1 + static_cast<int>(rng.below(4)), dim),
                    static_cast<int>(rng.below(2))});
  }
  return data;
}

// Central-difference check of combiner_loss_and_grad over every coordinate.
double max_gradient_rel_err(CombinerKind kind, int input_dim, int hidden,
                            uint64_t seed) {
  Rng rng(seed);
  const std::vector<SequenceExample> data = random_dataset(rng, 6, input_dim);
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});

  CombinerParams params = init_combiner(kind, input_dim, hidden, seed);
  CombinerParams grad = params;
  set_flat_params(grad, Vec(flatten_params(params).size(), 0.0));
  combiner_loss_and_grad(params, data, idx, &grad);
  const Vec analytic = flatten_params(grad);

  Vec theta = flatten_params(params);
  const double delta = 1e-5;
  double worst = 0.0;
  for (size_t k = 0; k < theta.size(); ++k) {
    CombinerParams probe = params;
    Vec t = theta;
    t[k] += delta;
    set_flat_params(probe, t);
    const double up = combiner_loss_and_grad(probe, data, idx, nullptr);
    t[k] -= 2.0 * delta;
    set_flat_params(probe, t);
    const double down = combiner_loss_and_grad(probe, data, idx, nullptr);
    const double fd = (up - down) / (2.0 * delta);
    worst = std::max(worst, oracles::rel_err(analytic[k], fd, 1e-6));
  }
  return worst;
}

}  // namespace

TEST_CASE("combine_random basics and chi-square uniformity") {
  const std::vector<Vec> seq = {{1.0, 2.0}};
  CHECK(combine_random(seq, 99) == seq[0]);

  Rng rng(4);
  const std::vector<Vec> eight = random_seq(rng, 8, 2);
  CHECK(combine_random(eight, 7) == combine_random(eight, 7));

  std::vector<int> counts(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Vec pick = combine_random(eight, mix_seed(1234, i));
    for (int k = 0; k < 8; ++k) {
      if (pick == eight[k]) {
        ++counts[k];
        break;
      }
    }
  }
  const double expected = draws / 8.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 18.4753);  // chi-square critical value, 7 df, alpha = 0.01

  CHECK_THROWS_AS(combine_random({}, 1), std::invalid_argument);
}

TEST_CASE("combine_average singleton, cancellation and brute force") {
  const Vec v = {0.5, -2.0, 3.0};
  CHECK(combine_average(std::vector<Vec>{v}) == v);

  Vec neg = v;
  for (double& x : neg) x = -x;
  const Vec zero = combine_average(std::vector<Vec>{v, neg});
  for (double x : zero) CHECK(x == 0.0);

  Rng rng(8);
  const std::vector<Vec> seq = random_seq(rng, 7, 5);
  const Vec mean = combine_average(seq);
  for (int k = 0; k < 5; ++k) {
    double s = 0.0;
    for (const Vec& x : seq) s += x[k];
    CHECK(mean[k] == doctest::Approx(s / 7.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(combine_average({}), std::invalid_argument);
}

TEST_CASE("dan_forward with all-zero parameters gives probability one half") {
  CombinerParams p = init_combiner(CombinerKind::DAN, 4, 0, 3);
  set_flat_params(p, Vec(flatten_params(p).size(), 0.0));
  Rng rng(2);
  const auto f = dan_forward(p, random_seq(rng, 3, 4));
  CHECK(f.logit == 0.0);
  CHECK(stable_sigmoid(f.logit) == doctest::Approx(0.5));
}

TEST_CASE("dan_forward matches a pencil-and-paper pass") {
  CombinerParams p = init_combiner(CombinerKind::DAN, 2, 0, 1);
  // 2 -> 4 -> 1 -> 1 network, hand-set
  p.w3.a = {1, 0, 0, 1, -1, 1, 0.5, 0.5};
  p.b3 = {0.1, -0.2, 0.0, 0.3};
  p.w2.a = {0.2, -0.3, 0.4, 1.0};
  p.b2 = {-0.05};
  p.w1 = {2.0};
  p.b1 = -0.1;
  const std::vector<Vec> seq = {{0.5, -1.0}};
  const auto f = dan_forward(p, seq);
  // hand computation:
  //   z2 = (0.6, -1.2, -1.5, 0.05), h2 = (0.6, 0, 0, 0.05)
  //   z1 = 0.2*0.6 + 1.0*0.05 - 0.05 = 0.12
  //   logit = 2*0.12 - 0.1 = 0.14
  CHECK(f.h2[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(f.h2[1] == 0.0);
  CHECK(f.h2[2] == 0.0);
  CHECK(f.h2[3] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(f.h1[0] == doctest::Approx(0.12).epsilon(1e-12));
  CHECK(f.logit == doctest::Approx(0.14).epsilon(1e-12));
}

TEST_CASE("dan logit scales linearly on a fixed positive activation pattern") {
  CombinerParams p = init_combiner(CombinerKind::DAN, 3, 0, 5);
  // positive weights, zero biases keep every relu active for positive input
  for (double& x : p.w3.a) x = std::fabs(x);
  for (double& x : p.w2.a) x = std::fabs(x);
  for (double& x : p.w1) x = std::fabs(x);
  std::fill(p.b3.begin(), p.b3.end(), 0.0);
  std::fill(p.b2.begin(), p.b2.end(), 0.0);
  p.b1 = 0.0;
  const std::vector<Vec> seq = {{0.2, 0.7, 0.4}};
  const double base = dan_forward(p, seq).logit;
  for (double lambda : {0.5, 2.0, 7.0}) {
    std::vector<Vec> scaled = seq;
    for (double& x : scaled[0]) x *= lambda;
    CHECK(dan_forward(p, scaled).logit == doctest::Approx(lambda * base).epsilon(1e-10));
  }
}

TEST_CASE("lstm_forward dead cell and tanh-sigmoid bound") {
  CombinerParams p = init_combiner(CombinerKind::LSTM, 3, 4, 6);
  set_flat_params(p, Vec(flatten_params(p).size(), 0.0));
  Rng rng(9);
  const auto seq = random_seq(rng, 5, 3);
  const auto f = lstm_forward(p, seq);
  for (const Vec& h : f.h) {
    for (double x : h) CHECK(x == 0.0);
  }

  CombinerParams q = init_combiner(CombinerKind::LSTM, 3, 4, 7);
  for (double& x : q.wf.a) x *= 10.0;  // exaggerate; bound must still hold
  const auto g = lstm_forward(q, seq);
  for (const Vec& h : g.h) {
    for (double x : h) CHECK(std::fabs(x) <= 1.0);
  }
}

TEST_CASE("lstm_forward matches a scalar hand computation") {
  CombinerParams p = init_combiner(CombinerKind::LSTM, 1, 1, 1);
  p.wf.a = {0.3, 0.5};
  p.bf = {0.2};
  p.wi.a = {-0.2, 0.4};
  p.bi = {-0.1};
  p.wo.a = {0.1, -0.3};
  p.bo = {0.05};
  p.wc.a = {0.6, 0.8};
  p.bc = {0.0};
  const std::vector<Vec> seq = {{0.7}};
  const auto f = lstm_forward(p, seq);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const double fg = sig(0.5 * 0.7 + 0.2);
  const double ig = sig(0.4 * 0.7 - 0.1);
  const double og = sig(-0.3 * 0.7 + 0.05);
  const double cand = std::tanh(0.8 * 0.7);
  const double c1 = ig * cand;  // c0 = 0 kills the forget term
  const double h1 = og * std::tanh(c1);
  CHECK(f.f[0][0] == doctest::Approx(fg).epsilon(1e-12));
  CHECK(f.c[0][0] == doctest::Approx(c1).epsilon(1e-12));
  CHECK(f.h[0][0] == doctest::Approx(h1).epsilon(1e-12));
}

TEST_CASE("attention_forward degenerate, uniform and brute-force cases") {
  CombinerParams p = init_combiner(CombinerKind::LSTMAttention, 2, 3, 11);
  Rng rng(12);

  const auto one = lstm_forward(p, random_seq(rng, 1, 2));
  const auto a1 = attention_forward(p.attn_w, one.h);
  CHECK(a1.alpha.size() == 1);
  CHECK(a1.alpha[0] == doctest::Approx(1.0));
  CHECK(a1.context == one.h[0]);

  std::vector<Vec> same(4, {0.3, -0.2, 0.9});
  const auto au = attention_forward(p.attn_w, same);
  for (double a : au.alpha) CHECK(a == doctest::Approx(0.25).epsilon(1e-12));

  std::vector<Vec> hidden = random_seq(rng, 5, 3);
  const auto at = attention_forward(p.attn_w, hidden);
  double alpha_sum = 0.0;
  for (double a : at.alpha) {
    CHECK(a >= 0.0);
    alpha_sum += a;
  }
  CHECK(alpha_sum == doctest::Approx(1.0).epsilon(1e-12));
  // explicit softmax recomputation
  std::vector<double> scores(5);
  double denom = 0.0;
  for (int t = 0; t < 5; ++t) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += p.attn_w[k] * std::tanh(hidden[t][k]);
    scores[t] = std::exp(s);
    denom += scores[t];
  }
  Vec expected(3, 0.0);
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 3; ++k) expected[k] += scores[t] / denom * hidden[t][k];
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(at.context[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match finite differences for every kind") {
  CHECK(max_gradient_rel_err(CombinerKind::Average, 5, 0, 101) < 1e-4);
  CHECK(max_gradient_rel_err(CombinerKind::Random, 5, 0, 102) < 1e-4);
  CHECK(max_gradient_rel_err(CombinerKind::DAN, 6, 0, 103) < 1e-4);
  CHECK(max_gradient_rel_err(CombinerKind::LSTM, 4, 3, 104) < 1e-4);
  CHECK(max_gradient_rel_err(CombinerKind::LSTMAttention, 4, 3, 105) < 1e-4);
}

TEST_CASE("forward passes are pure") {
  Rng rng(31);
  const auto seq = random_seq(rng, 4, 6);
  for (CombinerKind kind : {CombinerKind::Random, CombinerKind::Average,
                            CombinerKind::DAN, CombinerKind::LSTM,
                            CombinerKind::LSTMAttention}) {
    const CombinerParams p = init_combiner(kind, 6, 3, 77);
    const CombinerOutput a = combiner_forward(p, seq, 5);
    const CombinerOutput b = combiner_forward(p, seq, 5);
    CHECK(a.logit == b.logit);
    CHECK(a.embedding == b.embedding);
  }
}

TEST_CASE("average is permutation-invariant; the LSTM is order-sensitive") {
  Rng rng(41);
  std::vector<Vec> seq = random_seq(rng, 5, 3);
  std::vector<Vec> reversed(seq.rbegin(), seq.rend());
  const Vec a = combine_average(seq);
  const Vec b = combine_average(reversed);
  for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));

  const CombinerParams p = init_combiner(CombinerKind::LSTM, 3, 3, 42);
  const Vec hf = lstm_forward(p, seq).h.back();
  const Vec hr = lstm_forward(p, reversed).h.back();
  double max_diff = 0.0;
  for (size_t k = 0; k < hf.size(); ++k) max_diff = std::max(max_diff, std::fabs(hf[k] - hr[k]));
  CHECK(max_diff > 1e-9);
}

TEST_CASE("export_traveler_embedding per kind and readout replay") {
  Rng rng(51);
  const auto seq = random_seq(rng, 4, 4);

  const CombinerParams avg = init_combiner(CombinerKind::Average, 4, 0, 1);
  CHECK(export_traveler_embedding(avg, seq) == combine_average(seq));

  CombinerParams dan = init_combiner(CombinerKind::DAN, 4, 0, 2);
  set_flat_params(dan, Vec(flatten_params(dan).size(), 0.0));
  const Vec dead = export_traveler_embedding(dan, seq);
  CHECK(static_cast<int>(dead.size()) == traveler_embedding_dim(dan));
  for (double x : dead) CHECK(x == 0.0);

  for (CombinerKind kind : {CombinerKind::Average, CombinerKind::Random,
                            CombinerKind::LSTM, CombinerKind::LSTMAttention}) {
    const CombinerParams p = init_combiner(kind, 4, 3, 53);
    const CombinerOutput out = combiner_forward(p, seq, 9);
    CHECK(out.logit == doctest::Approx(dot(p.ro_w, out.embedding) + p.ro_b).epsilon(1e-12));
  }
  const CombinerParams p = init_combiner(CombinerKind::DAN, 4, 0, 54);
  const CombinerOutput out = combiner_forward(p, seq);
  CHECK(out.logit == doctest::Approx(dot(p.w1, out.embedding) + p.b1).epsilon(1e-12));
}

TEST_CASE("train_combiner fits a linearly separable toy set with a DAN") {
  Rng rng(61);
  std::vector<SequenceExample> data;
  for (int i = 0; i < 80; ++i) {
    const int label = i % 2;
    std::vector<Vec> seq = random_seq(rng, 3, 4);
    for (Vec& v : seq) v[0] = (label == 1 ? 1.0 : -1.0) + 0.1 * rng.normal();
    data.push_back({std::move(seq), label});
  }
  CombinerTrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.val_fraction = 0.0;
  cfg.seed = 5;
  const CombinerParams p = train_combiner(CombinerKind::DAN, data, 4, 0, cfg);
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  CHECK(combiner_loss_and_grad(p, data, idx, nullptr) < 0.1);
}

TEST_CASE("train_combiner on constant labels converges to the base rate") {
  Rng rng(71);
  std::vector<SequenceExample> data;
  for (int i = 0; i < 40; ++i) data.push_back({random_seq(rng, 2, 3), 1});
  CombinerTrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.batch_size = 8;
  cfg.val_fraction = 0.0;
  cfg.seed = 6;
  const CombinerParams p = train_combiner(CombinerKind::Average, data, 3, 0, cfg);
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  CHECK(combiner_loss_and_grad(p, data, idx, nullptr) < 0.1);
  for (const SequenceExample& ex : data) {
    CHECK(stable_sigmoid(combiner_forward(p, ex.seq).logit) > 0.85);
  }
}

TEST_CASE("train_combiner rejects bad labels and empty sequences") {
  std::vector<SequenceExample> bad_label = {{{{0.1, 0.2}}, 2}};
  CombinerTrainConfig cfg;
  CHECK_THROWS_AS(train_combiner(CombinerKind::Average, bad_label, 2, 0, cfg),
                  std::invalid_argument);
  std::vector<SequenceExample> empty_seq = {{{}, 1}};
  CHECK_THROWS_AS(train_combiner(CombinerKind::Average, empty_seq, 2, 0, cfg),
                  std::invalid_argument);
}

TEST_CASE("train_combiner is deterministic for a fixed seed") {
  Rng rng(81);
  std::vector<SequenceExample> data;
  for (int i = 0; i < 30; ++i) data.push_back({random_seq(rng, 3, 3), i % 2});
  CombinerTrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.seed = 12;
  const CombinerParams a = train_combiner(CombinerKind::DAN, data, 3, 0, cfg);
  const CombinerParams b = train_combiner(CombinerKind::DAN, data, 3, 0, cfg);
  CHECK(flatten_params(a) == flatten_params(b));
}

TEST_CASE("combiner parameter files round-trip exactly") {
  Rng rng(91);
  const auto seq = random_seq(rng, 3, 4);
  for (CombinerKind kind : {CombinerKind::Random, CombinerKind::Average,
                            CombinerKind::DAN, CombinerKind::LSTM,
                            CombinerKind::LSTMAttention}) {
    const CombinerParams p = init_combiner(kind, 4, 3, 99);
    std::stringstream buf;
    save_combiner(p, buf);
    const CombinerParams back = load_combiner(buf);
    CHECK(back.kind == p.kind);
    CHECK(back.input_dim == p.input_dim);
    CHECK(back.pick_seed == p.pick_seed);
    CHECK(flatten_params(back) == flatten_params(p));
    const CombinerOutput a = combiner_forward(p, seq, 3);
    const CombinerOutput b = combiner_forward(back, seq, 3);
    CHECK(a.logit == b.logit);
  }
}
