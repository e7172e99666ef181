#include "dprt/nn/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dprt::nn {

const char* to_string(CombinerKind k) {
  switch (k) {
    case CombinerKind::Random: return "random";
    case CombinerKind::Average: return "average";
    case CombinerKind::DAN: return "dan";
    case CombinerKind::LSTM: return "lstm";
    case CombinerKind::LSTMAttention: return "lstm_attention";
  }
  return "?";
}

std::optional<CombinerKind> parse_combiner_kind(const std::string& s) {
  if (s == "random") return CombinerKind::Random;
  if (s == "average") return CombinerKind::Average;
  if (s == "dan") return CombinerKind::DAN;
  if (s == "lstm") return CombinerKind::LSTM;
  if (s == "lstm_attention") return CombinerKind::LSTMAttention;
  return std::nullopt;
}

namespace {

void glorot_fill(Vec& v, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& x : v) x = rng.uniform(-limit, limit);
}

void glorot_fill(Matrix& m, Rng& rng) {
  glorot_fill(m.a, m.cols, m.rows, rng);
}

int dan_wide_dim(int input_dim) { return 2 * input_dim; }
int dan_narrow_dim(int input_dim) { return std::max(1, input_dim / 2); }

bool uses_lstm(CombinerKind k) {
  return k == CombinerKind::LSTM || k == CombinerKind::LSTMAttention;
}

void check_seq(std::span<const Vec> seq, int input_dim, const char* who) {
  if (seq.empty()) throw std::invalid_argument(std::string(who) + ": empty sequence");
  for (const Vec& v : seq) {
    if (static_cast<int>(v.size()) != input_dim) {
      throw std::invalid_argument(std::string(who) + ": element dimension " +
                                  std::to_string(v.size()) + " != " +
                                  std::to_string(input_dim));
    }
  }
}

}  // namespace

CombinerParams init_combiner(CombinerKind kind, int input_dim, int hidden,
                             uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("init_combiner: input_dim must be >= 1");
  Rng rng(mix_seed(seed, 0x6e6e));
  CombinerParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.pick_seed = mix_seed(seed, 0x7069636b);
  switch (kind) {
    case CombinerKind::Random:
    case CombinerKind::Average:
      p.ro_w.assign(input_dim, 0.0);
      glorot_fill(p.ro_w, input_dim, 1, rng);
      break;
    case CombinerKind::DAN: {
      const int wide = dan_wide_dim(input_dim);
      const int narrow = dan_narrow_dim(input_dim);
      p.w3 = Matrix(wide, input_dim);
      p.b3.assign(wide, 0.0);
      p.w2 = Matrix(narrow, wide);
      p.b2.assign(narrow, 0.0);
      p.w1.assign(narrow, 0.0);
      glorot_fill(p.w3, rng);
      glorot_fill(p.w2, rng);
      glorot_fill(p.w1, narrow, 1, rng);
      break;
    }
    case CombinerKind::LSTM:
    case CombinerKind::LSTMAttention: {
      if (hidden < 1) throw std::invalid_argument("init_combiner: hidden must be >= 1");
      p.hidden = hidden;
      const int z = hidden + input_dim;
      for (Matrix* m : {&p.wf, &p.wi, &p.wo, &p.wc}) {
        *m = Matrix(hidden, z);
        glorot_fill(*m, rng);
      }
      p.bf.assign(hidden, 1.0);  // forget gate starts open
      p.bi.assign(hidden, 0.0);
      p.bo.assign(hidden, 0.0);
      p.bc.assign(hidden, 0.0);
      if (kind == CombinerKind::LSTMAttention) {
        p.attn_w.assign(hidden, 0.0);
        glorot_fill(p.attn_w, hidden, 1, rng);
      }
      p.ro_w.assign(hidden, 0.0);
      glorot_fill(p.ro_w, hidden, 1, rng);
      break;
    }
  }
  return p;
}

int traveler_embedding_dim(const CombinerParams& p) {
  switch (p.kind) {
    case CombinerKind::Random:
    case CombinerKind::Average: return p.input_dim;
    case CombinerKind::DAN: return dan_narrow_dim(p.input_dim);
    case CombinerKind::LSTM:
    case CombinerKind::LSTMAttention: return p.hidden;
  }
  return 0;
}

Vec combine_random(std::span<const Vec> seq, uint64_t seed) {
  if (seq.empty()) throw std::invalid_argument("combine_random: empty sequence");
  Rng rng(seed);
  return seq[static_cast<size_t>(rng.below(seq.size()))];
}

Vec combine_average(std::span<const Vec> seq) {
  if (seq.empty()) throw std::invalid_argument("combine_average: empty sequence");
  Vec mean(seq.front().size(), 0.0);
  for (const Vec& v : seq) {
    if (v.size() != mean.size()) {
      throw std::invalid_argument("combine_average: ragged sequence");
    }
    for (size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
  }
  for (double& m : mean) m /= static_cast<double>(seq.size());
  return mean;
}

DanForward dan_forward(const CombinerParams& p, std::span<const Vec> seq) {
  check_seq(seq, p.input_dim, "dan_forward");
  if (p.kind != CombinerKind::DAN) throw std::invalid_argument("dan_forward: wrong kind");
  DanForward f;
  f.mean = combine_average(seq);
  f.z2 = p.w3.multiply(f.mean);
  for (size_t i = 0; i < f.z2.size(); ++i) f.z2[i] += p.b3[i];
  f.h2 = f.z2;
  for (double& x : f.h2) x = std::max(0.0, x);
  f.z1 = p.w2.multiply(f.h2);
  for (size_t i = 0; i < f.z1.size(); ++i) f.z1[i] += p.b2[i];
  f.h1 = f.z1;
  for (double& x : f.h1) x = std::max(0.0, x);
  f.logit = dot(p.w1, f.h1) + p.b1;
  return f;
}

LstmForward lstm_forward(const CombinerParams& p, std::span<const Vec> seq) {
  check_seq(seq, p.input_dim, "lstm_forward");
  if (!uses_lstm(p.kind)) throw std::invalid_argument("lstm_forward: wrong kind");
  const int H = p.hidden;
  const int T = static_cast<int>(seq.size());
  LstmForward out;
  out.h.resize(T);
  out.c.resize(T);
  out.f.resize(T);
  out.i.resize(T);
  out.o.resize(T);
  out.g.resize(T);
  Vec z(H + p.input_dim, 0.0);
  for (int t = 0; t < T; ++t) {
    // z = [h_{t-1}; x_t]
    for (int k = 0; k < H; ++k) z[k] = t > 0 ? out.h[t - 1][k] : 0.0;
    for (int k = 0; k < p.input_dim; ++k) z[H + k] = seq[t][k];
    Vec af = p.wf.multiply(z), ai = p.wi.multiply(z), ao = p.wo.multiply(z),
        ag = p.wc.multiply(z);
    out.f[t].resize(H);
    out.i[t].resize(H);
    out.o[t].resize(H);
    out.g[t].resize(H);
    out.c[t].resize(H);
    out.h[t].resize(H);
    for (int k = 0; k < H; ++k) {
      out.f[t][k] = stable_sigmoid(af[k] + p.bf[k]);
      out.i[t][k] = stable_sigmoid(ai[k] + p.bi[k]);
      out.o[t][k] = stable_sigmoid(ao[k] + p.bo[k]);
      out.g[t][k] = std::tanh(ag[k] + p.bc[k]);
      const double c_prev = t > 0 ? out.c[t - 1][k] : 0.0;
      out.c[t][k] = out.f[t][k] * c_prev + out.i[t][k] * out.g[t][k];
      out.h[t][k] = out.o[t][k] * std::tanh(out.c[t][k]);
    }
  }
  return out;
}

AttentionForward attention_forward(const Vec& attn_w, const std::vector<Vec>& hidden) {
  if (hidden.empty()) throw std::invalid_argument("attention_forward: no hidden states");
  const size_t T = hidden.size();
  const size_t H = hidden.front().size();
  if (attn_w.size() != H) throw std::invalid_argument("attention_forward: weight size mismatch");
  AttentionForward out;
  out.alpha.resize(T);
  Vec scores(T);
  double max_score = -HUGE_VAL;
  for (size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (size_t k = 0; k < H; ++k) s += attn_w[k] * std::tanh(hidden[t][k]);
    scores[t] = s;
    max_score = std::max(max_score, s);
  }
  double denom = 0.0;
  for (size_t t = 0; t < T; ++t) {
    out.alpha[t] = std::exp(scores[t] - max_score);
    denom += out.alpha[t];
  }
  for (double& a : out.alpha) a /= denom;
  out.context.assign(H, 0.0);
  for (size_t t = 0; t < T; ++t) {
    for (size_t k = 0; k < H; ++k) out.context[k] += out.alpha[t] * hidden[t][k];
  }
  return out;
}

CombinerOutput combiner_forward(const CombinerParams& p, std::span<const Vec> seq,
                                uint64_t pick_salt) {
  CombinerOutput out;
  switch (p.kind) {
    case CombinerKind::Random: {
      out.embedding = combine_random(seq, mix_seed(p.pick_seed, pick_salt));
      out.logit = dot(p.ro_w, out.embedding) + p.ro_b;
      break;
    }
    case CombinerKind::Average: {
      out.embedding = combine_average(seq);
      out.logit = dot(p.ro_w, out.embedding) + p.ro_b;
      break;
    }
    case CombinerKind::DAN: {
      DanForward f = dan_forward(p, seq);
      out.embedding = std::move(f.h1);
      out.logit = f.logit;
      break;
    }
    case CombinerKind::LSTM: {
      LstmForward f = lstm_forward(p, seq);
      out.embedding = f.h.back();
      out.logit = dot(p.ro_w, out.embedding) + p.ro_b;
      break;
    }
    case CombinerKind::LSTMAttention: {
      LstmForward f = lstm_forward(p, seq);
      AttentionForward a = attention_forward(p.attn_w, f.h);
      out.embedding = std::move(a.context);
      out.logit = dot(p.ro_w, out.embedding) + p.ro_b;
      break;
    }
  }
  return out;
}

Vec export_traveler_embedding(const CombinerParams& p, std::span<const Vec> seq,
                              uint64_t pick_salt) {
  return combiner_forward(p, seq, pick_salt).embedding;
}

namespace {

CombinerParams zero_like(const CombinerParams& p) {
  CombinerParams g = p;
  auto zero_mat = [](Matrix& m) { std::fill(m.a.begin(), m.a.end(), 0.0); };
  auto zero_vec = [](Vec& v) { std::fill(v.begin(), v.end(), 0.0); };
  zero_mat(g.w3);
  zero_vec(g.b3);
  zero_mat(g.w2);
  zero_vec(g.b2);
  zero_vec(g.w1);
  g.b1 = 0.0;
  for (Matrix* m : {&g.wf, &g.wi, &g.wo, &g.wc}) zero_mat(*m);
  for (Vec* v : {&g.bf, &g.bi, &g.bo, &g.bc}) zero_vec(*v);
  zero_vec(g.attn_w);
  zero_vec(g.ro_w);
  g.ro_b = 0.0;
  return g;
}

// Backpropagation through the LSTM given per-step dL/dh contributions.
void lstm_backward(const CombinerParams& p, std::span<const Vec> seq,
                   const LstmForward& fw, const std::vector<Vec>& dh_extra,
                   CombinerParams* grad) {
  const int H = p.hidden;
  const int T = static_cast<int>(seq.size());
  Vec dh_rec(H, 0.0), dc_rec(H, 0.0);
  Vec z(H + p.input_dim), da_f(H), da_i(H), da_o(H), da_g(H);
  for (int t = T - 1; t >= 0; --t) {
    Vec dh = dh_extra[t];
    for (int k = 0; k < H; ++k) dh[k] += dh_rec[k];
    Vec dc = dc_rec;
    for (int k = 0; k < H; ++k) {
      const double tc = std::tanh(fw.c[t][k]);
      const double do_k = dh[k] * tc;
      dc[k] += dh[k] * fw.o[t][k] * (1.0 - tc * tc);
      const double c_prev = t > 0 ? fw.c[t - 1][k] : 0.0;
      const double df_k = dc[k] * c_prev;
      const double di_k = dc[k] * fw.g[t][k];
      const double dg_k = dc[k] * fw.i[t][k];
      da_f[k] = df_k * fw.f[t][k] * (1.0 - fw.f[t][k]);
      da_i[k] = di_k * fw.i[t][k] * (1.0 - fw.i[t][k]);
      da_o[k] = do_k * fw.o[t][k] * (1.0 - fw.o[t][k]);
      da_g[k] = dg_k * (1.0 - fw.g[t][k] * fw.g[t][k]);
      dc_rec[k] = dc[k] * fw.f[t][k];
    }
    for (int k = 0; k < H; ++k) z[k] = t > 0 ? fw.h[t - 1][k] : 0.0;
    for (int k = 0; k < p.input_dim; ++k) z[H + k] = seq[t][k];
    grad->wf.add_outer(da_f, z);
    grad->wi.add_outer(da_i, z);
    grad->wo.add_outer(da_o, z);
    grad->wc.add_outer(da_g, z);
    for (int k = 0; k < H; ++k) {
      grad->bf[k] += da_f[k];
      grad->bi[k] += da_i[k];
      grad->bo[k] += da_o[k];
      grad->bc[k] += da_g[k];
    }
    const Vec dzf = p.wf.multiply_transposed(da_f);
    const Vec dzi = p.wi.multiply_transposed(da_i);
    const Vec dzo = p.wo.multiply_transposed(da_o);
    const Vec dzg = p.wc.multiply_transposed(da_g);
    for (int k = 0; k < H; ++k) dh_rec[k] = dzf[k] + dzi[k] + dzo[k] + dzg[k];
  }
}

}  // namespace

double combiner_loss_and_grad(const CombinerParams& p,
                              const std::vector<SequenceExample>& data,
                              std::span<const size_t> indices,
                              CombinerParams* grad) {
  if (indices.empty()) throw std::invalid_argument("combiner_loss_and_grad: no examples");
  for (size_t idx : indices) {
    const int y = data[idx].label;
    if (y != 0 && y != 1) {
      throw std::invalid_argument("combiner_loss_and_grad: label must be 0 or 1");
    }
  }
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  for (size_t idx : indices) {
    const SequenceExample& ex = data[idx];
    std::span<const Vec> seq(ex.seq);
    switch (p.kind) {
      case CombinerKind::Random:
      case CombinerKind::Average: {
        const Vec v = p.kind == CombinerKind::Average
                          ? combine_average(seq)
                          : combine_random(seq, mix_seed(p.pick_seed, idx));
        const double prob = stable_sigmoid(dot(p.ro_w, v) + p.ro_b);
        loss += binary_cross_entropy(prob, ex.label) * inv_n;
        if (grad == nullptr) break;
        const double dlogit = (prob - ex.label) * inv_n;
        add_scaled(grad->ro_w, v, dlogit);
        grad->ro_b += dlogit;
        break;
      }
      case CombinerKind::DAN: {
        const DanForward f = dan_forward(p, seq);
        const double prob = stable_sigmoid(f.logit);
        loss += binary_cross_entropy(prob, ex.label) * inv_n;
        if (grad == nullptr) break;
        const double dlogit = (prob - ex.label) * inv_n;
        add_scaled(grad->w1, f.h1, dlogit);
        grad->b1 += dlogit;
        Vec dz1(f.z1.size());
        for (size_t k = 0; k < dz1.size(); ++k) {
          dz1[k] = f.z1[k] > 0.0 ? dlogit * p.w1[k] : 0.0;
        }
        grad->w2.add_outer(dz1, f.h2);
        add_scaled(grad->b2, dz1, 1.0);
        const Vec dh2 = p.w2.multiply_transposed(dz1);
        Vec dz2(f.z2.size());
        for (size_t k = 0; k < dz2.size(); ++k) {
          dz2[k] = f.z2[k] > 0.0 ? dh2[k] : 0.0;
        }
        grad->w3.add_outer(dz2, f.mean);
        add_scaled(grad->b3, dz2, 1.0);
        break;
      }
      case CombinerKind::LSTM: {
        const LstmForward f = lstm_forward(p, seq);
        const double prob = stable_sigmoid(dot(p.ro_w, f.h.back()) + p.ro_b);
        loss += binary_cross_entropy(prob, ex.label) * inv_n;
        if (grad == nullptr) break;
        const double dlogit = (prob - ex.label) * inv_n;
        add_scaled(grad->ro_w, f.h.back(), dlogit);
        grad->ro_b += dlogit;
        std::vector<Vec> dh_extra(seq.size(), Vec(p.hidden, 0.0));
        for (int k = 0; k < p.hidden; ++k) dh_extra.back()[k] = dlogit * p.ro_w[k];
        lstm_backward(p, seq, f, dh_extra, grad);
        break;
      }
      case CombinerKind::LSTMAttention: {
        const LstmForward f = lstm_forward(p, seq);
        const AttentionForward at = attention_forward(p.attn_w, f.h);
        const double prob = stable_sigmoid(dot(p.ro_w, at.context) + p.ro_b);
        loss += binary_cross_entropy(prob, ex.label) * inv_n;
        if (grad == nullptr) break;
        const double dlogit = (prob - ex.label) * inv_n;
        add_scaled(grad->ro_w, at.context, dlogit);
        grad->ro_b += dlogit;
        const int H = p.hidden;
        const int T = static_cast<int>(seq.size());
        Vec dctx(H);
        for (int k = 0; k < H; ++k) dctx[k] = dlogit * p.ro_w[k];
        Vec dalpha(T, 0.0);
        for (int t = 0; t < T; ++t) dalpha[t] = dot(dctx, f.h[t]);
        double weighted = 0.0;
        for (int t = 0; t < T; ++t) weighted += at.alpha[t] * dalpha[t];
        std::vector<Vec> dh_extra(T, Vec(H, 0.0));
        for (int t = 0; t < T; ++t) {
          const double ds = at.alpha[t] * (dalpha[t] - weighted);
          for (int k = 0; k < H; ++k) {
            const double th = std::tanh(f.h[t][k]);
            grad->attn_w[k] += ds * th;
            dh_extra[t][k] = at.alpha[t] * dctx[k] + ds * p.attn_w[k] * (1.0 - th * th);
          }
        }
        lstm_backward(p, seq, f, dh_extra, grad);
        break;
      }
    }
  }
  return loss;
}

namespace {

template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
  switch (p.kind) {
    case CombinerKind::Random:
    case CombinerKind::Average:
      fn(p.ro_w);
      fn(p.ro_b);
      break;
    case CombinerKind::DAN:
      fn(p.w3.a);
      fn(p.b3);
      fn(p.w2.a);
      fn(p.b2);
      fn(p.w1);
      fn(p.b1);
      break;
    case CombinerKind::LSTM:
    case CombinerKind::LSTMAttention:
      fn(p.wf.a);
      fn(p.bf);
      fn(p.wi.a);
      fn(p.bi);
      fn(p.wo.a);
      fn(p.bo);
      fn(p.wc.a);
      fn(p.bc);
      if (p.kind == CombinerKind::LSTMAttention) fn(p.attn_w);
      fn(p.ro_w);
      fn(p.ro_b);
      break;
  }
}

}  // namespace

Vec flatten_params(const CombinerParams& p) {
  Vec flat;
  visit_tensors(p, [&](const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, double>) {
      flat.push_back(t);
    } else {
      flat.insert(flat.end(), t.begin(), t.end());
    }
  });
  return flat;
}

void set_flat_params(CombinerParams& p, std::span<const double> flat) {
  size_t pos = 0;
  visit_tensors(p, [&](auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, double>) {
      t = flat[pos++];
    } else {
      for (double& x : t) x = flat[pos++];
    }
  });
  if (pos != flat.size()) {
    throw std::invalid_argument("set_flat_params: size mismatch");
  }
}

CombinerParams train_combiner(CombinerKind kind,
                              const std::vector<SequenceExample>& data,
                              int input_dim, int hidden,
                              const CombinerTrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("train_combiner: empty dataset");
  for (const SequenceExample& ex : data) {
    if (ex.seq.empty()) throw std::invalid_argument("train_combiner: empty sequence");
    if (ex.label != 0 && ex.label != 1) {
      throw std::invalid_argument("train_combiner: label must be 0 or 1");
    }
  }
  CombinerParams params = init_combiner(kind, input_dim, hidden, config.seed);

  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(config.seed, 0x7472));
  rng.shuffle(order);
  const size_t val_n = static_cast<size_t>(config.val_fraction * data.size());
  std::vector<size_t> val(order.end() - val_n, order.end());
  std::vector<size_t> train(order.begin(), order.end() - val_n);
  if (train.empty()) throw std::invalid_argument("train_combiner: no training examples");

  Vec theta = flatten_params(params);
  Vec accum(theta.size(), 0.0);
  CombinerParams best = params;
  double best_val = HUGE_VAL;
  int stale_epochs = 0;
  const int batch = std::max(1, config.batch_size);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(train);
    for (size_t start = 0; start < train.size(); start += batch) {
      const size_t end = std::min(train.size(), start + batch);
      CombinerParams grad = zero_like(params);
      combiner_loss_and_grad(params, data,
                             std::span<const size_t>(train.data() + start, end - start),
                             &grad);
      const Vec g = flatten_params(grad);
      for (size_t k = 0; k < theta.size(); ++k) {
        accum[k] += g[k] * g[k];
        theta[k] -= config.base_lr * g[k] / (std::sqrt(accum[k]) + 1e-8);
      }
      set_flat_params(params, theta);
    }
    if (!val.empty()) {
      const double val_bce = combiner_loss_and_grad(params, data, val, nullptr);
      if (val_bce < best_val - 1e-12) {
        best_val = val_bce;
        best = params;
        stale_epochs = 0;
      } else if (++stale_epochs >= config.patience) {
        return best;
      }
    }
  }
  return val.empty() ? params : best;
}

}  // namespace dprt::nn
