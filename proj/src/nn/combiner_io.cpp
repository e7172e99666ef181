#include "dprt/nn/combiner_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace dprt::nn {

namespace {

struct NamedTensor {
  std::string name;
  int rows;
  int cols;
  double* data;
};

std::vector<NamedTensor> tensor_table(CombinerParams& p) {
  std::vector<NamedTensor> t;
  auto mat = [&](const char* name, Matrix& m) {
    t.push_back({name, m.rows, m.cols, m.a.data()});
  };
  auto vec = [&](const char* name, Vec& v) {
    t.push_back({name, 1, static_cast<int>(v.size()), v.data()});
  };
  auto scalar = [&](const char* name, double& s) { t.push_back({name, 1, 1, &s}); };
  switch (p.kind) {
    case CombinerKind::Random:
    case CombinerKind::Average:
      vec("ro_w", p.ro_w);
      scalar("ro_b", p.ro_b);
      break;
    case CombinerKind::DAN:
      mat("w3", p.w3);
      vec("b3", p.b3);
      mat("w2", p.w2);
      vec("b2", p.b2);
      vec("w1", p.w1);
      scalar("b1", p.b1);
      break;
    case CombinerKind::LSTM:
    case CombinerKind::LSTMAttention:
      mat("wf", p.wf);
      vec("bf", p.bf);
      mat("wi", p.wi);
      vec("bi", p.bi);
      mat("wo", p.wo);
      vec("bo", p.bo);
      mat("wc", p.wc);
      vec("bc", p.bc);
      if (p.kind == CombinerKind::LSTMAttention) vec("attn_w", p.attn_w);
      vec("ro_w", p.ro_w);
      scalar("ro_b", p.ro_b);
      break;
  }
  return t;
}

}  // namespace

void save_combiner(const CombinerParams& p, std::ostream& out) {
  out << "DPRT-NN 1 " << to_string(p.kind) << ' ' << p.input_dim << ' '
      << p.hidden << ' ' << p.pick_seed << '\n';
  auto& mutable_p = const_cast<CombinerParams&>(p);
  for (const NamedTensor& t : tensor_table(mutable_p)) {
    out << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    for (int r = 0; r < t.rows; ++r) {
      for (int c = 0; c < t.cols; ++c) {
        if (c > 0) out << ' ';
        out << format_double(t.data[static_cast<size_t>(r) * t.cols + c]);
      }
      out << '\n';
    }
  }
}

CombinerParams load_combiner(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty combiner file");
  std::istringstream header(line);
  std::string magic, version, kind_str;
  int input_dim = 0, hidden = 0;
  uint64_t pick_seed = 0;
  header >> magic >> version >> kind_str >> input_dim >> hidden >> pick_seed;
  if (magic != "DPRT-NN" || version != "1") throw DataError("bad DPRT-NN header");
  const auto kind = parse_combiner_kind(kind_str);
  if (!kind) throw DataError("unknown combiner kind '" + kind_str + "'");
  CombinerParams p = init_combiner(*kind, input_dim,
                                   hidden > 0 ? hidden : 1, 0);
  p.hidden = hidden;
  p.pick_seed = pick_seed;
  for (const NamedTensor& t : tensor_table(p)) {
    if (!std::getline(in, line)) throw DataError("truncated combiner file");
    std::istringstream ts(line);
    std::string tag, name;
    int rows = 0, cols = 0;
    ts >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != t.name || rows != t.rows || cols != t.cols) {
      throw DataError("combiner file: expected tensor " + std::string(t.name) +
                      " " + std::to_string(t.rows) + "x" + std::to_string(t.cols) +
                      ", got '" + line + "'");
    }
    for (int r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw DataError("truncated combiner tensor");
      std::istringstream rs(line);
      std::string tok;
      for (int c = 0; c < cols; ++c) {
        if (!(rs >> tok)) throw DataError("short tensor row in combiner file");
        t.data[static_cast<size_t>(r) * cols + c] = parse_double(tok);
      }
    }
  }
  return p;
}

void save_combiner_file(const CombinerParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  save_combiner(p, out);
}

CombinerParams load_combiner_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_combiner(in);
}

}  // namespace dprt::nn
