#include "dprt/embed/embedding_io.hpp"

#include <fstream>
#include <sstream>

namespace dprt::embed {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

void expect_header(const std::vector<std::string>& tok, const std::string& magic,
                   int fields) {
  if (static_cast<int>(tok.size()) != fields || tok[0] != magic || tok[1] != "1") {
    throw DataError("bad header for " + magic + " file");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

}  // namespace

void save_embeddings(const SkipGramModel& model, std::ostream& out) {
  out << "DPRT-EMB 1 " << model.vocab.size() << ' ' << model.dim << '\n';
  for (int i = 0; i < model.vocab.size(); ++i) {
    out << model.vocab.ids[i];
    for (double v : model.input_row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
}

SkipGramModel load_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty embedding file");
  auto tok = split_ws(line);
  expect_header(tok, "DPRT-EMB", 4);
  const int L = std::stoi(tok[2]);
  const int d = std::stoi(tok[3]);
  if (L < 0 || d < 1) throw DataError("bad embedding dimensions");
  SkipGramModel model;
  model.dim = d;
  model.input.resize(static_cast<size_t>(L) * d);
  model.output.assign(static_cast<size_t>(L) * d, 0.0);
  for (int i = 0; i < L; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated embedding file");
    auto parts = split_ws(line);
    if (static_cast<int>(parts.size()) != d + 1) {
      throw DataError("embedding row " + std::to_string(i) + " has wrong arity");
    }
    model.vocab.index.emplace(parts[0], i);
    model.vocab.ids.push_back(parts[0]);
    model.vocab.frequencies.push_back(0);
    for (int k = 0; k < d; ++k) {
      model.input[static_cast<size_t>(i) * d + k] = parse_double(parts[k + 1]);
    }
  }
  return model;
}

void save_destination_embeddings(const DestinationEmbeddings& d, std::ostream& out) {
  out << "DPRT-DST 1 " << d.vectors.size() << ' ' << d.dim << '\n';
  for (const auto& [dest, vec] : d.vectors) {
    out << dest;
    for (double v : vec) out << ' ' << format_double(v);
    out << '\n';
  }
}

DestinationEmbeddings load_destination_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty destination file");
  auto tok = split_ws(line);
  expect_header(tok, "DPRT-DST", 4);
  const int D = std::stoi(tok[2]);
  const int dim = std::stoi(tok[3]);
  DestinationEmbeddings out;
  out.dim = dim;
  for (int i = 0; i < D; ++i) {
    if (!std::getline(in, line)) throw DataError("truncated destination file");
    auto parts = split_ws(line);
    if (static_cast<int>(parts.size()) != dim + 1) {
      throw DataError("destination row " + std::to_string(i) + " has wrong arity");
    }
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = parse_double(parts[k + 1]);
    out.vectors.emplace(parts[0], std::move(v));
  }
  return out;
}

void save_embeddings_file(const SkipGramModel& model, const std::string& path) {
  auto out = open_out(path);
  save_embeddings(model, out);
}

SkipGramModel load_embeddings_file(const std::string& path) {
  auto in = open_in(path);
  return load_embeddings(in);
}

void save_destination_embeddings_file(const DestinationEmbeddings& d,
                                      const std::string& path) {
  auto out = open_out(path);
  save_destination_embeddings(d, out);
}

DestinationEmbeddings load_destination_embeddings_file(const std::string& path) {
  auto in = open_in(path);
  return load_destination_embeddings(in);
}

}  // namespace dprt::embed
