#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dprt {

using Vec = std::vector<double>;

/// Input that violates an ingestion contract: bad log lines, empty
/// vocabularies, malformed model files. Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

double stable_sigmoid(double x);

/// Clamp a probability into [1e-12, 1 - 1e-12] so log terms stay finite.
double clamp_prob(double p);

/// -[y log p + (1-y) log(1-p)] with p clamped.
double binary_cross_entropy(double p, int label);

/// Deterministic random source. Every draw is derived from mt19937_64 output
/// with explicit arithmetic, so a seed fixes the sequence independently of
/// standard-library distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1).
  double real01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  /// Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  /// Poisson draw by inversion of exponential waits (fine for small means).
  int poisson(double mean);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64(const std::string& s);

/// Derive an independent seed for a named sub-stream of a master seed.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

/// Shortest-exact decimal text for a double (round-trips bit-for-bit).
std::string format_double(double v);

/// Strict string-to-double; throws DataError on trailing garbage.
double parse_double(const std::string& s);

double haversine_km(double lat1, double lon1, double lat2, double lon2);

double dot(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ranks 1..n with tied values sharing their average rank.
std::vector<double> midranks(const std::vector<double>& v);

/// Spearman rank correlation (midranks on both sides). Requires n >= 2.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dprt
