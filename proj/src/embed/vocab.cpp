#include "dprt/embed/vocab.hpp"

#include <algorithm>

#include "dprt/mathutil.hpp"

namespace dprt::embed {

Vocabulary build_vocab(const std::vector<Session>& sessions, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, int64_t> counts;
  for (const Session& s : sessions) {
    for (const std::string& id : s.listing_sequence) ++counts[id];
  }
  std::vector<std::pair<std::string, int64_t>> kept;
  kept.reserve(counts.size());
  for (const auto& [id, c] : counts) {
    if (c >= min_count) kept.emplace_back(id, c);
  }
  if (kept.empty()) {
    throw DataError("build_vocab: vocabulary empty after pruning at min_count=" +
                    std::to_string(min_count));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.ids.reserve(kept.size());
  v.frequencies.reserve(kept.size());
  for (const auto& [id, c] : kept) {
    v.index.emplace(id, static_cast<int>(v.ids.size()));
    v.ids.push_back(id);
    v.frequencies.push_back(c);
    v.total_views += c;
  }
  return v;
}

}  // namespace dprt::embed
