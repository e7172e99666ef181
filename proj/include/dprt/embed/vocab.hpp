#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dprt/core/types.hpp"

namespace dprt::embed {

/// Listing vocabulary with dense indices assigned by descending frequency
/// (ties broken lexicographically by listing id).
struct Vocabulary {
  std::vector<std::string> ids;       // index -> listing id
  std::vector<int64_t> frequencies;   // index -> occurrences in the corpus
  std::unordered_map<std::string, int> index;
  int64_t total_views = 0;            // sum of retained frequencies

  int size() const { return static_cast<int>(ids.size()); }
  int lookup(const std::string& id) const {
    auto it = index.find(id);
    return it == index.end() ? -1 : it->second;
  }
};

/// Count listing occurrences over session listing sequences and drop
/// listings seen fewer than min_count times. Throws DataError when nothing
/// survives pruning.
Vocabulary build_vocab(const std::vector<Session>& sessions, int min_count);

}  // namespace dprt::embed
