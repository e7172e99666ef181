#pragma once

#include <iosfwd>
#include <string>

#include "dprt/nn/combiner.hpp"

namespace dprt::nn {

/// Parameter file: header "DPRT-NN 1 <kind> <input_dim> <hidden> <pick_seed>"
/// followed by named tensors ("tensor <name> <rows> <cols>" + row-major
/// decimal rows). Values round-trip exactly.
void save_combiner(const CombinerParams& p, std::ostream& out);
CombinerParams load_combiner(std::istream& in);
void save_combiner_file(const CombinerParams& p, const std::string& path);
CombinerParams load_combiner_file(const std::string& path);

}  // namespace dprt::nn
