#pragma once

#include <iosfwd>
#include <string>

#include "dprt/embed/destination.hpp"
#include "dprt/embed/skipgram.hpp"

namespace dprt::embed {

/// Listing embedding file: header "DPRT-EMB 1 <L> <d>" then L lines of
/// "listing_id v1 ... vd" in vocabulary index order. Values are written in
/// exact round-trip decimal form. Loading restores the input vectors; the
/// output table is zeroed (it is a training artifact).
void save_embeddings(const SkipGramModel& model, std::ostream& out);
SkipGramModel load_embeddings(std::istream& in);
void save_embeddings_file(const SkipGramModel& model, const std::string& path);
SkipGramModel load_embeddings_file(const std::string& path);

/// Destination embedding file: same layout with header "DPRT-DST 1 <D> <d>".
void save_destination_embeddings(const DestinationEmbeddings& d, std::ostream& out);
DestinationEmbeddings load_destination_embeddings(std::istream& in);
void save_destination_embeddings_file(const DestinationEmbeddings& d,
                                      const std::string& path);
DestinationEmbeddings load_destination_embeddings_file(const std::string& path);

}  // namespace dprt::embed
