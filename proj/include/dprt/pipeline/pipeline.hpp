#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dprt/core/features.hpp"
#include "dprt/core/ndjson.hpp"
#include "dprt/core/sessionize.hpp"
#include "dprt/embed/destination.hpp"
#include "dprt/embed/skipgram.hpp"
#include "dprt/funnel/buckets.hpp"
#include "dprt/gbdt/gbdt.hpp"
#include "dprt/metrics/metrics.hpp"
#include "dprt/nn/combiner.hpp"

namespace dprt::pipe {

struct PipelineConfig {
  std::string events_path;
  std::string out_dir;  // empty: keep artifacts in memory only

  int64_t boundary_ms = 0;  // 0: midpoint between first and last event
  int64_t session_gap_ms = kDefaultSessionGapMs;
  int64_t bot_max_events_per_hour = 500;

  nn::CombinerKind combiner = nn::CombinerKind::DAN;
  bool use_embeddings = true;
  int lstm_hidden = 32;
  int max_seq = 50;  // most recent listings kept per traveler

  int n_buckets = 10;
  bool bucket_on_r_only = false;  // bucket key r instead of u = r*m

  uint64_t seed = 1;  // master seed; stage seeds are derived from it
  int threads = 1;

  embed::SkipGramConfig skipgram;
  nn::CombinerTrainConfig combiner_train;
  gbdt::BoostConfig intent_boost;  // objective forced to Logistic
  gbdt::BoostConfig value_boost;   // objective forced to SquaredLogValue
};

/// Per-traveler assembly over one period: combiner input sequence,
/// handcrafted features and realized labels.
struct AssembledExample {
  std::string traveler_id;
  std::vector<Vec> sequence;  // embedding vectors, oldest to newest
  std::vector<double> handcrafted;
  bool has_embedding = false;
  int label_intent = 0;
  double label_value = 0.0;
  int64_t clicks = 0;
};

/// Assemble one example per traveler found in `events`. With strip_bookings
/// (training and offline evaluation) booking events feed only the labels,
/// never the features or the sequence; without it (scoring semantics) the
/// full history is visible.
std::vector<AssembledExample> assemble_examples(
    const std::vector<ActivityEvent>& events, const embed::SkipGramModel& model,
    int64_t session_gap_ms, int max_seq, bool strip_bookings);

/// Feature layout: handcrafted block, then (when a combiner is given) an
/// embedding-present flag and the exported traveler embedding (zeros when
/// the traveler has no usable listing sequence).
Vec feature_vector(const AssembledExample& ex, const nn::CombinerParams* combiner);

struct ScoredTraveler {
  std::string traveler_id;
  double r = 0.0;
  double m = 0.0;
  double u = 0.0;
  int bucket = 0;
};

/// Everything score-time needs, as loaded from the persisted artifacts.
struct ModelBundle {
  embed::SkipGramModel embeddings;
  nn::CombinerParams combiner;
  gbdt::Ensemble intent;
  std::optional<gbdt::Ensemble> value;
  funnel::BucketThresholds thresholds;
  bool use_embeddings = true;
  bool bucket_on_r_only = false;
  int max_seq = 50;
  int64_t session_gap_ms = kDefaultSessionGapMs;
};

/// Score one traveler from their full observed history (bookings included).
ScoredTraveler score_history(const ModelBundle& bundle, const TravelerHistory& history);

/// Batch scoring with stream semantics: sessionize everything, score each
/// traveler's final state.
std::vector<ScoredTraveler> score_batch(const ModelBundle& bundle,
                                        const std::vector<ActivityEvent>& events);

struct PipelineArtifacts {
  int64_t boundary_ms = 0;
  embed::SkipGramModel embeddings;
  embed::DestinationEmbeddings destinations;
  nn::CombinerParams combiner;
  gbdt::Ensemble intent_model;
  gbdt::BoostConfig intent_config;
  std::optional<gbdt::Ensemble> value_model;
  gbdt::BoostConfig value_config;
  funnel::BucketThresholds thresholds;
  std::optional<metrics::MetricReport> report;
  funnel::BucketReport bucket_report;
  std::vector<ScoredTraveler> scored;  // evaluation-period travelers
  std::vector<std::string> warnings;
};

/// Offline path: split -> embeddings -> combiner -> features -> boosted
/// models -> thresholds -> evaluation, with every artifact persisted under
/// out_dir (fixed names, see below) plus a manifest of config hash, seed and
/// artifact content hashes.
PipelineArtifacts run_pipeline(const PipelineConfig& config);

/// Fixed artifact names inside out_dir.
extern const char* const kEmbeddingsFile;     // embeddings.txt
extern const char* const kDestinationsFile;   // destinations.txt
extern const char* const kCombinerFile;       // combiner.txt
extern const char* const kIntentModelFile;    // intent.gbt
extern const char* const kValueModelFile;     // value.gbt
extern const char* const kThresholdsFile;     // thresholds.txt
extern const char* const kMetricsJsonFile;    // metrics.json
extern const char* const kMetricsTextFile;    // metrics.txt
extern const char* const kBucketsFile;        // buckets.ndjson
extern const char* const kManifestFile;       // manifest.json

/// Load a bundle persisted by run_pipeline.
ModelBundle load_bundle(const std::string& dir);

}  // namespace dprt::pipe
