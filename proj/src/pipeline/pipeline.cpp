#include "dprt/pipeline/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dprt/embed/embedding_io.hpp"
#include "dprt/nn/combiner_io.hpp"
#include "json.hpp"

namespace dprt::pipe {

const char* const kEmbeddingsFile = "embeddings.txt";
const char* const kDestinationsFile = "destinations.txt";
const char* const kCombinerFile = "combiner.txt";
const char* const kIntentModelFile = "intent.gbt";
const char* const kValueModelFile = "value.gbt";
const char* const kThresholdsFile = "thresholds.txt";
const char* const kMetricsJsonFile = "metrics.json";
const char* const kMetricsTextFile = "metrics.txt";
const char* const kBucketsFile = "buckets.ndjson";
const char* const kManifestFile = "manifest.json";

namespace {

using nlohmann::json;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw DataError(std::string("pipeline stage '") + name + "': " + e.what());
  }
}

std::vector<Vec> build_sequence(const TravelerHistory& history,
                                const embed::SkipGramModel& model, int max_seq) {
  std::vector<Vec> seq;
  for (const Session& s : history.sessions) {
    for (const std::string& id : s.listing_sequence) {
      const int idx = model.vocab.lookup(id);
      if (idx < 0) continue;
      const auto row = model.input_row(idx);
      seq.emplace_back(row.begin(), row.end());
    }
  }
  if (static_cast<int>(seq.size()) > max_seq) {
    seq.erase(seq.begin(), seq.end() - max_seq);
  }
  return seq;
}

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_hex(fnv1a64(ss.str()));
}

std::string bucket_table(const funnel::BucketReport& report) {
  std::string out = "Bucket  Count     BookRate  MeanValue  RPC        MeanKey\n";
  char buf[160];
  for (size_t b = 0; b < report.buckets.size(); ++b) {
    const funnel::BucketStats& s = report.buckets[b];
    if (s.count == 0) {
      std::snprintf(buf, sizeof(buf), "%-6zu  %-8lld  -         -          -          -\n",
                    b + 1, static_cast<long long>(s.count));
    } else {
      std::snprintf(buf, sizeof(buf),
                    "%-6zu  %-8lld  %.4f    %-9.2f  %-9.4f  %.6f\n", b + 1,
                    static_cast<long long>(s.count), s.booking_rate.value_or(0.0),
                    s.mean_value.value_or(0.0), s.rpc.value_or(0.0),
                    s.mean_predicted_u.value_or(0.0));
    }
    out += buf;
  }
  if (report.spearman_bucket_rpc) {
    std::snprintf(buf, sizeof(buf), "Spearman(bucket, RPC) = %.4f\n",
                  *report.spearman_bucket_rpc);
    out += buf;
  }
  return out;
}

json config_json(const PipelineConfig& c) {
  json j;
  j["events_path"] = c.events_path;
  j["boundary_ms"] = c.boundary_ms;
  j["session_gap_ms"] = c.session_gap_ms;
  j["bot_max_events_per_hour"] = c.bot_max_events_per_hour;
  j["combiner"] = nn::to_string(c.combiner);
  j["use_embeddings"] = c.use_embeddings;
  j["lstm_hidden"] = c.lstm_hidden;
  j["max_seq"] = c.max_seq;
  j["n_buckets"] = c.n_buckets;
  j["bucket_on_r_only"] = c.bucket_on_r_only;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["skipgram"] = {{"dim", c.skipgram.dim},
                   {"window", c.skipgram.window},
                   {"negatives", c.skipgram.negatives},
                   {"epochs", c.skipgram.epochs},
                   {"learning_rate", c.skipgram.learning_rate},
                   {"subsample_threshold", c.skipgram.subsample_threshold},
                   {"min_count", c.skipgram.min_count}};
  j["combiner_train"] = {{"max_epochs", c.combiner_train.max_epochs},
                         {"base_lr", c.combiner_train.base_lr},
                         {"batch_size", c.combiner_train.batch_size},
                         {"val_fraction", c.combiner_train.val_fraction},
                         {"patience", c.combiner_train.patience}};
  auto boost_json = [](const gbdt::BoostConfig& b) {
    return json{{"rounds", b.rounds},
                {"learning_rate", b.learning_rate},
                {"max_depth", b.max_depth},
                {"lambda", b.lambda},
                {"gamma", b.gamma},
                {"colsample", b.colsample},
                {"min_child_hessian", b.min_child_hessian}};
  };
  j["intent_boost"] = boost_json(c.intent_boost);
  j["value_boost"] = boost_json(c.value_boost);
  return j;
}

}  // namespace

std::vector<AssembledExample> assemble_examples(
    const std::vector<ActivityEvent>& events, const embed::SkipGramModel& model,
    int64_t session_gap_ms, int max_seq, bool strip_bookings) {
  const std::vector<Session> full_sessions = sessionize(events, session_gap_ms);
  const std::vector<TravelerHistory> full = build_histories(full_sessions);

  std::unordered_map<std::string, const TravelerHistory*> feature_source;
  std::vector<TravelerHistory> stripped;
  if (strip_bookings) {
    std::vector<ActivityEvent> kept;
    kept.reserve(events.size());
    for (const ActivityEvent& e : events) {
      if (e.activity_type != ActivityType::Booking) kept.push_back(e);
    }
    stripped = build_histories(sessionize(kept, session_gap_ms));
    for (const TravelerHistory& h : stripped) feature_source[h.traveler_id] = &h;
  } else {
    for (const TravelerHistory& h : full) feature_source[h.traveler_id] = &h;
  }

  std::vector<AssembledExample> out;
  out.reserve(full.size());
  for (const TravelerHistory& h : full) {
    AssembledExample ex;
    ex.traveler_id = h.traveler_id;
    for (const Session& s : h.sessions) {
      if (s.label_booked) ex.label_intent = 1;
      ex.label_value += s.label_value;
      for (const ActivityEvent& e : s.events) {
        if (e.activity_type == ActivityType::Click) ++ex.clicks;
      }
    }
    auto it = feature_source.find(h.traveler_id);
    if (it != feature_source.end()) {
      ex.handcrafted = handcrafted_features(*it->second);
      ex.sequence = build_sequence(*it->second, model, max_seq);
    } else {
      ex.handcrafted.assign(kHandcraftedDim, 0.0);  // booking-only history
    }
    ex.has_embedding = !ex.sequence.empty();
    out.push_back(std::move(ex));
  }
  return out;
}

Vec feature_vector(const AssembledExample& ex, const nn::CombinerParams* combiner) {
  Vec f = ex.handcrafted;
  if (combiner != nullptr) {
    const int emb_dim = nn::traveler_embedding_dim(*combiner);
    f.push_back(ex.has_embedding ? 1.0 : 0.0);
    if (ex.has_embedding) {
      const Vec emb = nn::export_traveler_embedding(*combiner, ex.sequence,
                                                    fnv1a64(ex.traveler_id));
      f.insert(f.end(), emb.begin(), emb.end());
    } else {
      f.insert(f.end(), emb_dim, 0.0);
    }
  }
  return f;
}

ScoredTraveler score_history(const ModelBundle& bundle, const TravelerHistory& history) {
  AssembledExample ex;
  ex.traveler_id = history.traveler_id;
  ex.handcrafted = handcrafted_features(history);
  if (bundle.use_embeddings) {
    ex.sequence = build_sequence(history, bundle.embeddings, bundle.max_seq);
  }
  ex.has_embedding = !ex.sequence.empty();
  const Vec f =
      feature_vector(ex, bundle.use_embeddings ? &bundle.combiner : nullptr);
  const funnel::UtilityScore u = funnel::utility(
      history.traveler_id, gbdt::predict(bundle.intent, f),
      bundle.value ? gbdt::predict(*bundle.value, f) : 0.0);
  ScoredTraveler s;
  s.traveler_id = history.traveler_id;
  s.r = u.r;
  s.m = u.m;
  s.u = u.u;
  s.bucket = funnel::assign(bundle.thresholds,
                            bundle.bucket_on_r_only ? s.r : s.u);
  return s;
}

std::vector<ScoredTraveler> score_batch(const ModelBundle& bundle,
                                        const std::vector<ActivityEvent>& events) {
  std::vector<ScoredTraveler> out;
  for (const TravelerHistory& h :
       build_histories(sessionize(events, bundle.session_gap_ms))) {
    out.push_back(score_history(bundle, h));
  }
  return out;
}

PipelineArtifacts run_pipeline(const PipelineConfig& config) {
  PipelineArtifacts art;

  auto events = stage("read-log", [&] {
    LogReadResult lr = read_event_log_file(config.events_path);
    if (lr.malformed_lines > 0) {
      art.warnings.push_back(std::to_string(lr.malformed_lines) + " of " +
                             std::to_string(lr.total_lines) +
                             " log lines malformed; first: " + lr.first_error);
    }
    std::stable_sort(lr.events.begin(), lr.events.end(),
                     [](const ActivityEvent& a, const ActivityEvent& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });
    return std::move(lr.events);
  });

  events = stage("bot-filter", [&] {
    return filter_bot_travelers(events, config.bot_max_events_per_hour);
  });

  auto [embed_events, eval_events] = stage("temporal-split", [&] {
    if (events.empty()) throw DataError("no events after filtering");
    int64_t boundary = config.boundary_ms;
    if (boundary == 0) {
      boundary = events.front().timestamp_ms +
                 (events.back().timestamp_ms - events.front().timestamp_ms) / 2;
    }
    art.boundary_ms = boundary;
    return metrics::temporal_split(events, boundary);
  });

  static const embed::SkipGramModel kNoModel;
  if (config.use_embeddings) {
    art.embeddings = stage("embed", [&] {
      embed::SkipGramConfig sg = config.skipgram;
      sg.seed = mix_seed(config.seed, 11);
      sg.threads = config.threads;
      return embed::train_skipgram(sessionize(embed_events, config.session_gap_ms), sg);
    });
    art.destinations = stage("destination-embed", [&] {
      return embed::destination_embeddings(art.embeddings,
                                           embed::build_demand_matrix(embed_events));
    });
  }

  auto train_asm = stage("assemble-train", [&] {
    return assemble_examples(embed_events,
                             config.use_embeddings ? art.embeddings : kNoModel,
                             config.session_gap_ms, config.max_seq, true);
  });

  if (config.use_embeddings) {
    art.combiner = stage("combine", [&] {
      std::vector<nn::SequenceExample> dataset;
      for (const AssembledExample& ex : train_asm) {
        if (ex.has_embedding) dataset.push_back({ex.sequence, ex.label_intent});
      }
      if (dataset.empty()) {
        throw DataError("no travelers with a listing sequence to train on");
      }
      nn::CombinerTrainConfig ct = config.combiner_train;
      ct.seed = mix_seed(config.seed, 22);
      return nn::train_combiner(config.combiner, dataset, art.embeddings.dim,
                                config.lstm_hidden, ct);
    });
  }

  const nn::CombinerParams* combiner_ptr =
      config.use_embeddings ? &art.combiner : nullptr;

  auto train_examples = stage("assemble-features", [&] {
    std::vector<LabeledExample> rows;
    rows.reserve(train_asm.size());
    for (const AssembledExample& ex : train_asm) {
      rows.push_back({ex.traveler_id, feature_vector(ex, combiner_ptr),
                      ex.label_intent, ex.label_value});
    }
    return rows;
  });

  art.intent_config = config.intent_boost;
  art.intent_config.objective = gbdt::Objective::Logistic;
  art.intent_config.seed = mix_seed(config.seed, 33);
  art.intent_model = stage("boost-intent", [&] {
    return gbdt::fit(train_examples, art.intent_config);
  });

  art.value_config = config.value_boost;
  art.value_config.objective = gbdt::Objective::SquaredLogValue;
  art.value_config.seed = mix_seed(config.seed, 44);
  stage("boost-value", [&] {
    std::vector<LabeledExample> booked;
    for (const LabeledExample& ex : train_examples) {
      if (ex.label_intent == 1) booked.push_back(ex);
    }
    if (booked.empty()) {
      art.warnings.push_back("no booked training examples; value model absent");
    } else {
      art.value_model = gbdt::fit(booked, art.value_config);
    }
    return 0;
  });

  auto eval_asm = stage("assemble-eval", [&] {
    return assemble_examples(eval_events,
                             config.use_embeddings ? art.embeddings : kNoModel,
                             config.session_gap_ms, config.max_seq, true);
  });

  stage("score-eval", [&] {
    art.scored.reserve(eval_asm.size());
    for (const AssembledExample& ex : eval_asm) {
      const Vec f = feature_vector(ex, combiner_ptr);
      const funnel::UtilityScore u = funnel::utility(
          ex.traveler_id, gbdt::predict(art.intent_model, f),
          art.value_model ? gbdt::predict(*art.value_model, f) : 0.0);
      art.scored.push_back({u.traveler_id, u.r, u.m, u.u, 0});
    }
    return 0;
  });

  std::vector<double> keys(art.scored.size());
  for (size_t i = 0; i < art.scored.size(); ++i) {
    keys[i] = config.bucket_on_r_only ? art.scored[i].r : art.scored[i].u;
  }
  art.thresholds = stage("fit-thresholds", [&] {
    return funnel::fit_thresholds(keys, config.n_buckets);
  });
  for (size_t i = 0; i < art.scored.size(); ++i) {
    art.scored[i].bucket = funnel::assign(art.thresholds, keys[i]);
  }

  stage("evaluate", [&] {
    std::vector<double> r_scores(eval_asm.size());
    std::vector<int> labels(eval_asm.size());
    std::vector<int> assignments(eval_asm.size());
    std::vector<funnel::RealizedOutcome> outcomes(eval_asm.size());
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < eval_asm.size(); ++i) {
      r_scores[i] = art.scored[i].r;
      labels[i] = eval_asm[i].label_intent;
      labels[i] == 1 ? has_pos = true : has_neg = true;
      assignments[i] = art.scored[i].bucket;
      outcomes[i] = {eval_asm[i].label_intent == 1, eval_asm[i].label_value,
                     eval_asm[i].clicks};
    }
    if (has_pos && has_neg) {
      art.report = metrics::evaluate_scores(r_scores, labels, 0.5);
    } else {
      art.warnings.push_back(
          "evaluation period has a single label class; AUC/PRF1 not computed");
    }
    art.bucket_report =
        funnel::bucket_report(config.n_buckets, assignments, outcomes, &keys);
    return 0;
  });

  if (!config.out_dir.empty()) {
    stage("persist", [&] {
      namespace fs = std::filesystem;
      fs::create_directories(config.out_dir);
      auto path = [&](const char* name) {
        return (fs::path(config.out_dir) / name).string();
      };
      json manifest;
      manifest["settings"] = {{"use_embeddings", config.use_embeddings},
                              {"bucket_on_r_only", config.bucket_on_r_only},
                              {"max_seq", config.max_seq},
                              {"session_gap_ms", config.session_gap_ms},
                              {"combiner", nn::to_string(config.combiner)},
                              {"boundary_ms", art.boundary_ms},
                              {"has_value_model", art.value_model.has_value()}};
      const json cfg = config_json(config);
      manifest["config"] = cfg;
      manifest["config_hash"] = hash_hex(fnv1a64(cfg.dump()));
      manifest["seed"] = config.seed;
      manifest["counts"] = {
          {"events", events.size()},
          {"embedding_period_events", embed_events.size()},
          {"evaluation_period_events", eval_events.size()},
          {"training_travelers", train_asm.size()},
          {"evaluation_travelers", eval_asm.size()}};
      manifest["warnings"] = art.warnings;

      json hashes;
      if (config.use_embeddings) {
        embed::save_embeddings_file(art.embeddings, path(kEmbeddingsFile));
        hashes[kEmbeddingsFile] = file_hash(path(kEmbeddingsFile));
        embed::save_destination_embeddings_file(art.destinations,
                                                path(kDestinationsFile));
        hashes[kDestinationsFile] = file_hash(path(kDestinationsFile));
        nn::save_combiner_file(art.combiner, path(kCombinerFile));
        hashes[kCombinerFile] = file_hash(path(kCombinerFile));
      }
      gbdt::save_ensemble_file(art.intent_model, art.intent_config,
                               path(kIntentModelFile));
      hashes[kIntentModelFile] = file_hash(path(kIntentModelFile));
      if (art.value_model) {
        gbdt::save_ensemble_file(*art.value_model, art.value_config,
                                 path(kValueModelFile));
        hashes[kValueModelFile] = file_hash(path(kValueModelFile));
      }
      funnel::save_thresholds_file(art.thresholds, path(kThresholdsFile));
      hashes[kThresholdsFile] = file_hash(path(kThresholdsFile));

      {
        json mj;
        if (art.report) {
          mj = json::parse(metrics::metric_report_json(*art.report));
        } else {
          mj["note"] = "single label class in evaluation period";
        }
        if (art.bucket_report.spearman_bucket_rpc) {
          mj["spearman_bucket_rpc"] = *art.bucket_report.spearman_bucket_rpc;
        } else {
          mj["spearman_bucket_rpc"] = nullptr;
        }
        json buckets = json::array();
        for (size_t b = 0; b < art.bucket_report.buckets.size(); ++b) {
          const funnel::BucketStats& s = art.bucket_report.buckets[b];
          json bj;
          bj["bucket"] = b + 1;
          bj["count"] = s.count;
          if (s.booking_rate) bj["booking_rate"] = *s.booking_rate;
          if (s.mean_value) bj["mean_value"] = *s.mean_value;
          if (s.rpc) bj["rpc"] = *s.rpc;
          if (s.mean_predicted_u) bj["mean_predicted_key"] = *s.mean_predicted_u;
          buckets.push_back(bj);
        }
        mj["bucket_stats"] = buckets;
        std::ofstream out(path(kMetricsJsonFile));
        out << mj.dump(2) << '\n';
      }
      hashes[kMetricsJsonFile] = file_hash(path(kMetricsJsonFile));
      {
        std::ofstream out(path(kMetricsTextFile));
        if (art.report) {
          out << metrics::metric_report_table(*art.report) << '\n';
        } else {
          out << "AUC/PRF1 not computed: single label class\n\n";
        }
        out << bucket_table(art.bucket_report);
      }
      hashes[kMetricsTextFile] = file_hash(path(kMetricsTextFile));
      {
        std::ofstream out(path(kBucketsFile));
        for (const ScoredTraveler& s : art.scored) {
          json j;
          j["traveler_id"] = s.traveler_id;
          j["r"] = s.r;
          j["m"] = s.m;
          j["u"] = s.u;
          j["bucket"] = s.bucket;
          out << j.dump() << '\n';
        }
      }
      hashes[kBucketsFile] = file_hash(path(kBucketsFile));

      manifest["artifacts"] = hashes;
      std::ofstream out(path(kManifestFile));
      out << manifest.dump(2) << '\n';
      return 0;
    });
  }
  return art;
}

ModelBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  std::ifstream mf(path(kManifestFile));
  if (!mf) throw DataError("cannot open manifest in '" + dir + "'");
  json manifest = json::parse(mf, nullptr, false);
  if (manifest.is_discarded()) throw DataError("malformed manifest.json");
  const json& s = manifest.at("settings");
  ModelBundle b;
  b.use_embeddings = s.at("use_embeddings").get<bool>();
  b.bucket_on_r_only = s.at("bucket_on_r_only").get<bool>();
  b.max_seq = s.at("max_seq").get<int>();
  b.session_gap_ms = s.at("session_gap_ms").get<int64_t>();
  if (b.use_embeddings) {
    b.embeddings = embed::load_embeddings_file(path(kEmbeddingsFile));
    b.combiner = nn::load_combiner_file(path(kCombinerFile));
  }
  b.intent = gbdt::load_ensemble_file(path(kIntentModelFile));
  if (s.at("has_value_model").get<bool>()) {
    b.value = gbdt::load_ensemble_file(path(kValueModelFile));
  }
  b.thresholds = funnel::load_thresholds_file(path(kThresholdsFile));
  return b;
}

}  // namespace dprt::pipe
