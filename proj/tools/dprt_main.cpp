// dprt: re-targeting prediction engine over session logs.
//
// Subcommands cover the offline path (generate, embed, combine, boost,
// bucket, evaluate, pipeline) and the per-event scorer (score-stream).
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dprt/embed/embedding_io.hpp"
#include "dprt/nn/combiner_io.hpp"
#include "dprt/pipeline/pipeline.hpp"
#include "dprt/pipeline/stream.hpp"
#include "dprt/synth/world.hpp"
#include "json.hpp"

namespace {

using namespace dprt;

std::vector<ActivityEvent> load_sorted_events(const std::string& path) {
  LogReadResult lr = read_event_log_file(path);
  if (lr.malformed_lines > 0) {
    std::cerr << "warning: " << lr.malformed_lines << " of " << lr.total_lines
              << " lines malformed; first: " << lr.first_error << "\n";
  }
  std::stable_sort(lr.events.begin(), lr.events.end(),
                   [](const ActivityEvent& a, const ActivityEvent& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  return std::move(lr.events);
}

void add_generate(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("generate", "Write a synthetic session log with ground truth");
  auto cfg = std::make_shared<synth::SyntheticWorldConfig>();
  auto events_path = std::make_shared<std::string>("events.ndjson");
  auto truth_path = std::make_shared<std::string>("truth.ndjson");
  auto rule = std::make_shared<std::string>("linear");
  cmd->add_option("--out", *events_path, "Event log output path");
  cmd->add_option("--truth", *truth_path, "Ground truth output path");
  cmd->add_option("--travelers", cfg->n_travelers, "Traveler count");
  cmd->add_option("--destinations", cfg->n_destinations, "Destination count");
  cmd->add_option("--listings-per-destination", cfg->listings_per_destination,
                  "Listings per destination");
  cmd->add_option("--latent-dim", cfg->latent_dim, "Latent dimension");
  cmd->add_option("--rule", *rule, "Booking rule: linear | nonlinear");
  cmd->add_option("--noise", cfg->noise, "Listing latent jitter");
  cmd->add_option("--sessions-mean", cfg->mean_sessions_per_traveler,
                  "Mean sessions per traveler");
  cmd->add_option("--session-length-mean", cfg->mean_session_length,
                  "Mean views per session");
  cmd->add_option("--explore-prob", cfg->session_explore_prob,
                  "Probability a session leaves the home destination");
  cmd->add_option("--drift-prob", cfg->mid_session_drift_prob,
                  "Per-view probability of hopping destinations");
  cmd->add_option("--seed", cfg->seed, "World seed");
  cmd->callback([cfg, events_path, truth_path, rule, &rc] {
    if (*rule == "linear") {
      cfg->rule = synth::BookingRule::Linear;
    } else if (*rule == "nonlinear") {
      cfg->rule = synth::BookingRule::Nonlinear;
    } else {
      throw CLI::ValidationError("--rule must be linear or nonlinear");
    }
    const auto s = synth::generate_world_files(*cfg, *events_path, *truth_path);
    std::cout << "events=" << s.n_events << " bookings=" << s.n_bookings
              << " traveler_periods=" << s.n_traveler_periods
              << " mean_true_p=" << s.mean_true_probability
              << " boundary_ms=" << s.boundary_ms << "\n";
    rc = 0;
  });
}

void add_embed(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("embed", "Train listing embeddings from a session log");
  auto events_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("embeddings.txt");
  auto dest_out = std::make_shared<std::string>();
  auto gap_minutes = std::make_shared<int64_t>(30);
  auto cfg = std::make_shared<embed::SkipGramConfig>();
  cmd->add_option("--events", *events_path, "Event log")->required();
  cmd->add_option("--out", *out, "Embedding file output");
  cmd->add_option("--dest-out", *dest_out, "Destination embedding output (optional)");
  cmd->add_option("--dim", cfg->dim, "Embedding dimension");
  cmd->add_option("--window", cfg->window, "Context window");
  cmd->add_option("--negatives", cfg->negatives, "Negative samples per pair");
  cmd->add_option("--epochs", cfg->epochs, "Training epochs");
  cmd->add_option("--lr", cfg->learning_rate, "Initial learning rate");
  cmd->add_option("--min-count", cfg->min_count, "Low-frequency pruning threshold");
  cmd->add_option("--subsample", cfg->subsample_threshold, "Frequency subsampling threshold");
  cmd->add_option("--threads", cfg->threads, "Worker threads (1 = deterministic)");
  cmd->add_option("--seed", cfg->seed, "Seed");
  cmd->add_option("--gap-minutes", *gap_minutes, "Session gap in minutes");
  cmd->callback([events_path, out, dest_out, gap_minutes, cfg, &rc] {
    const auto events = load_sorted_events(*events_path);
    const auto sessions = sessionize(events, *gap_minutes * 60000);
    const auto model = embed::train_skipgram(sessions, *cfg);
    embed::save_embeddings_file(model, *out);
    std::cout << "listings=" << model.vocab.size() << " dim=" << model.dim << "\n";
    if (!dest_out->empty()) {
      const auto dests =
          embed::destination_embeddings(model, embed::build_demand_matrix(events));
      embed::save_destination_embeddings_file(dests, *dest_out);
      std::cout << "destinations=" << dests.vectors.size() << "\n";
    }
    rc = 0;
  });
}

void add_combine(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("combine", "Train a traveler-embedding combiner");
  auto events_path = std::make_shared<std::string>();
  auto emb_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("combiner.txt");
  auto kind_str = std::make_shared<std::string>("dan");
  auto hidden = std::make_shared<int>(32);
  auto max_seq = std::make_shared<int>(50);
  auto gap_minutes = std::make_shared<int64_t>(30);
  auto cfg = std::make_shared<nn::CombinerTrainConfig>();
  cmd->add_option("--events", *events_path, "Event log (training period)")->required();
  cmd->add_option("--embeddings", *emb_path, "Listing embedding file")->required();
  cmd->add_option("--out", *out, "Parameter file output");
  cmd->add_option("--kind", *kind_str,
                  "random | average | dan | lstm | lstm_attention");
  cmd->add_option("--hidden", *hidden, "LSTM hidden width");
  cmd->add_option("--max-seq", *max_seq, "Most recent listings kept");
  cmd->add_option("--epochs", cfg->max_epochs, "Epoch cap");
  cmd->add_option("--batch", cfg->batch_size, "Mini-batch size");
  cmd->add_option("--lr", cfg->base_lr, "Base learning rate");
  cmd->add_option("--val-fraction", cfg->val_fraction, "Validation split");
  cmd->add_option("--patience", cfg->patience, "Early-stop patience (epochs)");
  cmd->add_option("--seed", cfg->seed, "Seed");
  cmd->add_option("--gap-minutes", *gap_minutes, "Session gap in minutes");
  cmd->callback([events_path, emb_path, out, kind_str, hidden, max_seq, gap_minutes,
                 cfg, &rc] {
    const auto kind = nn::parse_combiner_kind(*kind_str);
    if (!kind) throw CLI::ValidationError("unknown --kind " + *kind_str);
    const auto events = load_sorted_events(*events_path);
    const auto model = embed::load_embeddings_file(*emb_path);
    const auto rows = pipe::assemble_examples(events, model, *gap_minutes * 60000,
                                              *max_seq, true);
    std::vector<nn::SequenceExample> data;
    for (const auto& r : rows) {
      if (r.has_embedding) data.push_back({r.sequence, r.label_intent});
    }
    if (data.empty()) throw DataError("no travelers with usable listing sequences");
    const auto params = nn::train_combiner(*kind, data, model.dim, *hidden, *cfg);
    nn::save_combiner_file(params, *out);
    std::cout << "trained " << nn::to_string(*kind) << " on " << data.size()
              << " travelers\n";
    rc = 0;
  });
}

void add_boost(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("boost", "Fit a boosted-tree model on assembled features");
  auto events_path = std::make_shared<std::string>();
  auto emb_path = std::make_shared<std::string>();
  auto combiner_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("model.gbt");
  auto objective = std::make_shared<std::string>("intent");
  auto max_seq = std::make_shared<int>(50);
  auto gap_minutes = std::make_shared<int64_t>(30);
  auto cfg = std::make_shared<gbdt::BoostConfig>();
  cmd->add_option("--events", *events_path, "Event log (training period)")->required();
  cmd->add_option("--embeddings", *emb_path, "Listing embedding file (optional)");
  cmd->add_option("--combiner", *combiner_path, "Combiner parameter file (optional)");
  cmd->add_option("--out", *out, "Model file output");
  cmd->add_option("--objective", *objective, "intent | value");
  cmd->add_option("--rounds", cfg->rounds, "Boosting rounds");
  cmd->add_option("--lr", cfg->learning_rate, "Shrinkage");
  cmd->add_option("--max-depth", cfg->max_depth, "Tree depth cap");
  cmd->add_option("--lambda", cfg->lambda, "Leaf L2");
  cmd->add_option("--gamma", cfg->gamma, "Split penalty");
  cmd->add_option("--colsample", cfg->colsample, "Feature fraction per tree");
  cmd->add_option("--min-child-hessian", cfg->min_child_hessian, "Minimum child hessian");
  cmd->add_option("--seed", cfg->seed, "Seed");
  cmd->add_option("--max-seq", *max_seq, "Most recent listings kept");
  cmd->add_option("--gap-minutes", *gap_minutes, "Session gap in minutes");
  cmd->callback([events_path, emb_path, combiner_path, out, objective, max_seq,
                 gap_minutes, cfg, &rc] {
    const bool use_emb = !emb_path->empty() && !combiner_path->empty();
    if (emb_path->empty() != combiner_path->empty()) {
      throw CLI::ValidationError("--embeddings and --combiner go together");
    }
    const auto events = load_sorted_events(*events_path);
    embed::SkipGramModel model;
    nn::CombinerParams combiner;
    if (use_emb) {
      model = embed::load_embeddings_file(*emb_path);
      combiner = nn::load_combiner_file(*combiner_path);
    }
    const auto rows = pipe::assemble_examples(events, model, *gap_minutes * 60000,
                                              *max_seq, true);
    std::vector<LabeledExample> data;
    for (const auto& r : rows) {
      LabeledExample ex{r.traveler_id,
                        pipe::feature_vector(r, use_emb ? &combiner : nullptr),
                        r.label_intent, r.label_value};
      if (*objective == "value" && ex.label_intent != 1) continue;
      data.push_back(std::move(ex));
    }
    if (data.empty()) throw DataError("no training rows for objective " + *objective);
    if (*objective == "intent") {
      cfg->objective = gbdt::Objective::Logistic;
    } else if (*objective == "value") {
      cfg->objective = gbdt::Objective::SquaredLogValue;
    } else {
      throw CLI::ValidationError("--objective must be intent or value");
    }
    const auto ensemble = gbdt::fit(data, *cfg);
    gbdt::save_ensemble_file(ensemble, *cfg, *out);
    std::cout << "trees=" << ensemble.trees.size() << " rows=" << data.size()
              << " features=" << ensemble.n_features << "\n";
    rc = 0;
  });
}

void add_bucket(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("bucket", "Fit funnel-bucket thresholds from scored NDJSON");
  auto scores_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("thresholds.txt");
  auto field = std::make_shared<std::string>("u");
  auto n = std::make_shared<int>(10);
  cmd->add_option("--scores", *scores_path, "NDJSON with a numeric score field")->required();
  cmd->add_option("--out", *out, "Threshold file output");
  cmd->add_option("--field", *field, "Score field name (default u)");
  cmd->add_option("--n", *n, "Bucket count");
  cmd->callback([scores_path, out, field, n, &rc] {
    std::ifstream in(*scores_path);
    if (!in) throw DataError("cannot open '" + *scores_path + "'");
    std::vector<double> scores;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains(*field) || !j[*field].is_number()) {
        throw DataError("line without numeric field '" + *field + "': " + line);
      }
      scores.push_back(j[*field].get<double>());
    }
    const auto t = funnel::fit_thresholds(scores, *n);
    funnel::save_thresholds_file(t, *out);
    std::cout << "scores=" << scores.size() << " buckets=" << t.n_buckets << "\n";
    rc = 0;
  });
}

void add_evaluate(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand(
      "evaluate", "Score a labeled period with persisted models and report metrics");
  auto events_path = std::make_shared<std::string>();
  auto model_dir = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  auto threshold = std::make_shared<double>(0.5);
  cmd->add_option("--events", *events_path, "Evaluation-period event log")->required();
  cmd->add_option("--model-dir", *model_dir, "Directory written by `dprt pipeline`")
      ->required();
  cmd->add_option("--json", *json_out, "Also write the report as JSON");
  cmd->add_option("--threshold", *threshold, "Classification threshold");
  cmd->callback([events_path, model_dir, json_out, threshold, &rc] {
    const auto bundle = pipe::load_bundle(*model_dir);
    const auto events = load_sorted_events(*events_path);
    const auto rows = pipe::assemble_examples(events, bundle.embeddings,
                                              bundle.session_gap_ms, bundle.max_seq,
                                              true);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : rows) {
      const Vec f = pipe::feature_vector(
          r, bundle.use_embeddings ? &bundle.combiner : nullptr);
      scores.push_back(gbdt::predict(bundle.intent, f));
      labels.push_back(r.label_intent);
    }
    const auto report = metrics::evaluate_scores(scores, labels, *threshold);
    std::cout << metrics::metric_report_table(report);
    if (!json_out->empty()) {
      std::ofstream jout(*json_out);
      jout << metrics::metric_report_json(report) << "\n";
    }
    rc = 0;
  });
}

void add_pipeline(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand("pipeline", "Run the full offline train/evaluate path");
  cmd->set_config("--config", "", "Read options from a TOML/INI file");
  auto cfg = std::make_shared<pipe::PipelineConfig>();
  auto combiner_str = std::make_shared<std::string>("dan");
  auto no_embeddings = std::make_shared<bool>(false);
  auto gap_minutes = std::make_shared<int64_t>(30);
  cmd->add_option("--events", cfg->events_path, "Event log")->required();
  cmd->add_option("--out-dir", cfg->out_dir, "Artifact directory")->required();
  cmd->add_option("--boundary-ms", cfg->boundary_ms,
                  "Temporal split boundary (0 = midpoint)");
  cmd->add_option("--gap-minutes", *gap_minutes, "Session gap in minutes");
  cmd->add_option("--combiner", *combiner_str,
                  "random | average | dan | lstm | lstm_attention");
  cmd->add_flag("--no-embeddings", *no_embeddings, "Handcrafted features only");
  cmd->add_option("--lstm-hidden", cfg->lstm_hidden, "LSTM hidden width");
  cmd->add_option("--max-seq", cfg->max_seq, "Most recent listings kept");
  cmd->add_option("--buckets", cfg->n_buckets, "Funnel bucket count");
  cmd->add_flag("--bucket-on-r", cfg->bucket_on_r_only,
                "Bucket on conversion probability instead of utility");
  cmd->add_option("--seed", cfg->seed, "Master seed");
  cmd->add_option("--threads", cfg->threads, "Embedding worker threads");
  cmd->add_option("--embed-dim", cfg->skipgram.dim, "Embedding dimension");
  cmd->add_option("--embed-window", cfg->skipgram.window, "Context window");
  cmd->add_option("--embed-negatives", cfg->skipgram.negatives, "Negative samples");
  cmd->add_option("--embed-epochs", cfg->skipgram.epochs, "Embedding epochs");
  cmd->add_option("--embed-lr", cfg->skipgram.learning_rate, "Embedding learning rate");
  cmd->add_option("--embed-min-count", cfg->skipgram.min_count, "Pruning threshold");
  cmd->add_option("--embed-subsample", cfg->skipgram.subsample_threshold,
                  "Subsampling threshold");
  cmd->add_option("--combiner-epochs", cfg->combiner_train.max_epochs, "Combiner epochs");
  cmd->add_option("--combiner-batch", cfg->combiner_train.batch_size, "Combiner batch");
  cmd->add_option("--combiner-lr", cfg->combiner_train.base_lr, "Combiner base rate");
  cmd->add_option("--combiner-patience", cfg->combiner_train.patience, "Early stop");
  cmd->add_option("--boost-rounds", cfg->intent_boost.rounds, "Intent boosting rounds");
  cmd->add_option("--boost-depth", cfg->intent_boost.max_depth, "Intent tree depth");
  cmd->add_option("--boost-lr", cfg->intent_boost.learning_rate, "Intent shrinkage");
  cmd->add_option("--boost-colsample", cfg->intent_boost.colsample, "Feature fraction");
  cmd->add_option("--value-rounds", cfg->value_boost.rounds, "Value boosting rounds");
  cmd->add_option("--value-depth", cfg->value_boost.max_depth, "Value tree depth");
  cmd->callback([cfg, combiner_str, no_embeddings, gap_minutes, &rc] {
    const auto kind = nn::parse_combiner_kind(*combiner_str);
    if (!kind) throw CLI::ValidationError("unknown --combiner " + *combiner_str);
    cfg->combiner = *kind;
    cfg->use_embeddings = !*no_embeddings;
    cfg->session_gap_ms = *gap_minutes * 60000;
    const auto art = pipe::run_pipeline(*cfg);
    for (const auto& w : art.warnings) std::cerr << "warning: " << w << "\n";
    if (art.report) {
      std::cout << metrics::metric_report_table(*art.report);
    } else {
      std::cout << "metrics not computed (single label class)\n";
    }
    if (art.bucket_report.spearman_bucket_rpc) {
      std::cout << "Spearman(bucket, RPC) = " << *art.bucket_report.spearman_bucket_rpc
                << "\n";
    }
    std::cout << "artifacts in " << cfg->out_dir << "\n";
    rc = 0;
  });
}

void add_score_stream(CLI::App& app, int& rc) {
  auto* cmd = app.add_subcommand(
      "score-stream", "Score NDJSON events from stdin, one prediction per event");
  auto model_dir = std::make_shared<std::string>();
  auto max_travelers = std::make_shared<size_t>(100000);
  cmd->add_option("--model-dir", *model_dir, "Directory written by `dprt pipeline`")
      ->required();
  cmd->add_option("--max-travelers", *max_travelers, "In-memory traveler cap (LRU)");
  cmd->callback([model_dir, max_travelers, &rc] {
    pipe::StreamScorer scorer(pipe::load_bundle(*model_dir), *max_travelers);
    std::string line, error;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      if (const auto out = scorer.process_line(line, &error)) {
        std::cout << *out << "\n";
      } else {
        std::cerr << "error: " << error << "\n";
      }
    }
    rc = 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dprt: traveler re-targeting prediction engine"};
  app.require_subcommand(1);
  int rc = 3;
  add_generate(app, rc);
  add_embed(app, rc);
  add_combine(app, rc);
  add_boost(app, rc);
  add_bucket(app, rc);
  add_evaluate(app, rc);
  add_pipeline(app, rc);
  add_score_stream(app, rc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ? 0 : 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
