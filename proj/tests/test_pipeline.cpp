#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dprt/pipeline/pipeline.hpp"
#include "dprt/pipeline/stream.hpp"
#include "dprt/synth/world.hpp"
#include "json.hpp"

using namespace dprt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("dprt_test_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

synth::SyntheticWorldConfig small_linear_world(uint64_t seed, int travelers) {
  synth::SyntheticWorldConfig wc;
  wc.n_travelers = travelers;
  wc.n_destinations = 20;
  wc.listings_per_destination = 25;
  wc.latent_dim = 4;
  wc.rule = synth::BookingRule::Linear;
  wc.noise = 0.3;
  wc.seed = seed;
  return wc;
}

pipe::PipelineConfig small_pipeline(const std::string& events_path,
                                    int64_t boundary, uint64_t seed) {
  pipe::PipelineConfig pc;
  pc.events_path = events_path;
  pc.boundary_ms = boundary;
  pc.seed = seed;
  pc.combiner = nn::CombinerKind::Average;
  pc.skipgram.dim = 16;
  pc.skipgram.epochs = 3;
  pc.skipgram.min_count = 3;
  pc.skipgram.subsample_threshold = 0.02;
  pc.combiner_train.max_epochs = 40;
  pc.intent_boost.rounds = 40;
  pc.intent_boost.max_depth = 4;
  pc.intent_boost.learning_rate = 0.15;
  pc.value_boost.rounds = 25;
  pc.value_boost.max_depth = 3;
  return pc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate_world is byte-identical for a fixed seed") {
  const auto wc = small_linear_world(7, 200);
  std::ostringstream e1, t1, e2, t2;
  const auto s1 = synth::generate_world(wc, e1, t1);
  const auto s2 = synth::generate_world(wc, e2, t2);
  CHECK(e1.str() == e2.str());
  CHECK(t1.str() == t2.str());
  CHECK(s1.n_events == s2.n_events);
  CHECK(s1.n_events > 0);

  auto wc2 = wc;
  wc2.seed = 8;
  std::ostringstream e3, t3;
  synth::generate_world(wc2, e3, t3);
  CHECK(e1.str() != e3.str());
}

TEST_CASE("generated booking rate tracks the stored true probabilities") {
  auto wc = small_linear_world(3, 10000);
  wc.listings_per_destination = 10;
  std::ostringstream events, truth;
  const auto s = synth::generate_world(wc, events, truth);
  REQUIRE(s.n_traveler_periods > 5000);
  const double realized = static_cast<double>(s.n_bookings) /
                          static_cast<double>(s.n_traveler_periods);
  CHECK(std::fabs(realized - s.mean_true_probability) < 0.02);

  // truth file agrees with the summary
  std::istringstream tin(truth.str());
  std::string line;
  int64_t rows = 0, booked = 0;
  double p_sum = 0.0;
  while (std::getline(tin, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("kind") != "traveler_period") continue;
    ++rows;
    p_sum += j.at("p_book").get<double>();
    if (j.at("booked").get<bool>()) ++booked;
  }
  CHECK(rows == s.n_traveler_periods);
  CHECK(booked == s.n_bookings);
  CHECK(p_sum / rows == doctest::Approx(s.mean_true_probability).epsilon(1e-9));
}

TEST_CASE("travelers who view the same single listing share one probability") {
  synth::SyntheticWorldConfig wc;
  wc.n_travelers = 50;
  wc.n_destinations = 1;
  wc.listings_per_destination = 1;
  wc.latent_dim = 4;
  wc.noise = 0.0;
  wc.rule = synth::BookingRule::Linear;
  wc.seed = 5;
  std::ostringstream events, truth;
  synth::generate_world(wc, events, truth);
  std::istringstream tin(truth.str());
  std::string line;
  double p = -1.0;
  while (std::getline(tin, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("kind") != "traveler_period") continue;
    const double row_p = j.at("p_book").get<double>();
    if (p < 0.0) p = row_p;
    CHECK(row_p == p);
  }
  CHECK(p >= 0.0);
}

TEST_CASE("assemble_examples strips bookings from features but not labels") {
  std::vector<ActivityEvent> events;
  auto add = [&](int64_t ts, ActivityType type, const char* listing,
                 double value = -1.0) {
    ActivityEvent e;
    e.traveler_id = "t";
    e.timestamp_ms = ts;
    e.activity_type = type;
    if (listing) e.listing_id = listing;
    if (value >= 0) e.booking_value = value;
    events.push_back(e);
  };
  add(1000, ActivityType::View, "a");
  add(2000, ActivityType::Click, "a");
  add(3000, ActivityType::Booking, "a", 250.0);
  const embed::SkipGramModel no_model;
  const auto rows = pipe::assemble_examples(events, no_model, kDefaultSessionGapMs,
                                            50, /*strip_bookings=*/true);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label_intent == 1);
  CHECK(rows[0].label_value == doctest::Approx(250.0));
  CHECK(rows[0].clicks == 1);
  CHECK(rows[0].handcrafted[9] == 0.0);   // booking_count hidden from features
  CHECK(rows[0].handcrafted[10] == 0.0);  // booking_value_sum hidden as well
  CHECK(rows[0].handcrafted[0] == 1.0);

  const auto full = pipe::assemble_examples(events, no_model, kDefaultSessionGapMs,
                                            50, /*strip_bookings=*/false);
  CHECK(full[0].handcrafted[9] == 1.0);
  CHECK(full[0].handcrafted[10] == doctest::Approx(250.0));
}

TEST_CASE("run_pipeline on a small linear world recovers the signal") {
  TempDir tmp("pipeline_linear");
  const auto wc = small_linear_world(1, 1000);
  const auto summary = synth::generate_world_files(wc, tmp.file("events.ndjson"),
                                                   tmp.file("truth.ndjson"));
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 1);
  pc.out_dir = tmp.file("out");
  const auto art = pipe::run_pipeline(pc);

  REQUIRE(art.report.has_value());
  CHECK(art.report->auc > 0.8);
  CHECK(art.value_model.has_value());
  CHECK(art.thresholds.cuts.size() == 9);
  for (const char* name :
       {pipe::kEmbeddingsFile, pipe::kDestinationsFile, pipe::kCombinerFile,
        pipe::kIntentModelFile, pipe::kValueModelFile, pipe::kThresholdsFile,
        pipe::kMetricsJsonFile, pipe::kMetricsTextFile, pipe::kBucketsFile,
        pipe::kManifestFile}) {
    CHECK(fs::exists(fs::path(pc.out_dir) / name));
  }

  // manifest carries hashes for every persisted artifact
  const auto manifest = nlohmann::json::parse(slurp(pc.out_dir + "/manifest.json"));
  CHECK(manifest.at("artifacts").size() == 9);
  CHECK(manifest.at("settings").at("has_value_model").get<bool>());
}

TEST_CASE("run_pipeline is deterministic at the artifact-byte level") {
  TempDir tmp("pipeline_det");
  const auto wc = small_linear_world(2, 400);
  const auto summary = synth::generate_world_files(wc, tmp.file("events.ndjson"),
                                                   tmp.file("truth.ndjson"));
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 9);
  pc.out_dir = tmp.file("out1");
  pipe::run_pipeline(pc);
  pc.out_dir = tmp.file("out2");
  pipe::run_pipeline(pc);
  for (const char* name : {pipe::kMetricsJsonFile, pipe::kIntentModelFile,
                           pipe::kCombinerFile, pipe::kEmbeddingsFile,
                           pipe::kThresholdsFile, pipe::kBucketsFile}) {
    CHECK(slurp(tmp.file("out1") + "/" + name) == slurp(tmp.file("out2") + "/" + name));
  }
}

TEST_CASE("run_pipeline without bookings completes the intent path") {
  TempDir tmp("pipeline_nobook");
  const auto wc = small_linear_world(3, 300);
  std::ostringstream events, truth;
  const auto summary = synth::generate_world(wc, events, truth);
  // delete every booking from the log
  std::istringstream in(events.str());
  std::ofstream out(tmp.file("events.ndjson"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("\"booking\"") == std::string::npos) out << line << '\n';
  }
  out.close();
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 4);
  pc.out_dir = tmp.file("out");
  const auto art = pipe::run_pipeline(pc);
  CHECK_FALSE(art.value_model.has_value());
  CHECK_FALSE(art.report.has_value());  // single-class labels
  REQUIRE(art.warnings.size() >= 2);
  bool value_warning = false, label_warning = false;
  for (const auto& w : art.warnings) {
    if (w.find("value model absent") != std::string::npos) value_warning = true;
    if (w.find("single label class") != std::string::npos) label_warning = true;
  }
  CHECK(value_warning);
  CHECK(label_warning);
  CHECK_FALSE(fs::exists(fs::path(pc.out_dir) / pipe::kValueModelFile));
  // every scored traveler has r in (0,1) and a valid bucket
  for (const auto& s : art.scored) {
    CHECK(s.r > 0.0);
    CHECK(s.r < 1.0);
    CHECK(s.m == 0.0);
    CHECK(s.bucket >= 1);
    CHECK(s.bucket <= 10);
  }
}

TEST_CASE("stage failures carry the stage name") {
  pipe::PipelineConfig pc;
  pc.events_path = "/nonexistent/events.ndjson";
  try {
    pipe::run_pipeline(pc);
    FAIL("expected a pipeline error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("read-log") != std::string::npos);
  }
}

TEST_CASE("stream scoring matches batch scoring with no eviction") {
  TempDir tmp("stream_eq");
  const auto wc = small_linear_world(11, 300);
  const auto summary = synth::generate_world_files(wc, tmp.file("events.ndjson"),
                                                   tmp.file("truth.ndjson"));
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 21);
  pc.out_dir = tmp.file("out");
  pipe::run_pipeline(pc);

  const pipe::ModelBundle bundle = pipe::load_bundle(pc.out_dir);
  const auto log = read_event_log_file(tmp.file("events.ndjson"));
  const auto batch = pipe::score_batch(bundle, log.events);

  pipe::StreamScorer scorer(bundle, 1 << 20);
  std::unordered_map<std::string, pipe::ScoredTraveler> last;
  for (const ActivityEvent& e : log.events) {
    const auto s = scorer.process_event(e);
    last[s.traveler_id] = s;
  }
  REQUIRE(last.size() == batch.size());
  for (const auto& b : batch) {
    const auto& s = last.at(b.traveler_id);
    CHECK(std::fabs(s.r - b.r) <= 1e-9);
    CHECK(std::fabs(s.m - b.m) <= 1e-9);
    CHECK(std::fabs(s.u - b.u) <= 1e-9);
    CHECK(s.bucket == b.bucket);
  }
}

TEST_CASE("stream scorer emits for a cold traveler and skips bad lines") {
  TempDir tmp("stream_cold");
  const auto wc = small_linear_world(13, 300);
  const auto summary = synth::generate_world_files(wc, tmp.file("events.ndjson"),
                                                   tmp.file("truth.ndjson"));
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 22);
  pc.out_dir = tmp.file("out");
  pipe::run_pipeline(pc);
  pipe::StreamScorer scorer(pipe::load_bundle(pc.out_dir));

  std::string err;
  const auto scored = scorer.process_line(
      R"({"traveler_id":"fresh","ts":1700000000000,"type":"view","listing_id":"L00000"})",
      &err);
  REQUIRE(scored.has_value());
  const auto j = nlohmann::json::parse(*scored);
  CHECK(j.at("traveler_id") == "fresh");
  CHECK(j.at("r").get<double>() > 0.0);
  CHECK(j.at("r").get<double>() < 1.0);
  CHECK(j.at("bucket").get<int>() >= 1);

  CHECK_FALSE(scorer.process_line("not json at all", &err).has_value());
  CHECK(!err.empty());
  // the stream keeps going afterwards
  CHECK(scorer
            .process_line(
                R"({"traveler_id":"fresh","ts":1700000001000,"type":"click","listing_id":"L00000"})",
                &err)
            .has_value());
  // out-of-order events are rejected per traveler
  CHECK_FALSE(scorer
                  .process_line(
                      R"({"traveler_id":"fresh","ts":1000,"type":"view","listing_id":"L00000"})",
                      &err)
                  .has_value());
}

TEST_CASE("evicted travelers are rebuilt from subsequent events only") {
  TempDir tmp("stream_evict");
  const auto wc = small_linear_world(17, 300);
  const auto summary = synth::generate_world_files(wc, tmp.file("events.ndjson"),
                                                   tmp.file("truth.ndjson"));
  auto pc = small_pipeline(tmp.file("events.ndjson"), summary.boundary_ms, 23);
  pc.out_dir = tmp.file("out");
  pipe::run_pipeline(pc);
  const pipe::ModelBundle bundle = pipe::load_bundle(pc.out_dir);

  auto view = [](const char* traveler, int64_t ts, const char* listing) {
    ActivityEvent e;
    e.traveler_id = traveler;
    e.timestamp_ms = ts;
    e.activity_type = ActivityType::View;
    e.listing_id = listing;
    return e;
  };

  pipe::StreamScorer tight(bundle, /*max_travelers=*/1);
  tight.process_event(view("A", 1000, "L00001"));
  tight.process_event(view("B", 2000, "L00002"));  // evicts A
  CHECK(tight.tracked_travelers() == 1);
  const auto rebuilt = tight.process_event(view("A", 3000, "L00003"));

  pipe::StreamScorer fresh(bundle, 10);
  const auto from_scratch = fresh.process_event(view("A", 3000, "L00003"));
  CHECK(rebuilt.r == from_scratch.r);
  CHECK(rebuilt.m == from_scratch.m);
}
