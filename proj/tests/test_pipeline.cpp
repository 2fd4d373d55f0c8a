#include <doctest.h>

#include "c2fpl/checkpoint.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/pipeline.hpp"
#include "c2fpl/synth.hpp"

using namespace c2fpl;

namespace {

SynthDataset small_data() {
  SynthConfig sc;
  sc.n_videos = 60;
  sc.d = 8;
  sc.m_min = 8;
  sc.m_max = 16;
  sc.seed = 40;
  return generate(sc);
}

PipelineConfig quick(AblationMode mode) {
  PipelineConfig pc;
  pc.mode = mode;
  pc.seed = 41;
  pc.train.epochs = 8;
  pc.train.batch_size = 64;
  pc.train.arch.hidden1 = 64;
  pc.train.arch.hidden2 = 16;
  return pc;
}

}  // namespace

TEST_CASE("mode names") {
  for (auto m : kAllModes) CHECK(parse_ablation_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_ablation_mode("everything"), Error);
  CHECK(needs_ground_truth(AblationMode::wscoarse));
  CHECK(needs_ground_truth(AblationMode::ws_segments));
  CHECK_FALSE(needs_ground_truth(AblationMode::full));
}

TEST_CASE("every mode runs and reports an auc") {
  const auto data = small_data();
  for (auto m : kAllModes) {
    CAPTURE(to_string(m));
    const auto r = run(data.bundle, &data.truth, quick(m));
    REQUIRE(r.roc.has_value());
    CHECK(r.roc->auc >= 0.0);
    CHECK(r.roc->auc <= 1.0);
    CHECK(r.scores.size() == data.bundle.videos.size());
    CHECK(r.fine.total_segments() == data.bundle.total_segments());
    CHECK(r.training.has_value() == (m != AblationMode::no_detector));
  }
}

TEST_CASE("label sources per mode") {
  const auto data = small_data();
  const auto cpl_only = run(data.bundle, &data.truth, quick(AblationMode::cpl_only));
  for (const auto& [id, f] : cpl_only.fine.videos) {
    for (auto x : f.segment_labels) CHECK(x == cpl_only.coarse->labels.at(id));
  }
  const auto ws = run(data.bundle, &data.truth, quick(AblationMode::ws_segments));
  for (const auto& [id, f] : ws.fine.videos) {
    for (auto x : f.segment_labels) CHECK(x == data.truth.at(id).video_label);
  }
  const auto wsc = run(data.bundle, &data.truth, quick(AblationMode::wscoarse));
  for (const auto& [id, f] : wsc.fine.videos) CHECK(f.video_label == data.truth.at(id).video_label);

  const auto rnd = run(data.bundle, &data.truth, quick(AblationMode::random_segment_labels));
  const double share = static_cast<double>(rnd.fine.positive_segments()) /
                       static_cast<double>(rnd.fine.total_segments());
  CHECK(share == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("supervised ablations need truth") {
  const auto data = small_data();
  try {
    run(data.bundle, nullptr, quick(AblationMode::wscoarse));
    FAIL("expected missing_ground_truth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_ground_truth);
  }
  const auto r = run(data.bundle, nullptr, quick(AblationMode::full));
  CHECK_FALSE(r.roc.has_value());
}

TEST_CASE("density baseline scores lie in [0, 1]") {
  const auto data = small_data();
  const auto r = run(data.bundle, &data.truth, quick(AblationMode::no_detector));
  double lo = 1.0, hi = 0.0;
  for (const auto& sv : r.scores) {
    for (double s : sv.segment_scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  CHECK(lo == 0.0);
  CHECK(r.roc->auc > 0.8);
}

TEST_CASE("runs are deterministic") {
  const auto data = small_data();
  const auto cfg = quick(AblationMode::full);
  const auto a = run(data.bundle, &data.truth, cfg);
  const auto b = run(data.bundle, &data.truth, cfg);
  CHECK(labels_json(a.coarse, a.fine).dump() == labels_json(b.coarse, b.fine).dump());
  CHECK(metrics_json(a, cfg).dump() == metrics_json(b, cfg).dump());
  CHECK(encode_checkpoint({a.training->model, cfg.train}) ==
        encode_checkpoint({b.training->model, cfg.train}));
  CHECK(run_manifest(a, cfg).contains("timings"));
  CHECK_FALSE(metrics_json(a, cfg).contains("timings"));
}

TEST_CASE("ground-truth video labels do not hurt") {
  SynthConfig sc;
  sc.n_videos = 60;
  sc.d = 8;
  sc.m_min = 8;
  sc.m_max = 16;
  sc.anomaly_shift = 12.0;
  sc.seed = 42;
  const auto data = generate(sc);
  // eta below 1 stops the divisive loop right after the clean half split.
  auto cfg = quick(AblationMode::full);
  cfg.eta = 0.9;
  const auto full = run(data.bundle, &data.truth, cfg);
  cfg.mode = AblationMode::wscoarse;
  const auto ws = run(data.bundle, &data.truth, cfg);
  std::size_t agree = 0;
  for (const auto& [id, t] : data.truth) agree += full.coarse->labels.at(id) == t.video_label;
  CHECK(agree == data.truth.size());
  CHECK(ws.roc->auc >= full.roc->auc);
}

TEST_CASE("separate evaluation bundle") {
  const auto train_data = small_data();
  SynthConfig sc;
  sc.n_videos = 20;
  sc.d = 8;
  sc.seed = 99;
  const auto test_data = generate(sc);
  const auto r = run(train_data.bundle, &train_data.truth, quick(AblationMode::full),
                     &test_data.bundle, &test_data.truth);
  CHECK(r.scores.size() == 20);
  CHECK(r.roc.has_value());
}

TEST_CASE("sweep") {
  const auto data = small_data();
  auto cfg = quick(AblationMode::full);
  cfg.train.epochs = 2;
  const auto pts = sweep(data.bundle, data.truth, cfg, "eta", {0.5, 1.0, 1.5});
  REQUIRE(pts.size() == 3);
  CHECK(pts[1].value == 1.0);
  CHECK(pts[0].coarse_anomalous <= pts[2].coarse_anomalous);
  const auto csv = sweep_csv(pts);
  CHECK(csv.rfind("parameter,value,auc,coarse_anomalous,cpl_iterations,positive_segments\neta,0.5,", 0) == 0);
  CHECK_THROWS_AS(sweep(data.bundle, data.truth, cfg, "gamma", {1.0}), Error);
  CHECK_THROWS_AS(sweep(data.bundle, data.truth, cfg, "beta", {}), Error);
}

TEST_CASE("config json round trip") {
  auto cfg = quick(AblationMode::ws_segments);
  cfg.eta = 1.5;
  cfg.train.arch.attention = AttentionMode::residual_bd;
  const auto back = pipeline_config_from_json(to_json(cfg));
  CHECK(back.eta == 1.5);
  CHECK(back.mode == AblationMode::ws_segments);
  CHECK(back.train == cfg.train);
  CHECK_THROWS_AS(pipeline_config_from_json({{"train", {{"batch_size", 0}}}}), Error);
}
