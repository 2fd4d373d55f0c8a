#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "c2fpl/cpl.hpp"
#include "c2fpl/detector.hpp"
#include "c2fpl/eval.hpp"
#include "c2fpl/features.hpp"
#include "c2fpl/fpl.hpp"
#include "c2fpl/ground_truth.hpp"

namespace c2fpl {

// full: CPL -> FPL -> detector.
// wscoarse: ground-truth video labels replace CPL, then FPL -> detector.
// random_video_labels: random video labels replace CPL, then FPL -> detector.
// cpl_only: coarse labels copied to every segment, detector.
// ws_segments: ground-truth video labels copied to every segment, detector.
// random_segment_labels: random segment labels, detector.
// no_detector: CPL -> FPL, segments scored by 1 - normalized density.
enum class AblationMode {
  full,
  wscoarse,
  random_video_labels,
  cpl_only,
  ws_segments,
  random_segment_labels,
  no_detector,
};

inline constexpr std::array<AblationMode, 7> kAllModes = {
    AblationMode::full,        AblationMode::wscoarse,
    AblationMode::random_video_labels, AblationMode::cpl_only,
    AblationMode::ws_segments, AblationMode::random_segment_labels,
    AblationMode::no_detector};

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view name);
bool needs_ground_truth(AblationMode mode);

struct PipelineConfig {
  double eta = 1.0;
  double beta = 0.2;
  int max_cpl_iters = 50;
  AblationMode mode = AblationMode::full;
  std::uint64_t seed = 0;
  // train.seed is replaced by a seed derived from the run seed.
  TrainConfig train;
};

struct RunResult {
  std::optional<CoarseLabels> coarse;
  FineLabels fine;
  std::optional<TrainReport> training;
  std::vector<ScoredVideo> scores;
  std::optional<RocResult> roc;
  std::map<std::string, double> timings;  // seconds per stage
};

// Runs the staged pipeline for config.mode on the training bundle. Scores
// and AUC are computed on eval_bundle when given, else on the training
// bundle itself; AUC needs the matching truth. Throws missing_ground_truth
// when a supervised ablation has no truth.
RunResult run(const FeatureBundle& bundle, const GroundTruth* truth,
              const PipelineConfig& config, const FeatureBundle* eval_bundle = nullptr,
              const GroundTruth* eval_truth = nullptr);

// 1 - density / max density over every segment of the bundle.
std::vector<ScoredVideo> score_by_density(const FeatureBundle& bundle, const NullModel& model);

// Coarse labels copied onto every segment.
FineLabels copy_video_labels(const FeatureBundle& bundle,
                             const std::map<std::string, int>& video_labels);

nlohmann::json label_stats(const RunResult& result);
// Deterministic metrics document (no timings).
nlohmann::json metrics_json(const RunResult& result, const PipelineConfig& config);
// Full run manifest including stage timings.
nlohmann::json run_manifest(const RunResult& result, const PipelineConfig& config);

// Combined labels document: {"coarse": ..., "fine": ...}; coarse is null
// when the mode did not run CPL.
nlohmann::json labels_json(const std::optional<CoarseLabels>& coarse, const FineLabels& fine);

struct SweepPoint {
  std::string parameter;
  double value = 0.0;
  double auc = 0.0;
  std::size_t coarse_anomalous = 0;
  int cpl_iterations = 0;
  std::size_t positive_segments = 0;
};

// Runs the pipeline once per grid value of "eta" or "beta"; points run
// concurrently and all share the base seed.
std::vector<SweepPoint> sweep(const FeatureBundle& bundle, const GroundTruth& truth,
                              const PipelineConfig& base, std::string_view parameter,
                              const std::vector<double>& grid);
std::string sweep_csv(const std::vector<SweepPoint>& points);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

}  // namespace c2fpl
