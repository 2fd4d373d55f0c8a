#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2fpl/detector.hpp"
#include "c2fpl/features.hpp"
#include "c2fpl/ground_truth.hpp"

namespace c2fpl {

struct ScoredVideo {
  std::string video_id;
  std::uint32_t frames_per_segment = 0;
  std::vector<double> segment_scores;
  std::vector<double> frame_scores;  // segment_scores, each repeated r times
};

struct RocResult {
  double auc = 0.5;
  std::size_t num_positive = 0;
  std::size_t num_negative = 0;
  // Videos whose truth length differed from m * r and was truncated or
  // padded with its last label.
  std::size_t length_adjusted_videos = 0;
};

// Repeats each segment score r times.
std::vector<double> expand_to_frames(std::span<const double> segment_scores,
                                     std::uint32_t frames_per_segment);

ScoredVideo make_scored_video(const VideoRecord& video, std::vector<double> segment_scores);

// Inference pass, one batch per video. Throws dimension_mismatch when the
// bundle and model disagree on d.
std::vector<ScoredVideo> score_bundle(const DetectorModel& model, const FeatureBundle& bundle);

// Area under the ROC curve by the rank (Mann-Whitney) method; tied scores
// share their average rank. Throws undefined_auc without both classes.
double auc_rank(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Truth labels fitted to n frames: truncated, or padded with the last label.
std::vector<std::uint8_t> fit_truth_length(std::span<const std::uint8_t> truth, std::size_t n);

// AUC over the pooled frames of every scored video. Throws
// missing_ground_truth when a video has no truth entry.
RocResult frame_auc(std::span<const ScoredVideo> scored, const GroundTruth& truth);

// Diagnostic AUC per video; nullopt where a video has a single class.
std::map<std::string, std::optional<double>> per_video_auc(std::span<const ScoredVideo> scored,
                                                           const GroundTruth& truth);

// 1 where the frame score exceeds the threshold.
std::vector<std::uint8_t> threshold_frames(const ScoredVideo& scored, double threshold);

nlohmann::json to_json(const RocResult& roc);

// CSV with header video_id,frame_index,score. Reading restores frame scores
// only; segment scores and r are not recoverable from this format.
std::string scores_to_csv(std::span<const ScoredVideo> scored);
std::vector<ScoredVideo> scores_from_csv(const std::string& text);

}  // namespace c2fpl
