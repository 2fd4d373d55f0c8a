#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "c2fpl/features.hpp"
#include "c2fpl/ground_truth.hpp"

namespace c2fpl {

struct SynthConfig {
  std::size_t n_videos = 200;
  double anomaly_video_fraction = 0.5;
  std::size_t d = 32;
  std::size_t m_min = 16;
  std::size_t m_max = 48;
  double normal_mean = 10.0;
  double normal_std = 1.0;
  double anomaly_shift = 6.0;  // in units of normal_std
  double window_fraction = 0.2;
  std::uint32_t frames_per_segment = 16;
  std::uint64_t seed = 0;
  // When non-empty, fixes the segment count of each video and overrides
  // n_videos and the [m_min, m_max] range.
  std::vector<std::size_t> segment_counts;
};

// Throws invalid_argument for out-of-range fields.
void validate(const SynthConfig& config);

struct SynthDataset {
  FeatureBundle bundle;
  GroundTruth truth;
};

// Each segment is a random unit direction scaled by a norm drawn from
// N(normal_mean, normal_std), shifted by anomaly_shift * normal_std inside
// the one planted window of an anomalous video. Deterministic in the seed.
SynthDataset generate(const SynthConfig& config);

nlohmann::json to_json(const SynthConfig& config);
// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace c2fpl
