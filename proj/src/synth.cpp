#include "c2fpl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "c2fpl/error.hpp"
#include "c2fpl/fpl.hpp"
#include "c2fpl/rng.hpp"

namespace c2fpl {

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); };
  if (c.segment_counts.empty() && c.n_videos == 0) fail("n_videos must be positive");
  for (auto m : c.segment_counts) {
    if (m < 2) fail("segment_counts entries must be at least 2");
  }
  if (!(c.anomaly_video_fraction >= 0.0 && c.anomaly_video_fraction < 1.0)) {
    fail("anomaly_video_fraction must lie in [0, 1)");
  }
  if (c.d == 0) fail("d must be positive");
  if (c.segment_counts.empty() && (c.m_min < 2 || c.m_max < c.m_min)) {
    fail("segment range needs 2 <= m_min <= m_max");
  }
  if (!(c.normal_std > 0.0)) fail("normal_std must be positive");
  if (!(c.normal_mean >= 0.0)) fail("normal_mean must be non-negative");
  if (!(c.anomaly_shift > 0.0)) fail("anomaly_shift must be positive");
  if (!(c.window_fraction > 0.0 && c.window_fraction < 1.0)) {
    fail("window_fraction must lie in (0, 1)");
  }
  if (c.frames_per_segment == 0) fail("frames_per_segment must be positive");
}

SynthDataset generate(const SynthConfig& c) {
  validate(c);
  Rng rng(derive_seed(c.seed, "synth"));
  const std::size_t n_videos = c.segment_counts.empty() ? c.n_videos : c.segment_counts.size();

  const auto n_anomalous = static_cast<std::size_t>(
      std::llround(c.anomaly_video_fraction * static_cast<double>(n_videos)));
  std::vector<std::size_t> order(n_videos);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> anomalous(n_videos, false);
  for (std::size_t k = 0; k < n_anomalous; ++k) anomalous[order[k]] = true;

  SynthDataset out;
  out.bundle.dim = c.d;
  out.bundle.source_tag = "synth:seed=" + std::to_string(c.seed);
  std::vector<double> direction(c.d);
  for (std::size_t i = 0; i < n_videos; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "video_%05zu", i);

    std::size_t m = 0;
    if (c.segment_counts.empty()) {
      const std::size_t span = c.m_max - c.m_min + 1;
      m = c.m_min + std::min(span - 1, static_cast<std::size_t>(uniform01(rng) * span));
    } else {
      m = c.segment_counts[i];
    }

    VideoTruth truth;
    truth.video_label = anomalous[i] ? 1 : 0;
    truth.segment_labels.assign(m, 0);
    if (anomalous[i]) {
      const std::size_t w = window_length(c.window_fraction, m);
      const std::size_t slots = m - w + 1;
      const std::size_t start =
          std::min(slots - 1, static_cast<std::size_t>(uniform01(rng) * slots));
      std::fill_n(truth.segment_labels.begin() + start, w, 1);
    }

    VideoRecord video;
    video.id = id;
    video.dim = c.d;
    video.frames_per_segment = c.frames_per_segment;
    video.features.reserve(m * c.d);
    for (std::size_t j = 0; j < m; ++j) {
      double len = 0.0;
      do {
        for (auto& x : direction) x = standard_normal(rng);
        len = std::sqrt(std::inner_product(direction.begin(), direction.end(),
                                           direction.begin(), 0.0));
      } while (len == 0.0);
      double norm = c.normal_mean + c.normal_std * standard_normal(rng);
      if (truth.segment_labels[j]) norm += c.anomaly_shift * c.normal_std;
      norm = std::max(norm, 0.0);
      for (double x : direction) video.features.push_back(static_cast<float>(x / len * norm));
    }

    truth.frame_labels.reserve(m * c.frames_per_segment);
    for (auto l : truth.segment_labels) {
      truth.frame_labels.insert(truth.frame_labels.end(), c.frames_per_segment, l);
    }
    out.truth.emplace(video.id, std::move(truth));
    out.bundle.videos.push_back(std::move(video));
  }
  return out;
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_videos", c.n_videos},
          {"anomaly_video_fraction", c.anomaly_video_fraction},
          {"d", c.d},
          {"m_min", c.m_min},
          {"m_max", c.m_max},
          {"normal_mean", c.normal_mean},
          {"normal_std", c.normal_std},
          {"anomaly_shift", c.anomaly_shift},
          {"window_fraction", c.window_fraction},
          {"frames_per_segment", c.frames_per_segment},
          {"seed", c.seed},
          {"segment_counts", c.segment_counts}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.n_videos = j.value("n_videos", c.n_videos);
    c.anomaly_video_fraction = j.value("anomaly_video_fraction", c.anomaly_video_fraction);
    c.d = j.value("d", c.d);
    c.m_min = j.value("m_min", c.m_min);
    c.m_max = j.value("m_max", c.m_max);
    c.normal_mean = j.value("normal_mean", c.normal_mean);
    c.normal_std = j.value("normal_std", c.normal_std);
    c.anomaly_shift = j.value("anomaly_shift", c.anomaly_shift);
    c.window_fraction = j.value("window_fraction", c.window_fraction);
    c.frames_per_segment = j.value("frames_per_segment", c.frames_per_segment);
    c.seed = j.value("seed", c.seed);
    c.segment_counts = j.value("segment_counts", c.segment_counts);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad synth config: ") + e.what());
  }
  return c;
}

}  // namespace c2fpl
