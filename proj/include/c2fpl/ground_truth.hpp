#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace c2fpl {

// Evaluation-only labels for one video. segment_labels may be empty when a
// manifest only carries frame labels.
struct VideoTruth {
  int video_label = 0;
  std::vector<std::uint8_t> segment_labels;
  std::vector<std::uint8_t> frame_labels;

  friend bool operator==(const VideoTruth&, const VideoTruth&) = default;
};

using GroundTruth = std::map<std::string, VideoTruth>;

// Sidecar manifest:
//   {"format": "c2fpl-truth", "version": 1,
//    "videos": {"<id>": {"video_label": 0|1,
//                        "segment_labels": [..], "frame_labels": [..]}}}
// video_label and segment_labels are optional on read; a missing
// video_label is derived as "any frame label is 1".
nlohmann::json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& j);

GroundTruth read_truth(const std::filesystem::path& path);
void write_truth(const GroundTruth& truth, const std::filesystem::path& path);

}  // namespace c2fpl
