#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace c2fpl {

// One video as an ordered run of segment feature vectors. Features are kept
// row-major (num_segments x dim) in a single buffer; row j is segment j in
// temporal order.
struct VideoRecord {
  std::string id;
  std::uint32_t frames_per_segment = 16;
  std::size_t dim = 0;
  std::vector<float> features;

  std::size_t num_segments() const { return dim == 0 ? 0 : features.size() / dim; }
  std::span<const float> segment(std::size_t j) const {
    return std::span<const float>(features).subspan(j * dim, dim);
  }

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

// All videos of a dataset. source_tag records provenance only (the file a
// bundle was read from, or the generator that produced it) and is not
// serialized, so equality ignores it.
struct FeatureBundle {
  std::size_t dim = 0;
  std::vector<VideoRecord> videos;
  std::string source_tag;

  std::size_t total_segments() const;
  const VideoRecord* find(const std::string& id) const;

  friend bool operator==(const FeatureBundle& a, const FeatureBundle& b) {
    return a.dim == b.dim && a.videos == b.videos;
  }
};

struct VideoSummary {
  std::string video_id;
  double mu = 0.0;
  double sigma = 0.0;
};

// Throws Error on the first violated bundle invariant: dimension_mismatch,
// non_finite, duplicate_id, or invalid_data (empty video, r == 0).
void validate_bundle(const FeatureBundle& bundle);

std::vector<std::uint8_t> encode_bundle(const FeatureBundle& bundle);
FeatureBundle decode_bundle(std::span<const std::uint8_t> data,
                            std::string source_tag = {});

FeatureBundle read_bundle(const std::filesystem::path& path);
void write_bundle(const FeatureBundle& bundle, const std::filesystem::path& path);

// l2 norm accumulated in double.
double segment_norm(std::span<const float> f);

// Mean and sample standard deviation (m - 1 denominator) of the segment
// norms. sigma is 0 for a single-segment video.
VideoSummary summarize_video(const VideoRecord& video);
std::vector<VideoSummary> summarize_bundle(const FeatureBundle& bundle);

}  // namespace c2fpl
