#include "c2fpl/features.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/parallel.hpp"

namespace c2fpl {
namespace {

constexpr std::string_view kMagic = "C2FB";
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::size_t FeatureBundle::total_segments() const {
  std::size_t total = 0;
  for (const auto& v : videos) total += v.num_segments();
  return total;
}

const VideoRecord* FeatureBundle::find(const std::string& id) const {
  for (const auto& v : videos) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

void validate_bundle(const FeatureBundle& bundle) {
  if (bundle.dim == 0 && !bundle.videos.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "bundle dimension is zero");
  }
  std::unordered_set<std::string> seen;
  for (const auto& v : bundle.videos) {
    if (v.dim != bundle.dim) {
      throw Error(ErrorCode::dimension_mismatch,
                  "video '" + v.id + "' has dimension " + std::to_string(v.dim) +
                      ", bundle declares " + std::to_string(bundle.dim));
    }
    if (v.features.size() % bundle.dim != 0) {
      throw Error(ErrorCode::dimension_mismatch,
                  "video '" + v.id + "' feature buffer is not a multiple of d");
    }
    if (v.num_segments() == 0) {
      throw Error(ErrorCode::invalid_data, "video '" + v.id + "' has no segments");
    }
    if (v.frames_per_segment == 0) {
      throw Error(ErrorCode::invalid_data,
                  "video '" + v.id + "' has zero frames per segment");
    }
    if (v.id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::invalid_data, "video id too long");
    }
    for (float x : v.features) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::non_finite,
                    "video '" + v.id + "' contains a non-finite feature value");
      }
    }
    if (!seen.insert(v.id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate video id '" + v.id + "'");
    }
  }
}

std::vector<std::uint8_t> encode_bundle(const FeatureBundle& bundle) {
  validate_bundle(bundle);
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(bundle.dim));
  w.u32(static_cast<std::uint32_t>(bundle.videos.size()));
  for (const auto& v : bundle.videos) {
    w.u16(static_cast<std::uint16_t>(v.id.size()));
    w.bytes(v.id);
    w.u32(static_cast<std::uint32_t>(v.num_segments()));
    w.u32(v.frames_per_segment);
    for (float x : v.features) w.f32(x);
  }
  return w.buffer();
}

FeatureBundle decode_bundle(std::span<const std::uint8_t> data,
                            std::string source_tag) {
  ByteReader r(data);
  if (r.remaining() < 16) {
    throw Error(ErrorCode::malformed_header, "file too short for a bundle header");
  }
  if (r.bytes(4) != kMagic) {
    throw Error(ErrorCode::malformed_header, "bad magic, expected C2FB");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw Error(ErrorCode::malformed_header,
                "unsupported bundle version " + std::to_string(version));
  }
  FeatureBundle bundle;
  bundle.source_tag = std::move(source_tag);
  bundle.dim = r.u32();
  const std::uint32_t n = r.u32();
  if (bundle.dim == 0 && n > 0) {
    throw Error(ErrorCode::malformed_header, "bundle declares d = 0");
  }
  bundle.videos.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    VideoRecord v;
    v.dim = bundle.dim;
    const std::uint16_t id_len = r.u16();
    v.id = r.bytes(id_len);
    const std::uint32_t m = r.u32();
    v.frames_per_segment = r.u32();
    const std::size_t count = static_cast<std::size_t>(m) * bundle.dim;
    if (r.remaining() / 4 < count) {
      throw Error(ErrorCode::dimension_mismatch,
                  "video '" + v.id + "' declares " + std::to_string(m) +
                      " segments of dimension " + std::to_string(bundle.dim) +
                      " but the file is shorter");
    }
    v.features.resize(count);
    for (auto& x : v.features) x = r.f32();
    bundle.videos.push_back(std::move(v));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::dimension_mismatch,
                std::to_string(r.remaining()) + " trailing bytes after last video");
  }
  validate_bundle(bundle);
  return bundle;
}

FeatureBundle read_bundle(const std::filesystem::path& path) {
  return decode_bundle(read_file(path), path.string());
}

void write_bundle(const FeatureBundle& bundle, const std::filesystem::path& path) {
  write_file(path, encode_bundle(bundle));
}

double segment_norm(std::span<const float> f) {
  double sum = 0.0;
  for (float x : f) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

VideoSummary summarize_video(const VideoRecord& video) {
  const std::size_t m = video.num_segments();
  VideoSummary s{video.id, 0.0, 0.0};
  if (m == 0) return s;
  std::vector<double> norms(m);
  for (std::size_t j = 0; j < m; ++j) norms[j] = segment_norm(video.segment(j));
  double total = 0.0;
  for (double z : norms) total += z;
  s.mu = total / static_cast<double>(m);
  if (m > 1) {
    double ss = 0.0;
    for (double z : norms) ss += (z - s.mu) * (z - s.mu);
    s.sigma = std::sqrt(ss / static_cast<double>(m - 1));
  }
  return s;
}

std::vector<VideoSummary> summarize_bundle(const FeatureBundle& bundle) {
  if (bundle.videos.empty()) {
    throw Error(ErrorCode::insufficient_data, "cannot summarize an empty bundle");
  }
  std::vector<VideoSummary> out(bundle.videos.size());
  parallel_for(out.size(),
               [&](std::size_t i) { out[i] = summarize_video(bundle.videos[i]); });
  return out;
}

}  // namespace c2fpl
