#include "c2fpl/ground_truth.hpp"

#include <algorithm>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"

namespace c2fpl {
namespace {

std::vector<std::uint8_t> binary_labels(const nlohmann::json& arr,
                                        const std::string& what) {
  if (!arr.is_array()) {
    throw Error(ErrorCode::invalid_data, what + " must be an array");
  }
  std::vector<std::uint8_t> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw Error(ErrorCode::invalid_data, what + " entries must be 0 or 1");
    }
    out.push_back(static_cast<std::uint8_t>(v.get<int>()));
  }
  return out;
}

}  // namespace

nlohmann::json truth_to_json(const GroundTruth& truth) {
  nlohmann::json videos = nlohmann::json::object();
  for (const auto& [id, t] : truth) {
    videos[id] = {{"video_label", t.video_label},
                  {"segment_labels", t.segment_labels},
                  {"frame_labels", t.frame_labels}};
  }
  return {{"format", "c2fpl-truth"}, {"version", 1}, {"videos", videos}};
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("videos") || !j["videos"].is_object()) {
    throw Error(ErrorCode::invalid_data, "truth manifest needs a 'videos' object");
  }
  GroundTruth truth;
  for (const auto& [id, v] : j["videos"].items()) {
    VideoTruth t;
    if (!v.contains("frame_labels")) {
      throw Error(ErrorCode::invalid_data, "video '" + id + "' has no frame_labels");
    }
    t.frame_labels = binary_labels(v["frame_labels"], "frame_labels of '" + id + "'");
    if (v.contains("segment_labels")) {
      t.segment_labels =
          binary_labels(v["segment_labels"], "segment_labels of '" + id + "'");
    }
    if (v.contains("video_label")) {
      t.video_label = v["video_label"].get<int>() != 0 ? 1 : 0;
    } else {
      t.video_label = std::ranges::any_of(t.frame_labels,
                                          [](std::uint8_t x) { return x != 0; })
                          ? 1
                          : 0;
    }
    truth.emplace(id, std::move(t));
  }
  return truth;
}

GroundTruth read_truth(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_data,
                "cannot parse truth manifest " + path.string() + ": " + e.what());
  }
  return truth_from_json(j);
}

void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  write_text_file(path, truth_to_json(truth).dump(1) + "\n");
}

}  // namespace c2fpl
