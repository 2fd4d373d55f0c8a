#include "c2fpl/eval.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/parallel.hpp"

namespace c2fpl {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::invalid_data,
                "scores CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<double> expand_to_frames(std::span<const double> segment_scores,
                                     std::uint32_t frames_per_segment) {
  std::vector<double> frames;
  frames.reserve(segment_scores.size() * frames_per_segment);
  for (double s : segment_scores) frames.insert(frames.end(), frames_per_segment, s);
  return frames;
}

ScoredVideo make_scored_video(const VideoRecord& video, std::vector<double> segment_scores) {
  ScoredVideo sv;
  sv.video_id = video.id;
  sv.frames_per_segment = video.frames_per_segment;
  sv.frame_scores = expand_to_frames(segment_scores, video.frames_per_segment);
  sv.segment_scores = std::move(segment_scores);
  return sv;
}

std::vector<ScoredVideo> score_bundle(const DetectorModel& model, const FeatureBundle& bundle) {
  if (bundle.dim != model.input_dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "bundle d = " + std::to_string(bundle.dim) + " but model expects " +
                    std::to_string(model.input_dim()));
  }
  std::vector<ScoredVideo> out(bundle.videos.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const auto& v = bundle.videos[i];
    const Vector s = forward(model, video_matrix(v), false, 0);
    out[i] = make_scored_video(v, std::vector<double>(s.data(), s.data() + s.size()));
  });
  return out;
}

double auc_rank(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::dimension_mismatch, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::undefined_auc,
                "AUC is undefined without both positive and negative frames");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j+1 share their average.
    const double avg = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum += avg;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

std::vector<std::uint8_t> fit_truth_length(std::span<const std::uint8_t> truth, std::size_t n) {
  std::vector<std::uint8_t> out(truth.begin(), truth.begin() + std::min(truth.size(), n));
  const std::uint8_t fill = truth.empty() ? 0 : truth.back();
  out.resize(n, fill);
  return out;
}

RocResult frame_auc(std::span<const ScoredVideo> scored, const GroundTruth& truth) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  RocResult result;
  for (const auto& sv : scored) {
    const auto it = truth.find(sv.video_id);
    if (it == truth.end()) {
      throw Error(ErrorCode::missing_ground_truth,
                  "no ground truth for video '" + sv.video_id + "'");
    }
    const auto& frames = it->second.frame_labels;
    if (frames.size() != sv.frame_scores.size()) ++result.length_adjusted_videos;
    const auto fitted = fit_truth_length(frames, sv.frame_scores.size());
    scores.insert(scores.end(), sv.frame_scores.begin(), sv.frame_scores.end());
    labels.insert(labels.end(), fitted.begin(), fitted.end());
  }
  result.num_positive = static_cast<std::size_t>(std::ranges::count(labels, 1));
  result.num_negative = labels.size() - result.num_positive;
  result.auc = auc_rank(scores, labels);
  return result;
}

std::map<std::string, std::optional<double>> per_video_auc(std::span<const ScoredVideo> scored,
                                                           const GroundTruth& truth) {
  std::map<std::string, std::optional<double>> out;
  for (const auto& sv : scored) {
    const auto it = truth.find(sv.video_id);
    if (it == truth.end()) {
      throw Error(ErrorCode::missing_ground_truth,
                  "no ground truth for video '" + sv.video_id + "'");
    }
    const auto fitted = fit_truth_length(it->second.frame_labels, sv.frame_scores.size());
    try {
      out[sv.video_id] = auc_rank(sv.frame_scores, fitted);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::undefined_auc) throw;
      out[sv.video_id] = std::nullopt;
    }
  }
  return out;
}

std::vector<std::uint8_t> threshold_frames(const ScoredVideo& scored, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "threshold must lie in [0, 1]");
  }
  std::vector<std::uint8_t> out(scored.frame_scores.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = scored.frame_scores[i] > threshold ? 1 : 0;
  }
  return out;
}

nlohmann::json to_json(const RocResult& roc) {
  return {{"auc", roc.auc},
          {"num_positive", roc.num_positive},
          {"num_negative", roc.num_negative},
          {"length_adjusted_videos", roc.length_adjusted_videos}};
}

std::string scores_to_csv(std::span<const ScoredVideo> scored) {
  std::ostringstream out;
  out << "video_id,frame_index,score\n";
  for (const auto& sv : scored) {
    const std::string id = csv_field(sv.video_id);
    for (std::size_t f = 0; f < sv.frame_scores.size(); ++f) {
      out << id << ',' << f << ',' << format_double(sv.frame_scores[f]) << '\n';
    }
  }
  return out.str();
}

std::vector<ScoredVideo> scores_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("video_id,frame_index,score", 0) != 0) {
    throw Error(ErrorCode::invalid_data, "scores CSV must start with video_id,frame_index,score");
  }
  std::vector<ScoredVideo> out;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw Error(ErrorCode::invalid_data,
                  "scores CSV line " + std::to_string(line_no) + " needs 3 fields");
    }
    auto [it, inserted] = index.try_emplace(fields[0], out.size());
    if (inserted) out.push_back(ScoredVideo{fields[0], 0, {}, {}});
    auto& sv = out[it->second];
    const auto frame = parse_number<std::size_t>(fields[1], line_no);
    if (frame != sv.frame_scores.size()) {
      throw Error(ErrorCode::invalid_data, "scores CSV line " + std::to_string(line_no) +
                                               ": frames of a video must be contiguous");
    }
    sv.frame_scores.push_back(parse_number<double>(fields[2], line_no));
  }
  return out;
}

}  // namespace c2fpl
