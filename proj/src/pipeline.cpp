#include "c2fpl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/parallel.hpp"
#include "c2fpl/rng.hpp"

namespace c2fpl {
namespace {

class StageTimer {
 public:
  StageTimer(std::map<std::string, double>& sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    sink_[name_] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::map<std::string, double>& sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::map<std::string, int> truth_video_labels(const FeatureBundle& bundle,
                                              const GroundTruth& truth) {
  std::map<std::string, int> out;
  for (const auto& v : bundle.videos) {
    const auto it = truth.find(v.id);
    if (it == truth.end()) {
      throw Error(ErrorCode::missing_ground_truth, "no ground truth for video '" + v.id + "'");
    }
    out[v.id] = it->second.video_label;
  }
  return out;
}

CoarseLabels as_coarse(std::map<std::string, int> labels) {
  CoarseLabels c;
  c.labels = std::move(labels);
  const auto anomalous = static_cast<double>(c.count(1));
  const auto normal = static_cast<double>(c.count(0));
  c.final_ratio = normal > 0 ? anomalous / normal : 0.0;
  c.history.emplace_back(c.count(0), c.count(1));
  return c;
}

}  // namespace

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::full: return "full";
    case AblationMode::wscoarse: return "wscoarse";
    case AblationMode::random_video_labels: return "random_video_labels";
    case AblationMode::cpl_only: return "cpl_only";
    case AblationMode::ws_segments: return "ws_segments";
    case AblationMode::random_segment_labels: return "random_segment_labels";
    case AblationMode::no_detector: return "no_detector";
  }
  return "unknown";
}

AblationMode parse_ablation_mode(std::string_view name) {
  for (auto m : kAllModes) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_argument, "unknown mode '" + std::string(name) + "'");
}

bool needs_ground_truth(AblationMode mode) {
  return mode == AblationMode::wscoarse || mode == AblationMode::ws_segments;
}

FineLabels copy_video_labels(const FeatureBundle& bundle,
                             const std::map<std::string, int>& video_labels) {
  FineLabels fine;
  for (const auto& v : bundle.videos) {
    const auto it = video_labels.find(v.id);
    if (it == video_labels.end()) {
      throw Error(ErrorCode::invalid_data, "no video label for '" + v.id + "'");
    }
    fine.videos[v.id] = {it->second, std::nullopt,
                         std::vector<std::uint8_t>(v.num_segments(),
                                                   static_cast<std::uint8_t>(it->second))};
  }
  return fine;
}

std::vector<ScoredVideo> score_by_density(const FeatureBundle& bundle, const NullModel& model) {
  std::vector<std::vector<double>> densities(bundle.videos.size());
  double max_density = 0.0;
  for (std::size_t i = 0; i < bundle.videos.size(); ++i) {
    densities[i] = segment_p_values(model, bundle.videos[i]);
    for (double p : densities[i]) max_density = std::max(max_density, p);
  }
  std::vector<ScoredVideo> out;
  out.reserve(bundle.videos.size());
  for (std::size_t i = 0; i < bundle.videos.size(); ++i) {
    std::vector<double> scores(densities[i].size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
      scores[j] = max_density > 0.0 ? 1.0 - densities[i][j] / max_density : 1.0;
    }
    out.push_back(make_scored_video(bundle.videos[i], std::move(scores)));
  }
  return out;
}

RunResult run(const FeatureBundle& bundle, const GroundTruth* truth,
              const PipelineConfig& config, const FeatureBundle* eval_bundle,
              const GroundTruth* eval_truth) {
  if (needs_ground_truth(config.mode) && truth == nullptr) {
    throw Error(ErrorCode::missing_ground_truth,
                "mode " + std::string(to_string(config.mode)) + " requires ground truth");
  }
  if (!(config.beta > 0.0 && config.beta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1)");
  }
  if (!(config.eta > 0.0)) throw Error(ErrorCode::invalid_argument, "eta must be positive");
  validate(config.train);
  validate_bundle(bundle);

  RunResult result;
  const FeatureBundle& scored_bundle = eval_bundle ? *eval_bundle : bundle;
  const GroundTruth* scored_truth = eval_bundle ? eval_truth : truth;

  std::optional<CoarseLabels> coarse;
  const auto mode = config.mode;
  if (mode == AblationMode::full || mode == AblationMode::cpl_only ||
      mode == AblationMode::no_detector) {
    std::vector<VideoSummary> summaries;
    {
      StageTimer t(result.timings, "summarize");
      summaries = summarize_bundle(bundle);
    }
    StageTimer t(result.timings, "cpl");
    coarse = generate_coarse_labels(summaries, config.eta, derive_seed(config.seed, "cpl"),
                                    config.max_cpl_iters);
  } else if (mode == AblationMode::wscoarse || mode == AblationMode::ws_segments) {
    coarse = as_coarse(truth_video_labels(bundle, *truth));
  } else if (mode == AblationMode::random_video_labels) {
    Rng rng(derive_seed(config.seed, "ablation.random_video_labels"));
    std::map<std::string, int> labels;
    for (const auto& v : bundle.videos) labels[v.id] = uniform01(rng) < 0.5 ? 1 : 0;
    coarse = as_coarse(std::move(labels));
  }

  std::optional<NullModel> null_model;
  {
    StageTimer t(result.timings, "fpl");
    switch (mode) {
      case AblationMode::full:
      case AblationMode::wscoarse:
      case AblationMode::random_video_labels:
      case AblationMode::no_detector:
        if (coarse->count(1) > 0 || mode == AblationMode::no_detector) {
          null_model = fit_null_model(bundle, *coarse);
          result.fine = generate_fine_labels(bundle, *coarse, *null_model, config.beta);
        } else {
          result.fine = generate_fine_labels(bundle, *coarse, config.beta);
        }
        break;
      case AblationMode::cpl_only:
      case AblationMode::ws_segments:
        result.fine = copy_video_labels(bundle, coarse->labels);
        break;
      case AblationMode::random_segment_labels: {
        Rng rng(derive_seed(config.seed, "ablation.random_segment_labels"));
        for (const auto& v : bundle.videos) {
          VideoFineLabels f;
          f.segment_labels.resize(v.num_segments());
          for (auto& l : f.segment_labels) l = uniform01(rng) < 0.5 ? 1 : 0;
          f.video_label = std::ranges::any_of(f.segment_labels, [](auto l) { return l != 0; });
          result.fine.videos[v.id] = std::move(f);
        }
        break;
      }
    }
  }
  result.coarse = std::move(coarse);

  if (mode == AblationMode::no_detector) {
    StageTimer t(result.timings, "score");
    result.scores = score_by_density(scored_bundle, *null_model);
  } else {
    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.seed, "train");
    {
      StageTimer t(result.timings, "train");
      result.training = train(bundle, result.fine, tc);
    }
    StageTimer t(result.timings, "score");
    result.scores = score_bundle(result.training->model, scored_bundle);
  }

  if (scored_truth != nullptr) {
    StageTimer t(result.timings, "eval");
    result.roc = frame_auc(result.scores, *scored_truth);
  }
  return result;
}

nlohmann::json label_stats(const RunResult& r) {
  nlohmann::json j = {{"videos", r.fine.videos.size()},
                      {"segments", r.fine.total_segments()},
                      {"positive_segments", r.fine.positive_segments()}};
  std::size_t anomalous_videos = 0;
  for (const auto& [id, v] : r.fine.videos) anomalous_videos += v.video_label ? 1 : 0;
  j["anomalous_videos"] = anomalous_videos;
  if (r.coarse) {
    j["cpl_iterations"] = r.coarse->iterations_used;
    j["cpl_final_ratio"] = r.coarse->final_ratio;
    j["cpl_stop_reason"] = to_string(r.coarse->stop_reason);
  }
  return j;
}

nlohmann::json metrics_json(const RunResult& r, const PipelineConfig& config) {
  nlohmann::json j = {{"mode", to_string(config.mode)}, {"labels", label_stats(r)}};
  j["roc"] = r.roc ? to_json(*r.roc) : nlohmann::json(nullptr);
  if (r.training) {
    j["final_epoch_loss"] =
        r.training->epoch_loss.empty() ? nlohmann::json(nullptr)
                                       : nlohmann::json(r.training->epoch_loss.back());
  }
  return j;
}

nlohmann::json run_manifest(const RunResult& r, const PipelineConfig& config) {
  nlohmann::json j = {{"config", to_json(config)},
                      {"timings", r.timings},
                      {"metrics", metrics_json(r, config)}};
  if (r.training) {
    j["training"] = {{"epoch_loss", r.training->epoch_loss},
                     {"epoch_seconds", r.training->epoch_seconds},
                     {"warnings", r.training->warnings}};
  }
  return j;
}

nlohmann::json labels_json(const std::optional<CoarseLabels>& coarse, const FineLabels& fine) {
  return {{"coarse", coarse ? to_json(*coarse) : nlohmann::json(nullptr)},
          {"fine", to_json(fine)}};
}

std::vector<SweepPoint> sweep(const FeatureBundle& bundle, const GroundTruth& truth,
                              const PipelineConfig& base, std::string_view parameter,
                              const std::vector<double>& grid) {
  if (parameter != "eta" && parameter != "beta") {
    throw Error(ErrorCode::invalid_argument, "sweep parameter must be eta or beta");
  }
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "sweep grid is empty");
  std::vector<SweepPoint> points(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    PipelineConfig cfg = base;
    if (parameter == "eta") {
      cfg.eta = grid[i];
    } else {
      cfg.beta = grid[i];
    }
    const RunResult r = run(bundle, &truth, cfg);
    SweepPoint& p = points[i];
    p.parameter = std::string(parameter);
    p.value = grid[i];
    p.auc = r.roc->auc;
    p.positive_segments = r.fine.positive_segments();
    if (r.coarse) {
      p.coarse_anomalous = r.coarse->count(1);
      p.cpl_iterations = r.coarse->iterations_used;
    }
  });
  return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "parameter,value,auc,coarse_anomalous,cpl_iterations,positive_segments\n";
  for (const auto& p : points) {
    out << p.parameter << ',' << format_double(p.value) << ',' << format_double(p.auc) << ','
        << p.coarse_anomalous << ',' << p.cpl_iterations << ',' << p.positive_segments << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"l2_lambda", c.l2_lambda},
          {"seed", c.seed},
          {"hidden1", c.arch.hidden1},
          {"hidden2", c.arch.hidden2},
          {"dropout_rate", c.arch.dropout_rate},
          {"attention", to_string(c.arch.attention)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
    c.seed = j.value("seed", c.seed);
    c.arch.hidden1 = j.value("hidden1", c.arch.hidden1);
    c.arch.hidden2 = j.value("hidden2", c.arch.hidden2);
    c.arch.dropout_rate = j.value("dropout_rate", c.arch.dropout_rate);
    if (j.contains("attention")) {
      c.arch.attention = parse_attention_mode(j["attention"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad train config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"eta", c.eta},
          {"beta", c.beta},
          {"max_cpl_iters", c.max_cpl_iters},
          {"mode", to_string(c.mode)},
          {"seed", c.seed},
          {"train", to_json(c.train)}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig c) {
  try {
    c.eta = j.value("eta", c.eta);
    c.beta = j.value("beta", c.beta);
    c.max_cpl_iters = j.value("max_cpl_iters", c.max_cpl_iters);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) c.mode = parse_ablation_mode(j["mode"].get<std::string>());
    if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("bad pipeline config: ") + e.what());
  }
  return c;
}

}  // namespace c2fpl
