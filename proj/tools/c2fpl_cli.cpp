// c2fpl command-line driver: every pipeline stage as a subcommand.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/checkpoint.hpp"
#include "c2fpl/cpl.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/eval.hpp"
#include "c2fpl/features.hpp"
#include "c2fpl/fpl.hpp"
#include "c2fpl/ground_truth.hpp"
#include "c2fpl/pipeline.hpp"
#include "c2fpl/rng.hpp"
#include "c2fpl/synth.hpp"

namespace fs = std::filesystem;
using namespace c2fpl;

namespace {

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_data, "cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + dir.string());
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "bad grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "empty grid");
  return grid;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

int fail(ErrorCode code, const std::string& message) {
  const int status = exit_code(code);
  std::cerr << "c2fpl: error code=" << to_string(code) << " exit=" << status << ": "
            << one_line(message) << "\n";
  return status;
}

struct Options {
  std::string config, out, bundle, truth, labels, model, scores, mode = "full", param, grid;
  std::string pvalues, manifest, report, test_bundle, test_truth;
  double eta = 1.0, beta = 0.2;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  int max_iters = 50;
  std::optional<std::size_t> epochs;
  bool per_video = false;
};

PipelineConfig pipeline_config(const Options& o, const CLI::App& sub) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg = pipeline_config_from_json(read_json(o.config));
  if (sub.count("--eta")) cfg.eta = o.eta;
  if (sub.count("--beta")) cfg.beta = o.beta;
  if (sub.count("--seed")) cfg.seed = o.seed;
  if (sub.count("--max-iters")) cfg.max_cpl_iters = o.max_iters;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (sub.get_option_no_throw("--mode") && sub.count("--mode")) {
    cfg.mode = parse_ablation_mode(o.mode);
  }
  return cfg;
}

int cmd_synth(const Options& o) {
  SynthConfig cfg;
  if (!o.config.empty()) cfg = synth_config_from_json(read_json(o.config));
  validate(cfg);
  const SynthDataset data = generate(cfg);
  ensure_dir(o.out);
  write_bundle(data.bundle, fs::path(o.out) / "bundle.c2fb");
  write_truth(data.truth, fs::path(o.out) / "truth.json");
  write_json(fs::path(o.out) / "synth_config.json", to_json(cfg));
  return 0;
}

int cmd_labels(const Options& o) {
  if (!(o.beta > 0.0 && o.beta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "--beta must lie in (0, 1)");
  }
  if (!(o.eta > 0.0)) throw Error(ErrorCode::invalid_argument, "--eta must be positive");
  const FeatureBundle bundle = read_bundle(o.bundle);
  const auto summaries = summarize_bundle(bundle);
  const CoarseLabels coarse =
      generate_coarse_labels(summaries, o.eta, derive_seed(o.seed, "cpl"), o.max_iters);
  const NullModel null_model = fit_null_model(bundle, coarse);
  const FineLabels fine = generate_fine_labels(bundle, coarse, null_model, o.beta);
  nlohmann::json doc = labels_json(coarse, fine);
  doc["null_model"] = {{"gamma", std::vector<double>(null_model.gamma().data(),
                                                     null_model.gamma().data() +
                                                         null_model.gamma().size())},
                       {"sigma", std::vector<double>(null_model.sigma().data(),
                                                     null_model.sigma().data() +
                                                         null_model.sigma().size())}};
  if (o.alpha) {
    doc["alpha_diagnostic"] = {{"alpha", *o.alpha},
                               {"below", count_below_alpha(bundle, null_model, *o.alpha)}};
  }
  write_json(o.out, doc);
  if (!o.pvalues.empty()) write_text_file(o.pvalues, p_values_csv(bundle, null_model));
  return 0;
}

int cmd_train(const Options& o, const CLI::App& sub) {
  TrainConfig cfg;
  if (!o.config.empty()) cfg = train_config_from_json(read_json(o.config));
  if (o.epochs) cfg.epochs = *o.epochs;
  if (sub.count("--seed")) cfg.seed = o.seed;
  validate(cfg);
  const FeatureBundle bundle = read_bundle(o.bundle);
  const auto doc = read_json(o.labels);
  const FineLabels fine = fine_from_json(doc.contains("fine") ? doc["fine"] : doc);
  TrainConfig effective = cfg;
  effective.seed = derive_seed(cfg.seed, "train");
  const TrainReport report = train(bundle, fine, effective);
  save_checkpoint({report.model, effective}, o.out);
  if (!o.report.empty()) {
    write_json(o.report, {{"epoch_loss", report.epoch_loss}, {"warnings", report.warnings}});
  }
  for (const auto& w : report.warnings) std::cerr << "c2fpl: warning: " << w << "\n";
  return 0;
}

int cmd_score(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.model);
  const FeatureBundle bundle = read_bundle(o.bundle);
  write_text_file(o.out, scores_to_csv(score_bundle(ck.model, bundle)));
  return 0;
}

int cmd_eval(const Options& o) {
  const auto scored = scores_from_csv(read_text_file(o.scores));
  const GroundTruth truth = read_truth(o.truth);
  const RocResult roc = frame_auc(scored, truth);
  nlohmann::json doc = to_json(roc);
  if (o.per_video) {
    nlohmann::json pv = nlohmann::json::object();
    for (const auto& [id, auc] : per_video_auc(scored, truth)) {
      pv[id] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
    }
    doc["per_video"] = pv;
  }
  if (roc.length_adjusted_videos > 0) {
    std::cerr << "c2fpl: warning: " << roc.length_adjusted_videos
              << " videos had truth length != scored frames (truncated/padded)\n";
  }
  write_json(o.out, doc);
  return 0;
}

int cmd_run(const Options& o, const CLI::App& sub) {
  const PipelineConfig cfg = pipeline_config(o, sub);
  if (needs_ground_truth(cfg.mode) && o.truth.empty()) {
    throw Error(ErrorCode::missing_ground_truth,
                "mode " + std::string(to_string(cfg.mode)) + " requires --truth");
  }
  if (o.test_bundle.empty() != o.test_truth.empty() && !o.test_truth.empty()) {
    throw Error(ErrorCode::invalid_argument, "--test-truth needs --test-bundle");
  }
  const FeatureBundle bundle = read_bundle(o.bundle);
  std::optional<GroundTruth> truth;
  if (!o.truth.empty()) truth = read_truth(o.truth);
  std::optional<FeatureBundle> test_bundle;
  std::optional<GroundTruth> test_truth;
  if (!o.test_bundle.empty()) test_bundle = read_bundle(o.test_bundle);
  if (!o.test_truth.empty()) test_truth = read_truth(o.test_truth);

  const RunResult r = run(bundle, truth ? &*truth : nullptr, cfg,
                          test_bundle ? &*test_bundle : nullptr,
                          test_truth ? &*test_truth : nullptr);
  ensure_dir(o.out);
  const fs::path out(o.out);
  write_json(out / "labels.json", labels_json(r.coarse, r.fine));
  if (r.training) {
    TrainConfig effective = cfg.train;
    effective.seed = derive_seed(cfg.seed, "train");
    save_checkpoint({r.training->model, effective}, out / "model.bin");
  }
  write_text_file(out / "scores.csv", scores_to_csv(r.scores));
  write_json(out / "metrics.json", metrics_json(r, cfg));
  if (!o.manifest.empty()) write_json(o.manifest, run_manifest(r, cfg));
  if (r.roc) std::cout << "auc " << format_double(r.roc->auc) << "\n";
  return 0;
}

int cmd_ablate(const Options& o, const CLI::App& sub) {
  const PipelineConfig base = pipeline_config(o, sub);
  const FeatureBundle bundle = read_bundle(o.bundle);
  const GroundTruth truth = read_truth(o.truth);
  std::ostringstream csv;
  csv << "mode,auc,positive_segments\n";
  for (auto mode : kAllModes) {
    PipelineConfig cfg = base;
    cfg.mode = mode;
    const RunResult r = run(bundle, &truth, cfg);
    csv << to_string(mode) << ',' << format_double(r.roc->auc) << ','
        << r.fine.positive_segments() << '\n';
  }
  write_text_file(o.out, csv.str());
  return 0;
}

int cmd_sweep(const Options& o, const CLI::App& sub) {
  if (o.param != "eta" && o.param != "beta") {
    throw Error(ErrorCode::invalid_argument, "--param must be eta or beta");
  }
  const auto grid = parse_grid(o.grid);
  const PipelineConfig base = pipeline_config(o, sub);
  const FeatureBundle bundle = read_bundle(o.bundle);
  const GroundTruth truth = read_truth(o.truth);
  write_text_file(o.out, sweep_csv(sweep(bundle, truth, base, o.param, grid)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video anomaly detection trained on pseudo-labels from unlabeled segment features"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic bundle with ground truth");
  synth->add_option("--config", o.config, "Synth config JSON");
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* labels = app.add_subcommand("labels", "Coarse + fine pseudo-labels for a bundle");
  labels->add_option("--bundle", o.bundle, "Feature bundle")->required();
  labels->add_option("--eta", o.eta, "Anomaly/normal cluster ratio threshold")->capture_default_str();
  labels->add_option("--beta", o.beta, "Window fraction")->capture_default_str();
  labels->add_option("--seed", o.seed, "Run seed")->capture_default_str();
  labels->add_option("--max-iters", o.max_iters, "Max divisive splits")->capture_default_str();
  labels->add_option("--alpha", o.alpha, "Diagnostic density level (not used for labeling)");
  labels->add_option("--pvalues", o.pvalues, "Write per-segment densities CSV");
  labels->add_option("--out", o.out, "Labels JSON")->required();

  auto* trn = app.add_subcommand("train", "Train the detector on pseudo-labels");
  trn->add_option("--bundle", o.bundle, "Feature bundle")->required();
  trn->add_option("--labels", o.labels, "Labels JSON from 'labels'")->required();
  trn->add_option("--config", o.config, "Train config JSON");
  trn->add_option("--seed", o.seed, "Run seed");
  trn->add_option("--epochs", o.epochs, "Override epochs");
  trn->add_option("--report", o.report, "Write per-epoch loss JSON");
  trn->add_option("--out", o.out, "Checkpoint path")->required();

  auto* score = app.add_subcommand("score", "Per-frame scores for a bundle");
  score->add_option("--model", o.model, "Checkpoint")->required();
  score->add_option("--bundle", o.bundle, "Feature bundle")->required();
  score->add_option("--out", o.out, "Scores CSV")->required();

  auto* eval = app.add_subcommand("eval", "Frame-level ROC-AUC of a scores CSV");
  eval->add_option("--scores", o.scores, "Scores CSV")->required();
  eval->add_option("--truth", o.truth, "Truth manifest JSON")->required();
  eval->add_flag("--per-video", o.per_video, "Add per-video AUC diagnostics");
  eval->add_option("--out", o.out, "Metrics JSON")->required();

  auto add_pipeline_flags = [&](CLI::App* sub) {
    sub->add_option("--bundle", o.bundle, "Training feature bundle")->required();
    sub->add_option("--config", o.config, "Pipeline config JSON");
    sub->add_option("--eta", o.eta, "Override eta");
    sub->add_option("--beta", o.beta, "Override beta");
    sub->add_option("--seed", o.seed, "Override run seed");
    sub->add_option("--max-iters", o.max_iters, "Override max divisive splits");
    sub->add_option("--epochs", o.epochs, "Override training epochs");
  };

  auto* run_cmd = app.add_subcommand("run", "End-to-end pipeline in one ablation mode");
  add_pipeline_flags(run_cmd);
  run_cmd->add_option("--mode", o.mode, "full|wscoarse|random_video_labels|cpl_only|"
                                        "ws_segments|random_segment_labels|no_detector")
      ->capture_default_str();
  run_cmd->add_option("--truth", o.truth, "Truth manifest (needed for AUC and ws modes)");
  run_cmd->add_option("--test-bundle", o.test_bundle, "Evaluate on this bundle instead");
  run_cmd->add_option("--test-truth", o.test_truth, "Truth for --test-bundle");
  run_cmd->add_option("--manifest", o.manifest, "Write run manifest JSON with timings");
  run_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Run every ablation mode, CSV of AUCs");
  add_pipeline_flags(ablate);
  ablate->add_option("--truth", o.truth, "Truth manifest")->required();
  ablate->add_option("--out", o.out, "Output CSV")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "AUC over an eta or beta grid");
  add_pipeline_flags(sweep_cmd);
  sweep_cmd->add_option("--param", o.param, "eta or beta")->required();
  sweep_cmd->add_option("--grid", o.grid, "Comma-separated values")->required();
  sweep_cmd->add_option("--truth", o.truth, "Truth manifest")->required();
  sweep_cmd->add_option("--out", o.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCode::invalid_argument, e.what());
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*labels) return cmd_labels(o);
    if (*trn) return cmd_train(o, *trn);
    if (*score) return cmd_score(o);
    if (*eval) return cmd_eval(o);
    if (*run_cmd) return cmd_run(o, *run_cmd);
    if (*ablate) return cmd_ablate(o, *ablate);
    if (*sweep_cmd) return cmd_sweep(o, *sweep_cmd);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::io, e.what());
  }
  return 0;
}
