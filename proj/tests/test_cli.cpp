#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "c2fpl/binary_io.hpp"
#include "temp_dir.hpp"

namespace {

struct Outcome {
  int status = -1;
  std::string output;
};

Outcome cli(const TempDir& dir, const std::string& args) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(C2FPL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  Outcome o;
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  o.output = ss.str();
  return o;
}

std::string path(const TempDir& dir, const std::string& name) { return (dir / name).string(); }

void write(const TempDir& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
}

void make_data(const TempDir& dir) {
  write(dir, "synth.json",
        R"({"n_videos": 30, "d": 8, "m_min": 8, "m_max": 12, "seed": 5})");
  write(dir, "pipe.json",
        R"({"train": {"epochs": 2, "hidden1": 32, "hidden2": 8, "batch_size": 64}})");
  REQUIRE(cli(dir, "synth --config " + path(dir, "synth.json") + " --out " + path(dir, "data"))
              .status == 0);
}

}  // namespace

TEST_CASE("help on every subcommand") {
  TempDir dir;
  const auto top = cli(dir, "--help");
  CHECK(top.status == 0);
  CHECK(top.output.find("Usage") != std::string::npos);
  for (const char* sub : {"synth", "labels", "train", "score", "eval", "run", "ablate", "sweep"}) {
    CAPTURE(sub);
    const auto o = cli(dir, std::string(sub) + " --help");
    CHECK(o.status == 0);
    CHECK(o.output.find("Usage") != std::string::npos);
  }
}

TEST_CASE("usage errors exit 2") {
  TempDir dir;
  CHECK(cli(dir, "").status == 2);
  CHECK(cli(dir, "frobnicate").status == 2);
  const auto o = cli(dir, "labels --bundle x.c2fb");
  CHECK(o.status == 2);
  CHECK(o.output.find("code=invalid_argument exit=2") != std::string::npos);
}

TEST_CASE("file errors") {
  TempDir dir;
  const auto missing = cli(dir, "labels --bundle " + path(dir, "none.c2fb") + " --out " + path(dir, "l.json"));
  CHECK(missing.status == 3);
  write(dir, "bad.c2fb", "NOTABUNDLEATALL!");
  const auto bad = cli(dir, "labels --bundle " + path(dir, "bad.c2fb") + " --out " + path(dir, "l.json"));
  CHECK(bad.status == 4);
  CHECK(bad.output.find("malformed_header") != std::string::npos);
}

TEST_CASE("staged commands") {
  TempDir dir;
  make_data(dir);
  const std::string bundle = path(dir, "data/bundle.c2fb");
  const std::string truth = path(dir, "data/truth.json");
  CHECK(std::filesystem::exists(dir / "data/synth_config.json"));

  REQUIRE(cli(dir, "labels --bundle " + bundle + " --alpha 0.01 --pvalues " + path(dir, "p.csv") +
                       " --out " + path(dir, "labels.json")).status == 0);
  REQUIRE(cli(dir, "labels --bundle " + bundle + " --alpha 0.01 --out " + path(dir, "labels2.json"))
              .status == 0);
  CHECK(c2fpl::read_file(dir / "labels.json") == c2fpl::read_file(dir / "labels2.json"));
  const auto doc = nlohmann::json::parse(c2fpl::read_text_file(dir / "labels.json"));
  CHECK(doc.contains("coarse"));
  CHECK(doc.contains("fine"));
  CHECK(doc.contains("null_model"));
  CHECK(doc.contains("alpha_diagnostic"));

  write(dir, "train.json", R"({"hidden1": 32, "hidden2": 8, "batch_size": 64})");
  REQUIRE(cli(dir, "train --bundle " + bundle + " --labels " + path(dir, "labels.json") +
                       " --config " + path(dir, "train.json") + " --epochs 2 --report " +
                       path(dir, "report.json") + " --out " + path(dir, "model.bin")).status == 0);
  const auto report = nlohmann::json::parse(c2fpl::read_text_file(dir / "report.json"));
  CHECK(report["epoch_loss"].size() == 2);

  REQUIRE(cli(dir, "score --model " + path(dir, "model.bin") + " --bundle " + bundle + " --out " +
                       path(dir, "scores.csv")).status == 0);
  REQUIRE(cli(dir, "eval --scores " + path(dir, "scores.csv") + " --truth " + truth +
                       " --per-video --out " + path(dir, "metrics.json")).status == 0);
  const auto metrics = nlohmann::json::parse(c2fpl::read_text_file(dir / "metrics.json"));
  CHECK(metrics["auc"].get<double>() >= 0.0);
  CHECK(metrics.contains("per_video"));
}

TEST_CASE("eval without positive frames exits 5") {
  TempDir dir;
  write(dir, "scores.csv", "video_id,frame_index,score\na,0,0.1\na,1,0.9\n");
  write(dir, "truth.json",
        R"({"format": "c2fpl-truth", "version": 1, "videos": {"a": {"frame_labels": [0, 0]}}})");
  const auto o = cli(dir, "eval --scores " + path(dir, "scores.csv") + " --truth " +
                              path(dir, "truth.json") + " --out " + path(dir, "m.json"));
  CHECK(o.status == 5);
  CHECK(o.output.find("undefined_auc") != std::string::npos);
}

TEST_CASE("end to end run is repeatable") {
  TempDir dir;
  make_data(dir);
  const std::string common = "run --bundle " + path(dir, "data/bundle.c2fb") + " --truth " +
                             path(dir, "data/truth.json") + " --config " + path(dir, "pipe.json") +
                             " --seed 3 --out ";
  const auto a = cli(dir, common + path(dir, "a") + " --manifest " + path(dir, "manifest.json"));
  REQUIRE(a.status == 0);
  CHECK(a.output.rfind("auc ", 0) == 0);
  REQUIRE(cli(dir, common + path(dir, "b")).status == 0);
  for (const char* f : {"labels.json", "model.bin", "scores.csv", "metrics.json"}) {
    CAPTURE(f);
    CHECK(c2fpl::read_file(dir / "a" / f) == c2fpl::read_file(dir / "b" / f));
  }
  const auto metrics = nlohmann::json::parse(c2fpl::read_text_file(dir / "a/metrics.json"));
  CHECK(metrics["roc"]["auc"].is_number());
  const auto manifest = nlohmann::json::parse(c2fpl::read_text_file(dir / "manifest.json"));
  CHECK(manifest.contains("timings"));

  const auto ws = cli(dir, "run --bundle " + path(dir, "data/bundle.c2fb") + " --mode wscoarse --out " +
                               path(dir, "c"));
  CHECK(ws.status == 4);
}

TEST_CASE("ablate and sweep write csv") {
  TempDir dir;
  make_data(dir);
  const std::string args = " --bundle " + path(dir, "data/bundle.c2fb") + " --truth " +
                           path(dir, "data/truth.json") + " --config " + path(dir, "pipe.json");
  REQUIRE(cli(dir, "ablate" + args + " --out " + path(dir, "ablate.csv")).status == 0);
  const auto ab = c2fpl::read_text_file(dir / "ablate.csv");
  CHECK(ab.rfind("mode,auc,positive_segments\nfull,", 0) == 0);
  CHECK(std::count(ab.begin(), ab.end(), '\n') == 8);

  REQUIRE(cli(dir, "sweep" + args + " --param beta --grid 0.1,0.2 --out " + path(dir, "sweep.csv"))
              .status == 0);
  const auto sw = c2fpl::read_text_file(dir / "sweep.csv");
  CHECK(std::count(sw.begin(), sw.end(), '\n') == 3);
  CHECK(cli(dir, "sweep" + args + " --param beta --grid 0.1,x --out " + path(dir, "s2.csv")).status == 2);
}
