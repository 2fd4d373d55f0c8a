#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "c2fpl/cpl.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/fpl.hpp"
#include "c2fpl/synth.hpp"
#include "oracles.hpp"

using namespace c2fpl;

namespace {

VideoRecord video_with_norms(const std::string& id, const std::vector<double>& norms) {
  VideoRecord v;
  v.id = id;
  v.dim = 2;
  for (double n : norms) {
    v.features.push_back(0.0f);
    v.features.push_back(static_cast<float>(n));
  }
  return v;
}

CoarseLabels coarse_from(std::map<std::string, int> labels) {
  CoarseLabels c;
  c.labels = std::move(labels);
  return c;
}

NullModel standard_normal_model() {
  return NullModel(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
}

double p1(const NullModel& m, double z) { return p_value(m, std::vector<double>{z}); }

std::size_t oracle_window_length(int tenths, std::size_t m) {
  const std::size_t w = (static_cast<std::size_t>(tenths) * m + 9) / 10;
  return std::clamp<std::size_t>(w, 1, m);
}

}  // namespace

TEST_CASE("segment representation") {
  CHECK(segment_representation(std::vector<float>(4, 0.0f)) == std::vector<double>{0.0});
  CHECK(segment_representation(std::vector<float>{3.0f, 4.0f}) == std::vector<double>{5.0});
  std::mt19937 gen(1);
  std::normal_distribution<float> n;
  for (int t = 0; t < 20; ++t) {
    std::vector<float> f(16);
    for (auto& x : f) x = n(gen);
    CHECK(segment_representation(f).at(0) == segment_norm(f));
  }
}

TEST_CASE("null model from hand values") {
  FeatureBundle b;
  b.dim = 2;
  b.videos = {video_with_norms("n", {1.0, 2.0, 3.0}), video_with_norms("a", {50.0, 60.0})};
  const auto m = fit_null_model(b, coarse_from({{"n", 0}, {"a", 1}}));
  CHECK(m.gamma()(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(m.sigma()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  try {
    fit_null_model(b, coarse_from({{"n", 1}, {"a", 1}}));
    FAIL("expected insufficient_data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_data);
  }
}

TEST_CASE("constant normal segments hit the variance floor") {
  FeatureBundle b;
  b.dim = 2;
  b.videos = {video_with_norms("n", {4.0, 4.0, 4.0})};
  const auto m = fit_null_model(b, coarse_from({{"n", 0}}));
  CHECK(m.sigma()(0, 0) == kVarianceFloor);
  CHECK(std::isfinite(p1(m, 4.0)));
}

TEST_CASE("null model matches straight-line oracle") {
  SynthConfig sc;
  sc.n_videos = 40;
  sc.d = 8;
  sc.seed = 4;
  const auto data = generate(sc);
  std::map<std::string, int> labels;
  std::vector<double> z;
  for (const auto& v : data.bundle.videos) {
    const int label = data.truth.at(v.id).video_label;
    labels[v.id] = label;
    if (label != 0) continue;
    for (std::size_t j = 0; j < v.num_segments(); ++j) {
      z.push_back(oracle::norm(&v.features[j * v.dim], v.dim));
    }
  }
  const auto expect = oracle::mean_std(z);
  const auto m = fit_null_model(data.bundle, coarse_from(labels));
  CHECK(m.gamma()(0) == doctest::Approx(expect.mean).epsilon(1e-12));
  CHECK(m.sigma()(0, 0) == doctest::Approx(expect.std * expect.std).epsilon(1e-12));
}

TEST_CASE("density values") {
  const auto m = standard_normal_model();
  CHECK(std::abs(p1(m, 0.0) - 0.3989422804) < 1e-9);
  CHECK(std::abs(p1(m, 1.0) - 0.2419707245) < 1e-9);

  const NullModel shifted(Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 4.0));
  for (double c : {0.1, 1.0, 2.5, 7.0}) {
    CHECK(p1(shifted, 3.0 + c) == doctest::Approx(p1(shifted, 3.0 - c)).epsilon(1e-14));
    const double expect =
        std::exp(-0.5 * c * c / 4.0) / std::sqrt(2.0 * std::numbers::pi * 4.0);
    CHECK(p1(shifted, 3.0 + c) == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("multivariate density") {
  Eigen::MatrixXd s(2, 2);
  s << 2.0, 0.5, 0.5, 1.0;
  const NullModel m(Eigen::Vector2d(1.0, -1.0), s);
  const std::vector<double> z{2.0, 0.5};
  const Eigen::Vector2d d(1.0, 1.5);
  const double q = d.dot(s.inverse() * d);
  const double expect = std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(s.determinant()));
  CHECK(p_value(m, z) == doctest::Approx(expect).epsilon(1e-13));

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(NullModel(Eigen::Vector2d::Zero(), bad), Error);
}

TEST_CASE("window length") {
  CHECK(window_length(0.4, 5) == 2);
  CHECK(window_length(0.2, 10) == 2);
  CHECK(window_length(0.1, 30) == 3);
  CHECK(window_length(0.3, 10) == 3);
  CHECK(window_length(0.2, 11) == 3);
  CHECK(window_length(0.01, 5) == 1);
  CHECK(window_length(0.999, 1) == 1);
}

TEST_CASE("window selection examples") {
  const std::vector<double> p{0.9, 0.1, 0.1, 0.9, 0.9};
  CHECK(select_window(p, 0.4) == Window{1, 2});
  const std::vector<double> flat(10, 0.3);
  CHECK(select_window(flat, 0.2) == Window{0, 2});
  CHECK_THROWS_AS(select_window(std::vector<double>{}, 0.2), Error);
  CHECK_THROWS_AS(select_window(p, 0.0), Error);
  CHECK_THROWS_AS(select_window(p, 1.0), Error);
}

TEST_CASE("window selection matches exhaustive scan") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = len(gen);
    std::vector<double> p(m);
    // Half the trials use a coarse value grid so that ties are common.
    const bool ties = trial % 2 == 1;
    for (auto& x : p) x = ties ? 0.1 * coarse(gen) : u(gen);
    for (int tenths : {1, 2, 3}) {
      const std::size_t w = oracle_window_length(tenths, m);
      const auto got = select_window(p, tenths / 10.0);
      if (got.length != w || got.start != oracle::window_start(p, w)) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("fine labels without anomalous videos") {
  SynthConfig sc;
  sc.n_videos = 10;
  sc.d = 4;
  const auto data = generate(sc);
  std::map<std::string, int> labels;
  for (const auto& v : data.bundle.videos) labels[v.id] = 0;
  const auto fine = generate_fine_labels(data.bundle, coarse_from(labels), 0.2);
  CHECK(fine.positive_segments() == 0);
  CHECK(fine.total_segments() == data.bundle.total_segments());
  for (const auto& [id, v] : fine.videos) CHECK_FALSE(v.window.has_value());
}

TEST_CASE("fine labels structure") {
  SynthConfig sc;
  sc.n_videos = 60;
  sc.d = 8;
  sc.seed = 5;
  const auto data = generate(sc);
  const auto coarse = generate_coarse_labels(summarize_bundle(data.bundle), 1.0, 5);
  const auto fine = generate_fine_labels(data.bundle, coarse, 0.2);
  for (const auto& v : data.bundle.videos) {
    const auto& f = fine.videos.at(v.id);
    CHECK(f.video_label == coarse.labels.at(v.id));
    CHECK(f.segment_labels.size() == v.num_segments());
    std::size_t ones = 0;
    for (auto x : f.segment_labels) ones += x;
    if (f.video_label == 0) {
      CHECK(ones == 0);
      CHECK_FALSE(f.window.has_value());
    } else {
      REQUIRE(f.window.has_value());
      CHECK(ones == window_length(0.2, v.num_segments()));
      for (std::size_t j = 0; j < v.num_segments(); ++j) {
        const bool inside = j >= f.window->start && j < f.window->start + f.window->length;
        CHECK(f.segment_labels[j] == (inside ? 1 : 0));
      }
    }
  }
  CHECK(fine_from_json(to_json(fine)) == fine);
}

TEST_CASE("fine labels recover planted windows") {
  SynthConfig sc;
  sc.d = 8;
  sc.seed = 8;
  const auto data = generate(sc);
  std::map<std::string, int> labels;
  for (const auto& [id, t] : data.truth) labels[id] = t.video_label;
  const auto fine = generate_fine_labels(data.bundle, coarse_from(labels), sc.window_fraction);
  std::size_t planted = 0, hit = 0;
  for (const auto& [id, t] : data.truth) {
    const auto& f = fine.videos.at(id).segment_labels;
    for (std::size_t j = 0; j < t.segment_labels.size(); ++j) {
      if (!t.segment_labels[j]) continue;
      ++planted;
      hit += f[j];
    }
  }
  REQUIRE(planted > 0);
  CHECK(static_cast<double>(hit) / static_cast<double>(planted) >= 0.7);
}

TEST_CASE("alpha diagnostic counts low-density segments") {
  FeatureBundle b;
  b.dim = 2;
  b.videos = {video_with_norms("n", {0.0, 0.5, 3.0, 5.0})};
  const auto m = standard_normal_model();
  const auto counts = count_below_alpha(b, m, 0.05);
  CHECK(counts.at("n") == 2);
}

TEST_CASE("density csv") {
  FeatureBundle b;
  b.dim = 2;
  b.videos = {video_with_norms("n", {0.0, 1.0})};
  const auto csv = p_values_csv(b, standard_normal_model());
  CHECK(csv.rfind("video_id,segment_index,z0,p_value\nn,0,0,", 0) == 0);
  CHECK(csv.find("\nn,1,1,0.24197072451914") != std::string::npos);
}
