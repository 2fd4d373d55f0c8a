#include <doctest.h>

#include "c2fpl/error.hpp"
#include "c2fpl/features.hpp"
#include "c2fpl/fpl.hpp"
#include "c2fpl/synth.hpp"

using namespace c2fpl;

TEST_CASE("defaults produce a valid bundle with consistent truth") {
  SynthConfig sc;
  sc.n_videos = 50;
  const auto data = generate(sc);
  validate_bundle(data.bundle);
  CHECK(data.bundle.videos.size() == 50);
  std::size_t anomalous = 0;
  for (const auto& v : data.bundle.videos) {
    const auto& t = data.truth.at(v.id);
    CHECK(v.num_segments() >= sc.m_min);
    CHECK(v.num_segments() <= sc.m_max);
    REQUIRE(t.segment_labels.size() == v.num_segments());
    REQUIRE(t.frame_labels.size() == v.num_segments() * v.frames_per_segment);
    for (std::size_t f = 0; f < t.frame_labels.size(); ++f) {
      CHECK(t.frame_labels[f] == t.segment_labels[f / v.frames_per_segment]);
    }
    // One contiguous window of the planted length, or none.
    std::size_t ones = 0, runs = 0;
    for (std::size_t j = 0; j < t.segment_labels.size(); ++j) {
      ones += t.segment_labels[j];
      if (t.segment_labels[j] && (j == 0 || !t.segment_labels[j - 1])) ++runs;
    }
    if (t.video_label) {
      ++anomalous;
      CHECK(runs == 1);
      CHECK(ones == window_length(sc.window_fraction, v.num_segments()));
    } else {
      CHECK(ones == 0);
    }
  }
  CHECK(anomalous == 25);
}

TEST_CASE("no anomalous videos when the fraction is zero") {
  SynthConfig sc;
  sc.n_videos = 20;
  sc.anomaly_video_fraction = 0.0;
  const auto data = generate(sc);
  for (const auto& [id, t] : data.truth) {
    CHECK(t.video_label == 0);
    for (auto x : t.segment_labels) CHECK(x == 0);
  }
}

TEST_CASE("same seed gives the same data") {
  SynthConfig sc;
  sc.n_videos = 20;
  sc.seed = 31;
  const auto a = generate(sc);
  const auto b = generate(sc);
  CHECK(a.bundle == b.bundle);
  CHECK(a.truth == b.truth);
  sc.seed = 32;
  CHECK_FALSE(generate(sc).bundle == a.bundle);
}

TEST_CASE("planted segments carry the magnitude shift") {
  SynthConfig sc;
  sc.seed = 6;
  const auto data = generate(sc);
  double sum_a = 0.0, sum_n = 0.0;
  std::size_t n_a = 0, n_n = 0;
  for (const auto& v : data.bundle.videos) {
    const auto& t = data.truth.at(v.id);
    for (std::size_t j = 0; j < v.num_segments(); ++j) {
      const double z = segment_norm(v.segment(j));
      if (t.segment_labels[j]) {
        sum_a += z;
        ++n_a;
      } else {
        sum_n += z;
        ++n_n;
      }
    }
  }
  const double gap = sum_a / static_cast<double>(n_a) - sum_n / static_cast<double>(n_n);
  CHECK(gap >= 4.0 * sc.normal_std);
  CHECK(sum_n / static_cast<double>(n_n) == doctest::Approx(sc.normal_mean).epsilon(0.02));
}

TEST_CASE("explicit segment counts") {
  SynthConfig sc;
  sc.segment_counts = {4, 7, 2};
  sc.d = 8;
  const auto data = generate(sc);
  REQUIRE(data.bundle.videos.size() == 3);
  CHECK(data.bundle.videos[1].num_segments() == 7);
  sc.segment_counts = {4, 1};
  CHECK_THROWS_AS(generate(sc), Error);
}

TEST_CASE("config validation and json") {
  SynthConfig sc;
  sc.anomaly_video_fraction = 1.0;
  CHECK_THROWS_AS(validate(sc), Error);
  sc = {};
  sc.m_min = 1;
  CHECK_THROWS_AS(validate(sc), Error);
  sc = {};
  sc.anomaly_shift = 0.0;
  CHECK_THROWS_AS(validate(sc), Error);
  sc = {};
  sc.window_fraction = 0.0;
  CHECK_THROWS_AS(validate(sc), Error);

  sc = {};
  sc.d = 12;
  sc.seed = 8;
  sc.normal_mean = 3.5;
  const auto back = synth_config_from_json(to_json(sc));
  CHECK(back.d == 12);
  CHECK(back.seed == 8);
  CHECK(back.normal_mean == 3.5);
  CHECK(synth_config_from_json(nlohmann::json::object()).n_videos == SynthConfig{}.n_videos);
  CHECK_THROWS_AS(synth_config_from_json({{"d", "wide"}}), Error);
}
