#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "c2fpl/features.hpp"

namespace c2fpl {

using Point2 = std::array<double, 2>;

// Symmetric 2x2 matrix.
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double det() const { return xx * yy - xy * xy; }
};

struct GmmModel {
  std::array<double, 2> weights{0.5, 0.5};
  std::array<Point2, 2> means{};
  std::array<Cov2, 2> covariances{};
  // Log-likelihood after initialization and after each M-step.
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
};

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;
  double covariance_floor = 1e-6;
};

// EM fit of a two-component full-covariance mixture. Means are seeded
// k-means++ style from the points, covariances start at the data
// covariance, weights at 0.5/0.5.
// Throws insufficient_data for fewer than 2 points, degenerate_split when
// all points coincide.
GmmModel fit_gmm_2(std::span<const Point2> points, std::uint64_t seed,
                   const GmmOptions& options = {});

// log(w_k) + log N(x | mean_k, cov_k) for both components.
std::array<double, 2> log_joint(const GmmModel& model, const Point2& x);
std::array<double, 2> responsibilities(const GmmModel& model, const Point2& x);

// Argmax posterior responsibility per point; ties go to component 0.
std::vector<int> assign_clusters(const GmmModel& model,
                                 std::span<const Point2> points);

enum class CplStop { ratio_exceeded, max_iterations, min_normal_size, degenerate_split };

struct CoarseLabels {
  std::map<std::string, int> labels;
  int iterations_used = 0;
  double final_ratio = 0.0;
  CplStop stop_reason = CplStop::max_iterations;
  // (normal size, anomaly size) before the first split and after each one.
  std::vector<std::pair<std::size_t, std::size_t>> history;

  std::size_t count(int label) const;
};

// Divisive clustering of the video summaries. The normal cluster is split
// repeatedly; the smaller child joins the anomaly cluster while
// |anomaly| / |normal| <= eta. On equal-size splits the child with the
// larger mean of mu is the anomaly side. The loop also stops after
// max_iters splits, when a split would leave fewer than 2 normal videos,
// or when a split is degenerate.
CoarseLabels generate_coarse_labels(std::span<const VideoSummary> summaries,
                                    double eta, std::uint64_t seed,
                                    int max_iters = 50);

std::string_view to_string(CplStop stop);

nlohmann::json to_json(const CoarseLabels& coarse);
CoarseLabels coarse_from_json(const nlohmann::json& j);

}  // namespace c2fpl
