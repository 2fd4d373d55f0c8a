#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "c2fpl/cpl.hpp"
#include "c2fpl/features.hpp"

namespace c2fpl {

// Maps a segment feature to its low-dimensional representation z.
using Representation = std::function<std::vector<double>(std::span<const float>)>;

// Default representation: the 1-vector holding the segment l2 norm.
std::vector<double> segment_representation(std::span<const float> f);

// Gaussian null model N(gamma, sigma) over segment representations.
class NullModel {
 public:
  // Throws invalid_data when sigma is not symmetric positive-definite.
  NullModel(Eigen::VectorXd gamma, Eigen::MatrixXd sigma);

  std::size_t dim() const { return static_cast<std::size_t>(gamma_.size()); }
  const Eigen::VectorXd& gamma() const { return gamma_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  double mahalanobis_sq(std::span<const double> z) const;

 private:
  Eigen::VectorXd gamma_;
  Eigen::MatrixXd sigma_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_norm_ = 0.0;  // log of the density normalizer

  friend double p_value(const NullModel&, std::span<const double>);
};

inline constexpr double kVarianceFloor = 1e-12;

// Mean and sample covariance (M0 - 1 denominator) of z over every segment
// of coarse-label-0 videos, diagonal floored at kVarianceFloor.
// Throws insufficient_data for fewer than 2 such segments.
NullModel fit_null_model(const FeatureBundle& bundle, const CoarseLabels& coarse,
                         const Representation& repr = segment_representation);

// The Gaussian density at z. Called a p-value by the method, but it is a
// likelihood, not a tail probability.
double p_value(const NullModel& model, std::span<const double> z);

std::vector<double> segment_p_values(const NullModel& model, const VideoRecord& video,
                                     const Representation& repr = segment_representation);

struct Window {
  std::size_t start = 0;  // 0-indexed first segment
  std::size_t length = 0;

  friend bool operator==(const Window&, const Window&) = default;
};

// ceil(beta * m) clamped to [1, m].
std::size_t window_length(double beta, std::size_t m);

// Contiguous window of window_length(beta, m) with the lowest mean p-value;
// ties go to the smallest start. Throws invalid_argument on empty input or
// beta outside (0, 1).
Window select_window(std::span<const double> p_values, double beta);

struct VideoFineLabels {
  int video_label = 0;
  std::optional<Window> window;
  std::vector<std::uint8_t> segment_labels;

  friend bool operator==(const VideoFineLabels&, const VideoFineLabels&) = default;
};

struct FineLabels {
  std::map<std::string, VideoFineLabels> videos;

  std::size_t positive_segments() const;
  std::size_t total_segments() const;

  friend bool operator==(const FineLabels&, const FineLabels&) = default;
};

// Segment labels of coarse-normal videos are all 0. In each coarse-anomalous
// video the minimum-mean-p-value window is labeled 1, everything else 0.
FineLabels generate_fine_labels(const FeatureBundle& bundle, const CoarseLabels& coarse,
                                double beta,
                                const Representation& repr = segment_representation);

// Same as above with a null model fitted elsewhere.
FineLabels generate_fine_labels(const FeatureBundle& bundle, const CoarseLabels& coarse,
                                const NullModel& null_model, double beta,
                                const Representation& repr = segment_representation);

// Diagnostic only: number of segments per video whose density falls below
// alpha. Labeling never uses this.
std::map<std::string, std::size_t> count_below_alpha(
    const FeatureBundle& bundle, const NullModel& model, double alpha,
    const Representation& repr = segment_representation);

nlohmann::json to_json(const FineLabels& fine);
FineLabels fine_from_json(const nlohmann::json& j);

// CSV rows: video_id,segment_index,z0[,z1..],p_value
std::string p_values_csv(const FeatureBundle& bundle, const NullModel& model,
                         const Representation& repr = segment_representation);

}  // namespace c2fpl
