#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "c2fpl/features.hpp"
#include "c2fpl/fpl.hpp"

namespace c2fpl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// How each hidden layer combines its backbone activation F with the
// attention map A: residual is F * A + F, multiplicative is F * A.
// fd normalizes A across the features of each row, bd across the rows
// (the batch) of each feature column.
enum class AttentionMode { residual_fd, multiplicative_fd, residual_bd, multiplicative_bd };

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view name);

struct DetectorArch {
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 32;
  double dropout_rate = 0.6;
  AttentionMode attention = AttentionMode::residual_fd;

  friend bool operator==(const DetectorArch&, const DetectorArch&) = default;
};

// Weights are (fan_in x fan_out), biases (1 x fan_out).
struct DetectorParams {
  Matrix w1, b1, wa1, ba1;  // input -> hidden1, backbone and attention
  Matrix w2, b2, wa2, ba2;  // hidden1 -> hidden2
  Matrix w3, b3;            // hidden2 -> 1

  static constexpr std::size_t kTensorCount = 10;
  static constexpr std::array<std::string_view, kTensorCount> kNames = {
      "w1", "b1", "wa1", "ba1", "w2", "b2", "wa2", "ba2", "w3", "b3"};
  // Weights carry the l2 penalty, biases do not.
  static constexpr std::array<bool, kTensorCount> kIsWeight = {
      true, false, true, false, true, false, true, false, true, false};

  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;
  std::size_t parameter_count() const;

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

struct DetectorModel {
  DetectorArch arch;
  DetectorParams params;

  std::size_t input_dim() const { return static_cast<std::size_t>(params.w1.rows()); }

  // Glorot-uniform weights from the seed, zero biases.
  static DetectorModel initialize(std::size_t input_dim, const DetectorArch& arch,
                                  std::uint64_t seed);
  // Every parameter zero.
  static DetectorModel zeros(std::size_t input_dim, const DetectorArch& arch);

  friend bool operator==(const DetectorModel&, const DetectorModel&) = default;
};

// Intermediate activations of one forward pass, kept for backprop.
struct ForwardCache {
  Matrix z1, f1, u1, a1, mask1, d1;
  Matrix z2, f2, u2, a2, mask2, d2;
  Vector logits, scores;
};

// Anomaly scores in (0, 1) for a B x d batch. Dropout (inverted scaling)
// is active only when training, with masks drawn from the seed.
Vector forward(const DetectorModel& model, const Matrix& batch, bool training = false,
               std::uint64_t seed = 0);
ForwardCache forward_cached(const DetectorModel& model, const Matrix& batch, bool training,
                            std::uint64_t seed);

inline constexpr double kScoreClamp = 1e-7;

// Mean binary cross-entropy (scores clamped to [1e-7, 1 - 1e-7]) plus
// l2_lambda times the squared norm of every weight matrix.
double loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
            const DetectorModel& model, double l2_lambda);
double l2_penalty(const DetectorModel& model);

struct LossAndGradient {
  double loss = 0.0;
  DetectorParams gradient;
};

// Handwritten backprop of loss() through forward().
LossAndGradient compute_gradients(const DetectorModel& model, const Matrix& batch,
                                  std::span<const std::uint8_t> labels, double l2_lambda,
                                  bool training = false, std::uint64_t seed = 0);

using GradientFn = std::function<LossAndGradient(
    const DetectorModel&, const Matrix&, std::span<const std::uint8_t>, double)>;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  // Parameters whose +-epsilon probes changed a ReLU or clamp state.
  std::size_t skipped_at_kinks = 0;
  std::string worst_tensor;
};

// Compares analytic gradients (dropout off) against central differences on
// a seeded sample of parameters drawn from every tensor. Relative error is
// |a - n| / max(|a|, |n|, 1e-6). A parameter whose two probes land on
// different sides of a ReLU or clamp kink is skipped and replaced by the
// next one. The analytic route can be swapped to test the checker itself.
GradientCheckResult gradient_check(const DetectorModel& model, const Matrix& batch,
                                   std::span<const std::uint8_t> labels, double epsilon,
                                   double l2_lambda = 0.0, std::uint64_t seed = 0,
                                   std::size_t min_parameters = 200,
                                   const GradientFn& analytic = {});

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double l2_lambda = 1e-3;
  std::uint64_t seed = 0;
  DetectorArch arch;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& config);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;
  DetectorModel model;
  std::vector<std::string> warnings;
};

// Row-major copy of a video's features as a double matrix.
Matrix video_matrix(const VideoRecord& video);

// Plain minibatch SGD over every (segment, fine label) pair in the bundle.
// Each epoch reshuffles with an epoch-derived seed; the last short batch is
// kept.
TrainReport train(const FeatureBundle& bundle, const FineLabels& fine,
                  const TrainConfig& config);

}  // namespace c2fpl
