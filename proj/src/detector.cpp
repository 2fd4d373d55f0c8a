#include "c2fpl/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "c2fpl/error.hpp"
#include "c2fpl/rng.hpp"

namespace c2fpl {
namespace {

bool is_residual(AttentionMode m) {
  return m == AttentionMode::residual_fd || m == AttentionMode::residual_bd;
}

bool is_feature_dim(AttentionMode m) {
  return m == AttentionMode::residual_fd || m == AttentionMode::multiplicative_fd;
}

void softmax_rows(Matrix& u) {
  const Vector row_max = u.rowwise().maxCoeff();
  u.colwise() -= row_max;
  u = u.array().exp().matrix();
  const Vector row_sum = u.rowwise().sum();
  u.array().colwise() /= row_sum.array();
}

void softmax_cols(Matrix& u) {
  const Eigen::RowVectorXd col_max = u.colwise().maxCoeff();
  u.rowwise() -= col_max;
  u = u.array().exp().matrix();
  const Eigen::RowVectorXd col_sum = u.colwise().sum();
  u.array().rowwise() /= col_sum.array();
}

// Gradient of the loss w.r.t. the softmax input, given dL/dA.
Matrix softmax_backward(const Matrix& a, const Matrix& da, bool feature_dim) {
  const Matrix prod = (a.array() * da.array()).matrix();
  if (feature_dim) {
    const Vector row_sum = prod.rowwise().sum();
    return (a.array() * (da.colwise() - row_sum).array()).matrix();
  }
  const Eigen::RowVectorXd col_sum = prod.colwise().sum();
  return (a.array() * (da.rowwise() - col_sum).array()).matrix();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      mask(i, j) = uniform01(rng) < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

struct LayerOut {
  Matrix z, f, u, a, mask, d;
};

LayerOut layer_forward(const Matrix& input, const Matrix& w, const Matrix& b,
                       const Matrix& wa, const Matrix& ba, AttentionMode mode,
                       bool training, double rate, Rng& rng) {
  LayerOut o;
  o.z.noalias() = input * w;
  o.z.rowwise() += b.row(0);
  o.f = o.z.cwiseMax(0.0);
  o.u.noalias() = input * wa;
  o.u.rowwise() += ba.row(0);
  o.a = o.u;
  if (is_feature_dim(mode)) {
    softmax_rows(o.a);
  } else {
    softmax_cols(o.a);
  }
  const double residual = is_residual(mode) ? 1.0 : 0.0;
  Matrix h = (o.f.array() * (o.a.array() + residual)).matrix();
  if (training && rate > 0.0) {
    o.mask = dropout_mask(h.rows(), h.cols(), rate, rng);
    o.d = (h.array() * o.mask.array()).matrix();
  } else {
    o.mask = Matrix::Ones(h.rows(), h.cols());
    o.d = std::move(h);
  }
  return o;
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
  }
  return w;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::string_view to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::residual_fd: return "residual_fd";
    case AttentionMode::multiplicative_fd: return "multiplicative_fd";
    case AttentionMode::residual_bd: return "residual_bd";
    case AttentionMode::multiplicative_bd: return "multiplicative_bd";
  }
  return "unknown";
}

AttentionMode parse_attention_mode(std::string_view name) {
  for (auto m : {AttentionMode::residual_fd, AttentionMode::multiplicative_fd,
                 AttentionMode::residual_bd, AttentionMode::multiplicative_bd}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::invalid_argument, "unknown attention mode '" + std::string(name) + "'");
}

std::array<Matrix*, DetectorParams::kTensorCount> DetectorParams::tensors() {
  return {&w1, &b1, &wa1, &ba1, &w2, &b2, &wa2, &ba2, &w3, &b3};
}

std::array<const Matrix*, DetectorParams::kTensorCount> DetectorParams::tensors() const {
  return {&w1, &b1, &wa1, &ba1, &w2, &b2, &wa2, &ba2, &w3, &b3};
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* t : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

DetectorModel DetectorModel::zeros(std::size_t input_dim, const DetectorArch& arch) {
  const auto d = static_cast<Eigen::Index>(input_dim);
  const auto h1 = static_cast<Eigen::Index>(arch.hidden1);
  const auto h2 = static_cast<Eigen::Index>(arch.hidden2);
  DetectorModel m;
  m.arch = arch;
  m.params.w1 = Matrix::Zero(d, h1);
  m.params.b1 = Matrix::Zero(1, h1);
  m.params.wa1 = Matrix::Zero(d, h1);
  m.params.ba1 = Matrix::Zero(1, h1);
  m.params.w2 = Matrix::Zero(h1, h2);
  m.params.b2 = Matrix::Zero(1, h2);
  m.params.wa2 = Matrix::Zero(h1, h2);
  m.params.ba2 = Matrix::Zero(1, h2);
  m.params.w3 = Matrix::Zero(h2, 1);
  m.params.b3 = Matrix::Zero(1, 1);
  return m;
}

DetectorModel DetectorModel::initialize(std::size_t input_dim, const DetectorArch& arch,
                                        std::uint64_t seed) {
  if (input_dim == 0 || arch.hidden1 == 0 || arch.hidden2 == 0) {
    throw Error(ErrorCode::invalid_argument, "detector layer sizes must be positive");
  }
  DetectorModel m = zeros(input_dim, arch);
  Rng rng(seed);
  m.params.w1 = glorot(input_dim, arch.hidden1, rng);
  m.params.wa1 = glorot(input_dim, arch.hidden1, rng);
  m.params.w2 = glorot(arch.hidden1, arch.hidden2, rng);
  m.params.wa2 = glorot(arch.hidden1, arch.hidden2, rng);
  m.params.w3 = glorot(arch.hidden2, 1, rng);
  return m;
}

ForwardCache forward_cached(const DetectorModel& model, const Matrix& batch, bool training,
                            std::uint64_t seed) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "batch width " + std::to_string(batch.cols()) + " does not match model d " +
                    std::to_string(model.input_dim()));
  }
  const auto& p = model.params;
  const auto mode = model.arch.attention;
  const double rate = model.arch.dropout_rate;
  Rng rng(seed);
  LayerOut l1 = layer_forward(batch, p.w1, p.b1, p.wa1, p.ba1, mode, training, rate, rng);
  LayerOut l2 = layer_forward(l1.d, p.w2, p.b2, p.wa2, p.ba2, mode, training, rate, rng);
  ForwardCache c;
  c.logits = l2.d * p.w3.col(0);
  c.logits.array() += p.b3(0, 0);
  c.scores = c.logits.unaryExpr([](double x) { return sigmoid(x); });
  c.z1 = std::move(l1.z);
  c.f1 = std::move(l1.f);
  c.u1 = std::move(l1.u);
  c.a1 = std::move(l1.a);
  c.mask1 = std::move(l1.mask);
  c.d1 = std::move(l1.d);
  c.z2 = std::move(l2.z);
  c.f2 = std::move(l2.f);
  c.u2 = std::move(l2.u);
  c.a2 = std::move(l2.a);
  c.mask2 = std::move(l2.mask);
  c.d2 = std::move(l2.d);
  return c;
}

Vector forward(const DetectorModel& model, const Matrix& batch, bool training,
               std::uint64_t seed) {
  return forward_cached(model, batch, training, seed).scores;
}

double l2_penalty(const DetectorModel& model) {
  double s = 0.0;
  const auto ts = model.params.tensors();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (DetectorParams::kIsWeight[k]) s += ts[k]->squaredNorm();
  }
  return s;
}

double loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
            const DetectorModel& model, double l2_lambda) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "scores and labels differ in length");
  }
  double bce = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], kScoreClamp, 1.0 - kScoreClamp);
    bce -= labels[i] ? std::log(s) : std::log(1.0 - s);
  }
  bce /= static_cast<double>(scores.size());
  return bce + (l2_lambda != 0.0 ? l2_lambda * l2_penalty(model) : 0.0);
}

LossAndGradient compute_gradients(const DetectorModel& model, const Matrix& batch,
                                  std::span<const std::uint8_t> labels, double l2_lambda,
                                  bool training, std::uint64_t seed) {
  if (labels.size() != static_cast<std::size_t>(batch.rows())) {
    throw Error(ErrorCode::dimension_mismatch, "label count does not match batch rows");
  }
  const ForwardCache c = forward_cached(model, batch, training, seed);
  const auto& p = model.params;
  const bool fd = is_feature_dim(model.arch.attention);
  const double residual = is_residual(model.arch.attention) ? 1.0 : 0.0;
  const auto rows = batch.rows();
  const double inv_b = 1.0 / static_cast<double>(rows);

  LossAndGradient out;
  out.loss = loss(std::span(c.scores.data(), static_cast<std::size_t>(rows)), labels, model,
                  l2_lambda);
  DetectorParams& g = out.gradient;

  // dL/dlogit; zero where the BCE clamp is active.
  Vector d_logit(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double s = c.scores(i);
    const bool clamped = s < kScoreClamp || s > 1.0 - kScoreClamp;
    d_logit(i) = clamped ? 0.0 : (s - static_cast<double>(labels[i])) * inv_b;
  }

  g.w3.noalias() = c.d2.transpose() * d_logit;
  g.b3 = Matrix::Constant(1, 1, d_logit.sum());

  // Layer 2.
  Matrix dh2 = (d_logit * p.w3.transpose()).cwiseProduct(c.mask2);
  Matrix dz2 = (dh2.array() * (c.a2.array() + residual) * (c.z2.array() > 0.0).cast<double>())
                   .matrix();
  Matrix du2 = softmax_backward(c.a2, dh2.cwiseProduct(c.f2), fd);
  g.w2.noalias() = c.d1.transpose() * dz2;
  g.b2 = dz2.colwise().sum();
  g.wa2.noalias() = c.d1.transpose() * du2;
  g.ba2 = du2.colwise().sum();

  // Layer 1.
  Matrix dd1;
  dd1.noalias() = dz2 * p.w2.transpose();
  dd1.noalias() += du2 * p.wa2.transpose();
  Matrix dh1 = dd1.cwiseProduct(c.mask1);
  Matrix dz1 = (dh1.array() * (c.a1.array() + residual) * (c.z1.array() > 0.0).cast<double>())
                   .matrix();
  Matrix du1 = softmax_backward(c.a1, dh1.cwiseProduct(c.f1), fd);
  g.w1.noalias() = batch.transpose() * dz1;
  g.b1 = dz1.colwise().sum();
  g.wa1.noalias() = batch.transpose() * du1;
  g.ba1 = du1.colwise().sum();

  if (l2_lambda != 0.0) {
    auto gt = g.tensors();
    const auto pt = p.tensors();
    for (std::size_t k = 0; k < gt.size(); ++k) {
      if (DetectorParams::kIsWeight[k]) *gt[k] += 2.0 * l2_lambda * *pt[k];
    }
  }
  return out;
}

GradientCheckResult gradient_check(const DetectorModel& model, const Matrix& batch,
                                   std::span<const std::uint8_t> labels, double epsilon,
                                   double l2_lambda, std::uint64_t seed,
                                   std::size_t min_parameters, const GradientFn& analytic) {
  if (!(epsilon > 1e-7 && epsilon < 1e-3)) {
    throw Error(ErrorCode::invalid_argument, "epsilon must lie in (1e-7, 1e-3)");
  }
  const LossAndGradient lg =
      analytic ? analytic(model, batch, labels, l2_lambda)
               : compute_gradients(model, batch, labels, l2_lambda, false, 0);

  struct Probe {
    double loss;
    std::vector<bool> pattern;  // ReLU and clamp activity
  };
  auto probe_loss = [&](const DetectorModel& m) {
    const ForwardCache c = forward_cached(m, batch, false, 0);
    Probe out;
    out.loss = loss(std::span(c.scores.data(), static_cast<std::size_t>(c.scores.size())),
                    labels, m, l2_lambda);
    out.pattern.reserve(static_cast<std::size_t>(c.z1.size() + c.z2.size() + c.scores.size()));
    for (Eigen::Index i = 0; i < c.z1.size(); ++i) out.pattern.push_back(c.z1.data()[i] > 0.0);
    for (Eigen::Index i = 0; i < c.z2.size(); ++i) out.pattern.push_back(c.z2.data()[i] > 0.0);
    for (Eigen::Index i = 0; i < c.scores.size(); ++i) {
      const double v = c.scores(i);
      out.pattern.push_back(v < kScoreClamp || v > 1.0 - kScoreClamp);
    }
    return out;
  };

  // Spread the sample over every tensor so no layer goes unchecked.
  const std::size_t total = model.params.parameter_count();
  const std::size_t target = std::min(total, min_parameters);
  const auto sizes = [&] {
    std::array<std::size_t, DetectorParams::kTensorCount> s{};
    const auto ts = model.params.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k) s[k] = static_cast<std::size_t>(ts[k]->size());
    return s;
  }();
  std::array<std::size_t, DetectorParams::kTensorCount> quota{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::size_t share = (target + sizes.size() - 1) / sizes.size();
    quota[k] = std::min(sizes[k], share);
    assigned += quota[k];
  }
  for (std::size_t k = 0; assigned < target && k < sizes.size(); ++k) {
    const std::size_t extra = std::min(sizes[k] - quota[k], target - assigned);
    quota[k] += extra;
    assigned += extra;
  }

  Rng rng(seed);
  DetectorModel probe = model;
  GradientCheckResult result;
  const auto grads = lg.gradient.tensors();
  std::array<std::vector<std::size_t>, DetectorParams::kTensorCount> order;
  std::array<std::size_t, DetectorParams::kTensorCount> next{};
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    order[k].resize(sizes[k]);
    std::iota(order[k].begin(), order[k].end(), 0);
    std::shuffle(order[k].begin(), order[k].end(), rng);
  }
  // Checks up to `want` more parameters of tensor k; returns how many.
  auto check_tensor = [&](std::size_t k, std::size_t want) {
    Matrix& t = *probe.params.tensors()[k];
    std::size_t checked = 0;
    for (; next[k] < order[k].size() && checked < want; ++next[k]) {
      const std::size_t i = order[k][next[k]];
      double& w = t.data()[i];
      const double orig = w;
      w = orig + epsilon;
      const Probe up = probe_loss(probe);
      w = orig - epsilon;
      const Probe down = probe_loss(probe);
      w = orig;
      // A central difference across a ReLU or clamp kink does not
      // estimate the derivative; such parameters are replaced.
      if (up.pattern != down.pattern) {
        ++result.skipped_at_kinks;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * epsilon);
      const double a = grads[k]->data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = DetectorParams::kNames[k];
      }
      ++result.parameters_checked;
      ++checked;
    }
    return checked;
  };
  for (std::size_t k = 0; k < sizes.size(); ++k) check_tensor(k, quota[k]);
  // Tensors that ran out of kink-free parameters leave a shortfall for
  // the others to cover.
  for (std::size_t k = 0; result.parameters_checked < target && k < sizes.size(); ++k) {
    check_tensor(k, target - result.parameters_checked);
  }
  return result;
}

void validate(const TrainConfig& config) {
  if (config.batch_size == 0) throw Error(ErrorCode::invalid_argument, "batch_size must be positive");
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "learning_rate must be positive");
  }
  if (!(config.l2_lambda >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "l2_lambda must be non-negative");
  }
  if (!(config.arch.dropout_rate >= 0.0 && config.arch.dropout_rate < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "dropout_rate must lie in [0, 1)");
  }
  if (config.arch.hidden1 == 0 || config.arch.hidden2 == 0) {
    throw Error(ErrorCode::invalid_argument, "hidden layer sizes must be positive");
  }
}

Matrix video_matrix(const VideoRecord& video) {
  const auto m = static_cast<Eigen::Index>(video.num_segments());
  const auto d = static_cast<Eigen::Index>(video.dim);
  Matrix x(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = video.features[i * d + j];
  }
  return x;
}

TrainReport train(const FeatureBundle& bundle, const FineLabels& fine,
                  const TrainConfig& config) {
  validate(config);
  const auto d = static_cast<Eigen::Index>(bundle.dim);
  const std::size_t total = bundle.total_segments();

  Matrix x_all(static_cast<Eigen::Index>(total), d);
  std::vector<std::uint8_t> y_all;
  y_all.reserve(total);
  Eigen::Index row = 0;
  for (const auto& v : bundle.videos) {
    const auto it = fine.videos.find(v.id);
    if (it == fine.videos.end() || it->second.segment_labels.size() != v.num_segments()) {
      throw Error(ErrorCode::invalid_data, "missing or mis-sized fine labels for video '" +
                                               v.id + "'");
    }
    for (std::size_t j = 0; j < v.num_segments(); ++j, ++row) {
      const auto seg = v.segment(j);
      for (Eigen::Index k = 0; k < d; ++k) x_all(row, k) = seg[k];
      y_all.push_back(it->second.segment_labels[j]);
    }
  }
  if (total == 0) throw Error(ErrorCode::insufficient_data, "no labeled segments to train on");

  TrainReport report;
  const std::size_t positives = static_cast<std::size_t>(std::ranges::count(y_all, 1));
  if (positives == 0 || positives == total) {
    report.warnings.push_back("all training labels belong to one class");
  }
  report.model = DetectorModel::initialize(bundle.dim, config.arch,
                                           derive_seed(config.seed, "train.init"));

  std::vector<std::size_t> order(total);
  Matrix xb;
  std::vector<std::uint8_t> yb;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, "train.shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double weighted_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < total; begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(total, begin + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      xb.resize(b, d);
      yb.resize(static_cast<std::size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        xb.row(i) = x_all.row(static_cast<Eigen::Index>(order[begin + i]));
        yb[i] = y_all[order[begin + i]];
      }
      const std::uint64_t dropout_seed =
          derive_seed(config.seed, "train.dropout", epoch * 1000003ULL + batch_index);
      LossAndGradient lg =
          compute_gradients(report.model, xb, yb, config.l2_lambda, true, dropout_seed);
      weighted_loss += lg.loss * static_cast<double>(b);
      auto pt = report.model.params.tensors();
      const auto gt = lg.gradient.tensors();
      for (std::size_t k = 0; k < pt.size(); ++k) *pt[k] -= config.learning_rate * *gt[k];
    }
    report.epoch_loss.push_back(weighted_loss / static_cast<double>(total));
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  for (const Matrix* t : report.model.params.tensors()) {
    if (!t->allFinite()) {
      throw Error(ErrorCode::numeric_failure, "training diverged to non-finite weights");
    }
  }
  return report;
}

}  // namespace c2fpl
