#include "c2fpl/fpl.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"
#include "c2fpl/parallel.hpp"

namespace c2fpl {

std::vector<double> segment_representation(std::span<const float> f) {
  return {segment_norm(f)};
}

NullModel::NullModel(Eigen::VectorXd gamma, Eigen::MatrixXd sigma)
    : gamma_(std::move(gamma)), sigma_(std::move(sigma)) {
  const auto d = gamma_.size();
  if (d == 0 || sigma_.rows() != d || sigma_.cols() != d) {
    throw Error(ErrorCode::dimension_mismatch, "null model shape mismatch");
  }
  if (!sigma_.isApprox(sigma_.transpose())) {
    throw Error(ErrorCode::invalid_data, "null model covariance is not symmetric");
  }
  llt_.compute(sigma_);
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::invalid_data,
                "null model covariance is not positive-definite");
  }
  double log_det = 0.0;
  const Eigen::MatrixXd& l = llt_.matrixLLT();
  for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
  log_norm_ = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
              0.5 * log_det;
}

double NullModel::mahalanobis_sq(std::span<const double> z) const {
  if (static_cast<Eigen::Index>(z.size()) != gamma_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "representation dimension mismatch");
  }
  Eigen::VectorXd diff(gamma_.size());
  for (Eigen::Index i = 0; i < gamma_.size(); ++i) diff(i) = z[i] - gamma_(i);
  const Eigen::VectorXd half = llt_.matrixL().solve(diff);
  return half.squaredNorm();
}

double p_value(const NullModel& model, std::span<const double> z) {
  return std::exp(model.log_norm_ - 0.5 * model.mahalanobis_sq(z));
}

NullModel fit_null_model(const FeatureBundle& bundle, const CoarseLabels& coarse,
                         const Representation& repr) {
  std::vector<std::vector<double>> zs;
  for (const auto& v : bundle.videos) {
    const auto it = coarse.labels.find(v.id);
    if (it == coarse.labels.end()) {
      throw Error(ErrorCode::invalid_data, "no coarse label for video '" + v.id + "'");
    }
    if (it->second != 0) continue;
    for (std::size_t j = 0; j < v.num_segments(); ++j) zs.push_back(repr(v.segment(j)));
  }
  if (zs.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "null model needs at least 2 segments from normal videos, got " +
                    std::to_string(zs.size()));
  }
  const auto d = static_cast<Eigen::Index>(zs.front().size());
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
  for (const auto& z : zs) {
    if (static_cast<Eigen::Index>(z.size()) != d) {
      throw Error(ErrorCode::dimension_mismatch, "representation size varies");
    }
    for (Eigen::Index i = 0; i < d; ++i) gamma(i) += z[i];
  }
  const double m0 = static_cast<double>(zs.size());
  gamma /= m0;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd diff(d);
  for (const auto& z : zs) {
    for (Eigen::Index i = 0; i < d; ++i) diff(i) = z[i] - gamma(i);
    sigma.noalias() += diff * diff.transpose();
  }
  sigma /= (m0 - 1.0);
  for (Eigen::Index i = 0; i < d; ++i) sigma(i, i) = std::max(sigma(i, i), kVarianceFloor);
  // Rank-deficient representations (d > 1) get a growing ridge until
  // the factorization succeeds.
  for (double ridge = kVarianceFloor; sigma.llt().info() != Eigen::Success; ridge *= 10.0) {
    sigma.diagonal().array() += ridge;
  }
  return NullModel(std::move(gamma), std::move(sigma));
}

std::vector<double> segment_p_values(const NullModel& model, const VideoRecord& video,
                                     const Representation& repr) {
  std::vector<double> p(video.num_segments());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = p_value(model, repr(video.segment(j)));
  return p;
}

std::size_t window_length(double beta, std::size_t m) {
  // The small slack keeps products such as 0.1 * 30 from ceiling to 4.
  const double raw = std::ceil(beta * static_cast<double>(m) - 1e-9);
  const auto w = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(w, m);
}

Window select_window(std::span<const double> p, double beta) {
  if (p.empty()) throw Error(ErrorCode::invalid_argument, "empty p-value sequence");
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1)");
  }
  const std::size_t m = p.size();
  const std::size_t w = window_length(beta, m);
  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) prefix[j + 1] = prefix[j] + p[j];

  double best = prefix[w] - prefix[0];
  for (std::size_t l = 1; l + w <= m; ++l) best = std::min(best, prefix[l + w] - prefix[l]);

  // Prefix differences carry rounding error, so every start within a few
  // ulps of the minimum is re-summed directly to settle near-ties.
  const double slack = static_cast<double>(m + 2) * std::numeric_limits<double>::epsilon() *
                         std::abs(prefix[m]) + 1e-300;
  Window out{0, w};
  double best_direct = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + w <= m; ++l) {
    if (prefix[l + w] - prefix[l] > best + slack) continue;
    double s = 0.0;
    for (std::size_t j = l; j < l + w; ++j) s += p[j];
    if (s < best_direct) {
      best_direct = s;
      out.start = l;
    }
  }
  return out;
}

std::size_t FineLabels::positive_segments() const {
  std::size_t n = 0;
  for (const auto& [id, v] : videos) {
    for (auto x : v.segment_labels) n += x;
  }
  return n;
}

std::size_t FineLabels::total_segments() const {
  std::size_t n = 0;
  for (const auto& [id, v] : videos) n += v.segment_labels.size();
  return n;
}

FineLabels generate_fine_labels(const FeatureBundle& bundle, const CoarseLabels& coarse,
                                const NullModel& null_model, double beta,
                                const Representation& repr) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "beta must lie in (0, 1)");
  }
  std::vector<VideoFineLabels> per_video(bundle.videos.size());
  parallel_for(per_video.size(), [&](std::size_t i) {
    const auto& v = bundle.videos[i];
    const auto it = coarse.labels.find(v.id);
    if (it == coarse.labels.end()) {
      throw Error(ErrorCode::invalid_data, "no coarse label for video '" + v.id + "'");
    }
    VideoFineLabels out;
    out.video_label = it->second;
    out.segment_labels.assign(v.num_segments(), 0);
    if (out.video_label == 1) {
      const auto p = segment_p_values(null_model, v, repr);
      const Window win = select_window(p, beta);
      for (std::size_t j = win.start; j < win.start + win.length; ++j) {
        out.segment_labels[j] = 1;
      }
      out.window = win;
    }
    per_video[i] = std::move(out);
  });
  FineLabels fine;
  for (std::size_t i = 0; i < per_video.size(); ++i) {
    fine.videos.emplace(bundle.videos[i].id, std::move(per_video[i]));
  }
  return fine;
}

FineLabels generate_fine_labels(const FeatureBundle& bundle, const CoarseLabels& coarse,
                                double beta, const Representation& repr) {
  if (coarse.count(1) == 0) {
    // Nothing to refine; the null model is not needed.
    FineLabels fine;
    for (const auto& v : bundle.videos) {
      if (!coarse.labels.contains(v.id)) {
        throw Error(ErrorCode::invalid_data, "no coarse label for video '" + v.id + "'");
      }
      fine.videos[v.id] = {0, std::nullopt, std::vector<std::uint8_t>(v.num_segments(), 0)};
    }
    return fine;
  }
  const NullModel model = fit_null_model(bundle, coarse, repr);
  return generate_fine_labels(bundle, coarse, model, beta, repr);
}

std::map<std::string, std::size_t> count_below_alpha(const FeatureBundle& bundle,
                                                     const NullModel& model, double alpha,
                                                     const Representation& repr) {
  std::map<std::string, std::size_t> out;
  for (const auto& v : bundle.videos) {
    std::size_t n = 0;
    for (double p : segment_p_values(model, v, repr)) n += p < alpha ? 1 : 0;
    out[v.id] = n;
  }
  return out;
}

nlohmann::json to_json(const FineLabels& fine) {
  nlohmann::json videos = nlohmann::json::object();
  for (const auto& [id, v] : fine.videos) {
    nlohmann::json entry = {{"label", v.video_label},
                            {"window_start", nullptr},
                            {"window_length", nullptr},
                            {"segment_labels", v.segment_labels}};
    if (v.window) {
      entry["window_start"] = v.window->start;
      entry["window_length"] = v.window->length;
    }
    videos[id] = std::move(entry);
  }
  return {{"videos", videos}};
}

FineLabels fine_from_json(const nlohmann::json& j) {
  FineLabels fine;
  try {
    for (const auto& [id, v] : j.at("videos").items()) {
      VideoFineLabels f;
      f.video_label = v.at("label").get<int>();
      if (v.contains("window_start") && !v["window_start"].is_null()) {
        f.window = Window{v["window_start"].get<std::size_t>(),
                          v.at("window_length").get<std::size_t>()};
      }
      for (const auto& x : v.at("segment_labels")) {
        const int label = x.get<int>();
        if (label != 0 && label != 1) {
          throw Error(ErrorCode::invalid_data, "segment label of '" + id + "' is not 0/1");
        }
        f.segment_labels.push_back(static_cast<std::uint8_t>(label));
      }
      fine.videos.emplace(id, std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_data, std::string("bad fine labels: ") + e.what());
  }
  return fine;
}

std::string p_values_csv(const FeatureBundle& bundle, const NullModel& model,
                         const Representation& repr) {
  std::ostringstream out;
  out << "video_id,segment_index";
  for (std::size_t k = 0; k < model.dim(); ++k) out << ",z" << k;
  out << ",p_value\n";
  for (const auto& v : bundle.videos) {
    for (std::size_t j = 0; j < v.num_segments(); ++j) {
      const auto z = repr(v.segment(j));
      out << v.id << ',' << j;
      for (double x : z) out << ',' << format_double(x);
      out << ',' << format_double(p_value(model, z)) << '\n';
    }
  }
  return out.str();
}

}  // namespace c2fpl
