#include "c2fpl/cpl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "c2fpl/error.hpp"
#include "c2fpl/rng.hpp"

namespace c2fpl {
namespace {

double log_gauss2(const Point2& x, const Point2& mean, const Cov2& cov) {
  const double det = cov.det();
  const double dx = x[0] - mean[0];
  const double dy = x[1] - mean[1];
  const double maha = (dx * dx * cov.yy - 2.0 * dx * dy * cov.xy + dy * dy * cov.xx) / det;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * maha;
}

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

}  // namespace

std::array<double, 2> log_joint(const GmmModel& model, const Point2& x) {
  std::array<double, 2> out{};
  for (int k = 0; k < 2; ++k) {
    out[k] = std::log(model.weights[k]) +
             log_gauss2(x, model.means[k], model.covariances[k]);
  }
  return out;
}

std::array<double, 2> responsibilities(const GmmModel& model, const Point2& x) {
  const auto lj = log_joint(model, x);
  const double norm = log_sum_exp(lj[0], lj[1]);
  return {std::exp(lj[0] - norm), std::exp(lj[1] - norm)};
}

GmmModel fit_gmm_2(std::span<const Point2> points, std::uint64_t seed,
                   const GmmOptions& options) {
  const std::size_t n = points.size();
  if (n < 2) {
    throw Error(ErrorCode::insufficient_data, "GMM fit needs at least 2 points");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      throw Error(ErrorCode::non_finite, "GMM input contains a non-finite point");
    }
  }
  if (std::ranges::all_of(points, [&](const Point2& p) { return p == points[0]; })) {
    throw Error(ErrorCode::degenerate_split, "all points are identical");
  }

  const double nd = static_cast<double>(n);
  const double eps = options.covariance_floor;

  Point2 centre{0.0, 0.0};
  for (const auto& p : points) {
    centre[0] += p[0];
    centre[1] += p[1];
  }
  centre[0] /= nd;
  centre[1] /= nd;
  Cov2 data_cov{0.0, 0.0, 0.0};
  for (const auto& p : points) {
    const double dx = p[0] - centre[0];
    const double dy = p[1] - centre[1];
    data_cov.xx += dx * dx;
    data_cov.xy += dx * dy;
    data_cov.yy += dy * dy;
  }
  data_cov.xx = data_cov.xx / nd + eps;
  data_cov.xy = data_cov.xy / nd;
  data_cov.yy = data_cov.yy / nd + eps;

  // k-means++ seeding of the two means.
  Rng rng(seed);
  const std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * nd));
  std::vector<double> d2(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = sq_dist(points[i], points[first]);
    total += d2[i];
  }
  const double target = uniform01(rng) * total;
  std::size_t second = n - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += d2[i];
    if (d2[i] > 0.0 && acc > target) {
      second = i;
      break;
    }
  }
  if (d2[second] == 0.0) {
    for (std::size_t i = n; i-- > 0;) {
      if (d2[i] > 0.0) {
        second = i;
        break;
      }
    }
  }

  GmmModel model;
  model.weights = {0.5, 0.5};
  model.means = {points[first], points[second]};
  model.covariances = {data_cov, data_cov};

  std::vector<std::array<double, 2>> resp(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it <= options.max_iterations; ++it) {
    // E-step.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto lj = log_joint(model, points[i]);
      const double norm = log_sum_exp(lj[0], lj[1]);
      resp[i] = {std::exp(lj[0] - norm), std::exp(lj[1] - norm)};
      ll += norm;
    }
    model.log_likelihood_trace.push_back(ll);
    if (it > 0 && ll - prev_ll < options.tolerance * std::abs(prev_ll)) break;
    if (it == options.max_iterations) break;
    prev_ll = ll;

    // M-step.
    for (int k = 0; k < 2; ++k) {
      double nk = 0.0;
      Point2 mean{0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i][k];
        mean[0] += resp[i][k] * points[i][0];
        mean[1] += resp[i][k] * points[i][1];
      }
      model.weights[k] = nk / nd;
      if (nk < 1e-12 * nd) continue;  // starved component keeps its shape
      mean[0] /= nk;
      mean[1] /= nk;
      Cov2 cov{0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = points[i][0] - mean[0];
        const double dy = points[i][1] - mean[1];
        cov.xx += resp[i][k] * dx * dx;
        cov.xy += resp[i][k] * dx * dy;
        cov.yy += resp[i][k] * dy * dy;
      }
      model.means[k] = mean;
      model.covariances[k] = {cov.xx / nk + eps, cov.xy / nk, cov.yy / nk + eps};
    }
    ++model.iterations;
  }
  return model;
}

std::vector<int> assign_clusters(const GmmModel& model,
                                 std::span<const Point2> points) {
  std::vector<int> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto lj = log_joint(model, points[i]);
    out[i] = lj[1] > lj[0] ? 1 : 0;
  }
  return out;
}

std::size_t CoarseLabels::count(int label) const {
  return static_cast<std::size_t>(std::ranges::count_if(
      labels, [label](const auto& kv) { return kv.second == label; }));
}

CoarseLabels generate_coarse_labels(std::span<const VideoSummary> summaries,
                                    double eta, std::uint64_t seed,
                                    int max_iters) {
  if (summaries.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                "coarse labeling needs at least 2 videos");
  }
  if (!(eta > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "eta must be positive");
  }
  {
    std::unordered_set<std::string> ids;
    for (const auto& s : summaries) {
      if (!ids.insert(s.video_id).second) {
        throw Error(ErrorCode::duplicate_id, "duplicate video id '" + s.video_id + "'");
      }
    }
  }

  std::vector<std::size_t> normal(summaries.size());
  for (std::size_t i = 0; i < normal.size(); ++i) normal[i] = i;
  std::vector<std::size_t> anomaly;

  CoarseLabels out;
  out.history.emplace_back(normal.size(), anomaly.size());
  for (int t = 0;; ++t) {
    const double ratio =
        static_cast<double>(anomaly.size()) / static_cast<double>(normal.size());
    if (ratio > eta) {
      out.stop_reason = CplStop::ratio_exceeded;
      break;
    }
    if (t >= max_iters) {
      out.stop_reason = CplStop::max_iterations;
      break;
    }
    if (normal.size() < 2) {
      out.stop_reason = CplStop::min_normal_size;
      break;
    }

    std::vector<Point2> points;
    points.reserve(normal.size());
    for (std::size_t idx : normal) {
      points.push_back({summaries[idx].mu, summaries[idx].sigma});
    }
    GmmModel model;
    try {
      model = fit_gmm_2(points, derive_seed(seed, "cpl.gmm", static_cast<std::uint64_t>(t)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_split) throw;
      out.stop_reason = CplStop::degenerate_split;
      break;
    }
    const auto assign = assign_clusters(model, points);

    std::array<std::vector<std::size_t>, 2> child;
    std::array<double, 2> mu_sum{0.0, 0.0};
    for (std::size_t i = 0; i < normal.size(); ++i) {
      child[assign[i]].push_back(normal[i]);
      mu_sum[assign[i]] += summaries[normal[i]].mu;
    }
    if (child[0].empty() || child[1].empty()) {
      out.stop_reason = CplStop::degenerate_split;
      break;
    }
    int small = child[0].size() < child[1].size() ? 0 : 1;
    if (child[0].size() == child[1].size()) {
      const double m0 = mu_sum[0] / static_cast<double>(child[0].size());
      const double m1 = mu_sum[1] / static_cast<double>(child[1].size());
      small = m0 > m1 ? 0 : 1;
    }
    const int large = 1 - small;
    if (child[large].size() < 2) {
      out.stop_reason = CplStop::min_normal_size;
      break;
    }

    anomaly.insert(anomaly.end(), child[small].begin(), child[small].end());
    normal = std::move(child[large]);
    ++out.iterations_used;
    out.history.emplace_back(normal.size(), anomaly.size());
  }

  for (std::size_t idx : normal) out.labels[summaries[idx].video_id] = 0;
  for (std::size_t idx : anomaly) out.labels[summaries[idx].video_id] = 1;
  out.final_ratio =
      static_cast<double>(anomaly.size()) / static_cast<double>(normal.size());
  return out;
}

std::string_view to_string(CplStop stop) {
  switch (stop) {
    case CplStop::ratio_exceeded: return "ratio_exceeded";
    case CplStop::max_iterations: return "max_iterations";
    case CplStop::min_normal_size: return "min_normal_size";
    case CplStop::degenerate_split: return "degenerate_split";
  }
  return "unknown";
}

nlohmann::json to_json(const CoarseLabels& coarse) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& [n, a] : coarse.history) history.push_back({n, a});
  return {{"labels", coarse.labels},
          {"iterations_used", coarse.iterations_used},
          {"final_ratio", coarse.final_ratio},
          {"stop_reason", to_string(coarse.stop_reason)},
          {"history", history}};
}

CoarseLabels coarse_from_json(const nlohmann::json& j) {
  CoarseLabels c;
  try {
    c.labels = j.at("labels").get<std::map<std::string, int>>();
    c.iterations_used = j.at("iterations_used").get<int>();
    c.final_ratio = j.at("final_ratio").get<double>();
    const auto reason = j.value("stop_reason", std::string("max_iterations"));
    for (auto s : {CplStop::ratio_exceeded, CplStop::max_iterations,
                   CplStop::min_normal_size, CplStop::degenerate_split}) {
      if (to_string(s) == reason) c.stop_reason = s;
    }
    if (j.contains("history")) {
      for (const auto& h : j["history"]) {
        c.history.emplace_back(h.at(0).get<std::size_t>(), h.at(1).get<std::size_t>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_data, std::string("bad coarse labels: ") + e.what());
  }
  for (const auto& [id, label] : c.labels) {
    if (label != 0 && label != 1) {
      throw Error(ErrorCode::invalid_data, "coarse label of '" + id + "' is not 0/1");
    }
  }
  return c;
}

}  // namespace c2fpl
