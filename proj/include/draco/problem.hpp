#pragma once

// Objective families, stochastic gradient oracles and the local batch-training
// step that produces an update (delta) for one agent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"

namespace draco {

enum class ObjectiveKind { SyntheticQuadratic, LogisticRegression, TinyMLP };

inline const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::SyntheticQuadratic: return "quadratic";
    case ObjectiveKind::LogisticRegression: return "logistic";
    case ObjectiveKind::TinyMLP: return "mlp";
  }
  return "unknown";
}

// Binary-labelled samples, row-major. Labels are +1 / -1.
struct Dataset {
  std::size_t features = 0;
  std::vector<double> rows;
  std::vector<double> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t k) const {
    return {rows.data() + k * features, features};
  }
};

struct ProblemConstants {
  double L = 0.0;
  double sigma = 0.0;
  double zeta = 0.0;
  double F = 0.0;
  bool exact = false;  // false: sampled estimates
};

struct LocalUpdate {
  Vec delta;
  AgentId producer = 0;
  double produced_at = 0.0;
};

namespace detail {

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

class Objective {
 public:
  // f_i(x) = 0.5 * ||x - c_i||^2
  static Objective quadratic(std::vector<Vec> centers, double sigma_inj) {
    if (centers.empty()) throw InvalidInput("quadratic objective needs at least one agent");
    const auto d = centers.front().size();
    if (d == 0) throw InvalidInput("dimension must be positive");
    for (const auto& c : centers) {
      if (c.size() != d) throw InvalidInput("all centers must share one dimension");
    }
    Objective o(ObjectiveKind::SyntheticQuadratic, d, centers.size(), sigma_inj);
    o.centers_ = std::move(centers);
    return o;
  }

  // Mean logistic loss per agent plus (l2/2)||w||^2. batch = 0 uses the whole
  // local dataset for every stochastic gradient.
  static Objective logistic(std::vector<Dataset> data, double sigma_inj, std::size_t batch = 0,
                            double l2 = 0.0) {
    check_datasets(data);
    Objective o(ObjectiveKind::LogisticRegression, data.front().features, data.size(), sigma_inj);
    o.data_ = std::move(data);
    o.batch_ = batch;
    o.l2_ = l2;
    return o;
  }

  // One tanh hidden layer, scalar logit output. Parameter layout:
  // [W1 (hidden x features, row-major) | b1 (hidden) | w2 (hidden) | b2].
  static Objective mlp(std::vector<Dataset> data, std::size_t hidden, double sigma_inj,
                       std::size_t batch = 0, double l2 = 0.0) {
    check_datasets(data);
    if (hidden == 0) throw InvalidInput("mlp needs at least one hidden unit");
    const auto p = data.front().features;
    Objective o(ObjectiveKind::TinyMLP, hidden * p + 2 * hidden + 1, data.size(), sigma_inj);
    o.data_ = std::move(data);
    o.hidden_ = hidden;
    o.batch_ = batch;
    o.l2_ = l2;
    return o;
  }

  ObjectiveKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return d_; }
  std::size_t num_agents() const noexcept { return n_; }
  double noise() const noexcept { return sigma_inj_; }
  double l2() const noexcept { return l2_; }
  std::size_t batch() const noexcept { return batch_; }
  std::size_t hidden() const noexcept { return hidden_; }
  const std::vector<Vec>& centers() const noexcept { return centers_; }
  const std::vector<Dataset>& datasets() const noexcept { return data_; }

  // Exact local gradient of f_i.
  Vec full_gradient(AgentId agent, std::span<const double> x) const {
    check(agent, x);
    if (kind_ == ObjectiveKind::SyntheticQuadratic) return vec::sub(x, centers_[agent]);
    const auto& ds = data_[agent];
    Vec g(d_, 0.0);
    for (std::size_t k = 0; k < ds.size(); ++k) accumulate_sample_gradient(ds, k, x, g);
    finish_gradient(x, g, static_cast<double>(ds.size()));
    return g;
  }

  double local_loss(AgentId agent, std::span<const double> x) const {
    check(agent, x);
    if (kind_ == ObjectiveKind::SyntheticQuadratic) {
      return 0.5 * vec::dist_sq(x, centers_[agent]);
    }
    const auto& ds = data_[agent];
    double s = 0.0;
    for (std::size_t k = 0; k < ds.size(); ++k) s += sample_loss(ds, k, x);
    return s / static_cast<double>(ds.size()) + 0.5 * l2_ * vec::norm_sq(x);
  }

  double global_loss(std::span<const double> x) const {
    double s = 0.0;
    for (AgentId i = 0; i < n_; ++i) s += local_loss(i, x);
    return s / static_cast<double>(n_);
  }

  Vec global_gradient(std::span<const double> x) const {
    Vec g(d_, 0.0);
    for (AgentId i = 0; i < n_; ++i) vec::axpy(1.0, full_gradient(i, x), g);
    for (double& v : g) v /= static_cast<double>(n_);
    return g;
  }

  // g_i(x): minibatch gradient (when batch < local dataset size) plus additive
  // N(0, sigma_inj^2) noise per coordinate.
  Vec stochastic_gradient(AgentId agent, std::span<const double> x, Rng& rng) const {
    Vec g;
    if (kind_ == ObjectiveKind::SyntheticQuadratic || batch_ == 0 ||
        batch_ >= data_[agent].size()) {
      g = full_gradient(agent, x);
    } else {
      check(agent, x);
      const auto& ds = data_[agent];
      g.assign(d_, 0.0);
      for (std::size_t b = 0; b < batch_; ++b) {
        accumulate_sample_gradient(ds, uniform_index(rng, ds.size()), x, g);
      }
      finish_gradient(x, g, static_cast<double>(batch_));
    }
    if (sigma_inj_ > 0.0) {
      for (double& v : g) v += sigma_inj_ * standard_normal(rng);
    }
    return g;
  }

 private:
  Objective(ObjectiveKind kind, std::size_t d, std::size_t n, double sigma_inj)
      : kind_(kind), d_(d), n_(n), sigma_inj_(sigma_inj) {
    if (!(sigma_inj >= 0.0) || !std::isfinite(sigma_inj)) {
      throw InvalidInput("gradient noise level must be finite and >= 0");
    }
  }

  static void check_datasets(const std::vector<Dataset>& data) {
    if (data.empty()) throw InvalidInput("objective needs at least one agent");
    const auto p = data.front().features;
    if (p == 0) throw InvalidInput("datasets need at least one feature");
    for (const auto& ds : data) {
      if (ds.features != p) throw InvalidInput("agents must share one feature count");
      if (ds.size() == 0 || ds.rows.size() != ds.size() * p) {
        throw InvalidInput("malformed or empty local dataset");
      }
    }
  }

  void check(AgentId agent, std::span<const double> x) const {
    if (agent >= n_) throw InvalidInput("agent id " + std::to_string(agent) + " out of range");
    if (x.size() != d_) {
      throw InvalidInput("model dimension " + std::to_string(x.size()) + " != " +
                         std::to_string(d_));
    }
  }

  double logit(const Dataset& ds, std::size_t k, std::span<const double> x,
               std::vector<double>* hidden_out) const {
    const auto a = ds.row(k);
    if (kind_ == ObjectiveKind::LogisticRegression) return vec::dot(x, a);
    const auto p = ds.features;
    const auto h = hidden_;
    const double* w1 = x.data();
    const double* b1 = w1 + h * p;
    const double* w2 = b1 + h;
    const double b2 = w2[h];
    double z = b2;
    if (hidden_out) hidden_out->resize(h);
    for (std::size_t u = 0; u < h; ++u) {
      double pre = b1[u];
      for (std::size_t f = 0; f < p; ++f) pre += w1[u * p + f] * a[f];
      const double act = std::tanh(pre);
      if (hidden_out) (*hidden_out)[u] = act;
      z += w2[u] * act;
    }
    return z;
  }

  double sample_loss(const Dataset& ds, std::size_t k, std::span<const double> x) const {
    return detail::softplus(-ds.labels[k] * logit(ds, k, x, nullptr));
  }

  void accumulate_sample_gradient(const Dataset& ds, std::size_t k, std::span<const double> x,
                                  Vec& g) const {
    const double y = ds.labels[k];
    const auto a = ds.row(k);
    if (kind_ == ObjectiveKind::LogisticRegression) {
      const double dz = -y * detail::sigmoid(-y * vec::dot(x, a));
      vec::axpy(dz, a, g);
      return;
    }
    std::vector<double> act;
    const double z = logit(ds, k, x, &act);
    const double dz = -y * detail::sigmoid(-y * z);
    const auto p = ds.features;
    const auto h = hidden_;
    const double* w2 = x.data() + h * p + h;
    double* gw1 = g.data();
    double* gb1 = gw1 + h * p;
    double* gw2 = gb1 + h;
    for (std::size_t u = 0; u < h; ++u) {
      gw2[u] += dz * act[u];
      const double da = dz * w2[u] * (1.0 - act[u] * act[u]);
      gb1[u] += da;
      for (std::size_t f = 0; f < p; ++f) gw1[u * p + f] += da * a[f];
    }
    gw2[h] += dz;
  }

  void finish_gradient(std::span<const double> x, Vec& g, double count) const {
    for (std::size_t k = 0; k < d_; ++k) g[k] = g[k] / count + l2_ * x[k];
  }

  ObjectiveKind kind_;
  std::size_t d_;
  std::size_t n_;
  double sigma_inj_;
  std::vector<Vec> centers_;
  std::vector<Dataset> data_;
  std::size_t hidden_ = 0;
  std::size_t batch_ = 0;
  double l2_ = 0.0;
};

struct GlobalTag {};
inline constexpr GlobalTag global{};

inline Vec gradient(const Objective& obj, AgentId agent, std::span<const double> x, Rng& rng) {
  return obj.stochastic_gradient(agent, x, rng);
}

inline double loss(const Objective& obj, AgentId agent, std::span<const double> x) {
  return obj.local_loss(agent, x);
}

inline double loss(const Objective& obj, GlobalTag, std::span<const double> x) {
  return obj.global_loss(x);
}

// y_0 = x, y_{b+1} = y_b - gamma * g_i(y_b), delta = y_B - x. x is not touched.
inline LocalUpdate local_batch_train(const Objective& obj, AgentId agent,
                                     std::span<const double> x, std::size_t batches,
                                     double step, Rng& rng, double now = 0.0) {
  if (!(step > 0.0)) throw InvalidInput("step size must be > 0");
  if (batches == 0) throw InvalidInput("batch count must be >= 1");
  Vec y(x.begin(), x.end());
  for (std::size_t b = 0; b < batches; ++b) {
    const Vec g = obj.stochastic_gradient(agent, y, rng);
    vec::axpy(-step, g, y);
    if (!vec::all_finite(y)) {
      throw NumericalOverflow("non-finite model during local training of agent " +
                                  std::to_string(agent),
                              b);
    }
  }
  return LocalUpdate{vec::sub(y, x), agent, now};
}

// Seeded Gaussian blobs: class means at +/- separation along a fixed random
// direction, shifted per agent by N(0, heterogeneity^2 I) so local optima differ.
inline std::vector<Dataset> make_blob_datasets(std::size_t agents, std::size_t samples,
                                               std::size_t features, double separation,
                                               double heterogeneity, Rng& rng) {
  if (agents == 0 || samples == 0 || features == 0) {
    throw InvalidInput("blob datasets need agents, samples and features > 0");
  }
  Vec direction(features);
  for (double& v : direction) v = standard_normal(rng);
  const double norm = std::sqrt(std::max(vec::norm_sq(direction), 1e-300));
  for (double& v : direction) v /= norm;

  std::vector<Dataset> out(agents);
  for (auto& ds : out) {
    ds.features = features;
    Vec shift(features);
    for (double& v : shift) v = heterogeneity * standard_normal(rng);
    ds.rows.resize(samples * features);
    ds.labels.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) {
      const double y = (k % 2 == 0) ? 1.0 : -1.0;
      ds.labels[k] = y;
      for (std::size_t f = 0; f < features; ++f) {
        ds.rows[k * features + f] =
            y * separation * direction[f] + shift[f] + standard_normal(rng);
      }
    }
  }
  return out;
}

namespace detail {

// Backtracking gradient descent on the global objective; returns the lowest value seen.
inline double estimate_minimum(const Objective& obj, Vec x, std::size_t iterations) {
  double fx = obj.global_loss(x);
  double step = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Vec g = obj.global_gradient(x);
    const double gg = vec::norm_sq(g);
    if (gg < 1e-24) break;
    for (int tries = 0; tries < 60; ++tries) {
      Vec trial = x;
      vec::axpy(-step, g, trial);
      const double ft = obj.global_loss(trial);
      if (ft <= fx - 0.5 * step * gg) {
        x = std::move(trial);
        fx = ft;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
  }
  return fx;
}

}  // namespace detail

// Closed form for quadratics. Otherwise sampled estimates (exact = false):
// L from the logistic curvature bound or sampled gradient ratios, sigma from
// repeated stochastic gradients at x0, zeta at x0, F against a descent-based
// estimate of the minimum.
inline ProblemConstants estimate_constants(const Objective& obj, std::span<const double> x0,
                                           std::uint64_t seed = 0) {
  if (x0.size() != obj.dimension()) throw InvalidInput("x0 dimension mismatch");
  ProblemConstants pc;
  const auto n = obj.num_agents();
  if (obj.kind() == ObjectiveKind::SyntheticQuadratic) {
    const Vec cbar = vec::mean(obj.centers());
    pc.L = 1.0;
    pc.sigma = obj.noise() * std::sqrt(static_cast<double>(obj.dimension()));
    for (const auto& c : obj.centers()) pc.zeta = std::max(pc.zeta, std::sqrt(vec::dist_sq(c, cbar)));
    pc.F = obj.global_loss(x0) - obj.global_loss(cbar);
    pc.exact = true;
    return pc;
  }

  Rng rng = make_stream(seed, Stream::Estimation, 0);
  if (obj.kind() == ObjectiveKind::LogisticRegression) {
    double max_row = 0.0;
    for (const auto& ds : obj.datasets()) {
      for (std::size_t k = 0; k < ds.size(); ++k) max_row = std::max(max_row, vec::norm_sq(ds.row(k)));
    }
    pc.L = 0.25 * max_row + obj.l2();
  } else {
    for (AgentId i = 0; i < n; ++i) {
      for (int s = 0; s < 20; ++s) {
        Vec a(x0.begin(), x0.end());
        Vec b(x0.begin(), x0.end());
        for (auto& v : a) v += standard_normal(rng);
        for (auto& v : b) v += standard_normal(rng);
        const double num = std::sqrt(vec::dist_sq(obj.full_gradient(i, a), obj.full_gradient(i, b)));
        pc.L = std::max(pc.L, num / std::sqrt(vec::dist_sq(a, b)));
      }
    }
  }

  const Vec gbar = obj.global_gradient(x0);
  constexpr int kDraws = 200;
  double worst_var = 0.0;
  for (AgentId i = 0; i < n; ++i) {
    const Vec gi = obj.full_gradient(i, x0);
    pc.zeta = std::max(pc.zeta, std::sqrt(vec::dist_sq(gi, gbar)));
    double acc = 0.0;
    for (int s = 0; s < kDraws; ++s) acc += vec::dist_sq(obj.stochastic_gradient(i, x0, rng), gi);
    worst_var = std::max(worst_var, acc / kDraws);
  }
  pc.sigma = std::sqrt(worst_var);
  pc.F = std::max(0.0, obj.global_loss(x0) - detail::estimate_minimum(obj, Vec(x0.begin(), x0.end()), 300));
  pc.exact = false;
  return pc;
}

}  // namespace draco
