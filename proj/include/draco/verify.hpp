#pragma once

// Randomized checks of the analysis inequalities on small quadratic instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"
#include "draco/problem.hpp"
#include "draco/protocol.hpp"

namespace draco::verify {

inline constexpr double kSlack = 1e-9;

// Quadratic instance: grad f_i(x_i) = x_i - c_i. `weights` is the incoming row
// q^{j->receiver}; weights[receiver] is always 0.
struct InequalityInstance {
  std::vector<Vec> centers;
  std::vector<Vec> points;
  AgentId receiver = 0;
  Vec weights;
  double zeta = 0.0;

  std::size_t agents() const noexcept { return centers.size(); }
};

// How random incoming rows are drawn.
enum class WeightLaw {
  Simplex,  // uniform on the simplex over j != receiver (flat Dirichlet)
  Subset,   // uniform weights over a random nonempty subset, like a reception group
  Single,   // all mass on one random j
};

inline const char* to_string(WeightLaw w) {
  switch (w) {
    case WeightLaw::Simplex: return "simplex";
    case WeightLaw::Subset: return "subset";
    case WeightLaw::Single: return "single";
  }
  return "unknown";
}

inline WeightLaw weight_law_from_string(const std::string& s) {
  if (s == "simplex") return WeightLaw::Simplex;
  if (s == "subset") return WeightLaw::Subset;
  if (s == "single") return WeightLaw::Single;
  throw InvalidInput("unknown weight law '" + s + "'");
}

inline std::vector<Vec> local_gradients(const InequalityInstance& inst) {
  std::vector<Vec> g;
  g.reserve(inst.agents());
  for (std::size_t i = 0; i < inst.agents(); ++i) g.push_back(vec::sub(inst.points[i], inst.centers[i]));
  return g;
}

// Tightest admissible zeta: max_i ||grad f_i(x_i) - (1/N) sum_k grad f_k(x_k)||.
inline double compute_zeta(std::span<const Vec> centers, std::span<const Vec> points) {
  std::vector<Vec> g;
  for (std::size_t i = 0; i < centers.size(); ++i) g.push_back(vec::sub(points[i], centers[i]));
  const Vec gbar = vec::mean(g);
  double z2 = 0.0;
  for (const auto& gi : g) z2 = std::max(z2, vec::dist_sq(gi, gbar));
  return std::sqrt(z2);
}

inline InequalityInstance make_instance(std::size_t n, std::size_t d, Rng& rng,
                                        WeightLaw law = WeightLaw::Simplex) {
  if (n < 2 || d < 1) throw InvalidInput("instance needs N >= 2 and d >= 1");
  InequalityInstance inst;
  inst.centers.assign(n, Vec(d));
  inst.points.assign(n, Vec(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      inst.centers[i][k] = standard_normal(rng);
      inst.points[i][k] = standard_normal(rng);
    }
  }
  inst.receiver = uniform_index(rng, n);
  inst.weights.assign(n, 0.0);
  std::vector<AgentId> others;
  for (AgentId j = 0; j < n; ++j) {
    if (j != inst.receiver) others.push_back(j);
  }
  switch (law) {
    case WeightLaw::Simplex: {
      double s = 0.0;
      for (auto j : others) s += (inst.weights[j] = -std::log(uniform_open_closed(rng)));
      for (auto j : others) inst.weights[j] /= s;
      break;
    }
    case WeightLaw::Subset: {
      // partial Fisher-Yates for a subset of size k in [1, N-1]
      const auto k = 1 + uniform_index(rng, others.size());
      for (std::size_t a = 0; a < k; ++a) {
        std::swap(others[a], others[a + uniform_index(rng, others.size() - a)]);
        inst.weights[others[a]] = 1.0 / static_cast<double>(k);
      }
      break;
    }
    case WeightLaw::Single:
      inst.weights[others[uniform_index(rng, others.size())]] = 1.0;
      break;
  }
  inst.zeta = compute_zeta(inst.centers, inst.points);
  return inst;
}

struct CheckResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;

  double slack() const noexcept { return rhs - lhs; }
};

// ||sum_j q^{j->i} [grad f_i(x_i) - grad f_j(x_j)]||^2 <= 2 N zeta^2 / (N - 4)
inline CheckResult check_lemma_grad_deviation(const InequalityInstance& inst) {
  const auto n = inst.agents();
  if (n <= 4) throw InvalidInput("local-gradient deviation check needs N > 4");
  const auto g = local_gradients(inst);
  const auto i = inst.receiver;
  Vec acc(g[i].size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (inst.weights[j] == 0.0) continue;
    vec::axpy(inst.weights[j], vec::sub(g[i], g[j]), acc);
  }
  CheckResult r;
  r.lhs = vec::norm_sq(acc);
  const double nd = static_cast<double>(n);
  r.rhs = 2.0 * nd * inst.zeta * inst.zeta / (nd - 4.0);
  r.holds = r.lhs <= r.rhs + kSlack;
  return r;
}

// sum_{j != i} q^{j->i} ||grad f_j(x_j) - grad f_i(x_i)||^2 <= 9 N zeta^2 / 4
inline CheckResult check_prop_zeta(const InequalityInstance& inst) {
  const auto n = inst.agents();
  if (n < 4) throw InvalidInput("weighted divergence check needs N >= 4");
  const auto g = local_gradients(inst);
  const auto i = inst.receiver;
  CheckResult r;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    r.lhs += inst.weights[j] * vec::dist_sq(g[j], g[i]);
  }
  r.rhs = 9.0 * static_cast<double>(n) * inst.zeta * inst.zeta / 4.0;
  r.holds = r.lhs <= r.rhs + kSlack;
  return r;
}

struct PointPair {
  Vec x;
  Vec y;
};

// max over agents and pairs of ||grad f_i(x) - grad f_i(y)|| / ||x - y||.
inline double check_smoothness(const Objective& obj, std::span<const PointPair> pairs) {
  double worst = 0.0;
  for (const auto& p : pairs) {
    const double dxy = std::sqrt(vec::dist_sq(p.x, p.y));
    if (!(dxy > 0.0)) throw InvalidInput("smoothness pairs need x != y");
    for (AgentId i = 0; i < obj.num_agents(); ++i) {
      const double dg = std::sqrt(vec::dist_sq(obj.full_gradient(i, p.x), obj.full_gradient(i, p.y)));
      worst = std::max(worst, dg / dxy);
    }
  }
  return worst;
}

inline constexpr double kRowTolerance = 1e-12;

// Every applied weight row sums to 1 within 1e-12. Vacuously true when empty.
inline bool check_row_stochastic(std::span<const ReceptionRecord> rows) {
  for (const auto& r : rows) {
    if (r.accepted == 0) continue;
    double s = 0.0;
    for (double w : r.weights) {
      if (w < 0.0) return false;
      s += w;
    }
    if (std::abs(s - 1.0) > kRowTolerance) return false;
  }
  return true;
}

struct FuzzTally {
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();  // min rhs - lhs
  double max_ratio = 0.0;                                        // max lhs / rhs (rhs > 0)
  std::size_t zeta_invalid = 0;  // instances whose reported zeta fails its own definition

  void add(const CheckResult& r) {
    ++instances;
    if (!r.holds) ++violations;
    worst_slack = std::min(worst_slack, r.slack());
    if (r.rhs > 0.0) max_ratio = std::max(max_ratio, r.lhs / r.rhs);
  }
};

struct FuzzReport {
  FuzzTally lemma;  // N in [5, 50]
  FuzzTally prop;   // N in [4, 50]
  WeightLaw law = WeightLaw::Simplex;
  std::uint64_t seed = 0;

  bool passed() const noexcept {
    return lemma.violations == 0 && prop.violations == 0 && lemma.zeta_invalid == 0 &&
           prop.zeta_invalid == 0;
  }
};

inline bool zeta_is_valid(const InequalityInstance& inst) {
  const auto g = local_gradients(inst);
  const Vec gbar = vec::mean(g);
  for (const auto& gi : g) {
    if (vec::dist_sq(gi, gbar) > inst.zeta * inst.zeta + 1e-12) return false;
  }
  return true;
}

// Instance k of each family uses its own sub-stream, so results do not depend
// on the instance count or evaluation order.
inline FuzzReport run_fuzz(std::size_t instances, std::uint64_t seed,
                           WeightLaw law = WeightLaw::Simplex) {
  FuzzReport rep;
  rep.law = law;
  rep.seed = seed;
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng = make_stream(seed, Stream::Verify, 2 * k);
    const auto n = 5 + uniform_index(rng, 46);
    const auto d = 1 + uniform_index(rng, 8);
    const auto inst = make_instance(n, d, rng, law);
    if (!zeta_is_valid(inst)) ++rep.lemma.zeta_invalid;
    rep.lemma.add(check_lemma_grad_deviation(inst));
  }
  for (std::size_t k = 0; k < instances; ++k) {
    Rng rng = make_stream(seed, Stream::Verify, 2 * k + 1);
    const auto n = 4 + uniform_index(rng, 47);
    const auto d = 1 + uniform_index(rng, 8);
    const auto inst = make_instance(n, d, rng, law);
    if (!zeta_is_valid(inst)) ++rep.prop.zeta_invalid;
    rep.prop.add(check_prop_zeta(inst));
  }
  return rep;
}

}  // namespace draco::verify
