#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "draco/core/error.hpp"

namespace draco {

using Vec = std::vector<double>;
using AgentId = std::size_t;

namespace vec {

inline void require_same_size(std::span<const double> a, std::span<const double> b,
                              const char* where) {
  if (a.size() != b.size()) {
    throw InvalidInput(std::string(where) + ": dimension mismatch (" +
                       std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double dist_sq(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "dist_sq");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x, y, "axpy");
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "sub");
  Vec out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

inline Vec mean(std::span<const Vec> rows) {
  if (rows.empty()) throw InvalidInput("mean: empty set");
  // shifted by the first row: identical rows give that row back exactly
  const auto& r0 = rows.front();
  Vec acc(r0.size(), 0.0);
  for (const auto& r : rows) {
    require_same_size(r, r0, "mean");
    for (std::size_t k = 0; k < r.size(); ++k) acc[k] += r[k] - r0[k];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  Vec out(r0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += acc[k] * inv;
  return out;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace vec
}  // namespace draco
