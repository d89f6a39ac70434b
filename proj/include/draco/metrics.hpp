#pragma once

// Trace records, virtual-global-model statistics and the convergence bound.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/core/vec.hpp"
#include "draco/problem.hpp"

namespace draco {

struct MessageCounters {
  std::uint64_t sent = 0;              // link transmissions carrying a nonempty backlog
  std::uint64_t delivered = 0;         // gamma < gamma_max
  std::uint64_t dropped_deadline = 0;  // gamma >= gamma_max
  std::uint64_t accepted = 0;          // aggregated at the receiver
  std::uint64_t dropped_psi = 0;       // discarded by the per-period budget
  std::uint64_t in_flight = 0;         // delivered after the horizon, never replayed

  friend bool operator==(const MessageCounters&, const MessageCounters&) = default;
};

struct TraceRecord {
  double time = 0.0;
  std::uint64_t events_executed = 0;
  double global_loss = 0.0;              // f(x_bar)
  double grad_norm_sq = 0.0;             // ||grad f(x_bar)||^2
  double mean_local_grad_norm_sq = 0.0;  // ||(1/N) sum_i grad f_i(x_i)||^2
  double consensus_distance = 0.0;
  MessageCounters counters;
  std::vector<double> agent_loss;  // f_i(x_i)
};

inline Vec virtual_global(std::span<const Vec> states) { return vec::mean(states); }

// (1/N) sum_i ||x_i - x_bar||^2
inline double consensus_distance(std::span<const Vec> states) {
  const Vec bar = virtual_global(states);
  double s = 0.0;
  for (const auto& x : states) s += vec::dist_sq(x, bar);
  return s / static_cast<double>(states.size());
}

// (1/N) sum_i grad f_i(x_i)
inline Vec mean_local_gradient(const Objective& obj, std::span<const Vec> states) {
  Vec g(obj.dimension(), 0.0);
  for (AgentId i = 0; i < states.size(); ++i) vec::axpy(1.0, obj.full_gradient(i, states[i]), g);
  for (double& v : g) v /= static_cast<double>(states.size());
  return g;
}

inline TraceRecord make_record(const Objective& obj, std::span<const Vec> states, double time,
                               std::uint64_t events, const MessageCounters& counters) {
  TraceRecord r;
  r.time = time;
  r.events_executed = events;
  const Vec bar = virtual_global(states);
  r.global_loss = obj.global_loss(bar);
  r.grad_norm_sq = vec::norm_sq(obj.global_gradient(bar));
  r.mean_local_grad_norm_sq = vec::norm_sq(mean_local_gradient(obj, states));
  r.consensus_distance = consensus_distance(states);
  r.counters = counters;
  r.agent_loss.reserve(states.size());
  for (AgentId i = 0; i < states.size(); ++i) r.agent_loss.push_back(obj.local_loss(i, states[i]));
  return r;
}

// Emits at events = 0, every `interval` executed events, and once at the end.
class TraceSampler {
 public:
  explicit TraceSampler(std::uint64_t interval) : interval_(interval) {
    if (interval == 0) throw InvalidInput("sampling interval must be >= 1");
  }
  bool due(std::uint64_t events_executed) const noexcept {
    return events_executed % interval_ == 0;
  }
  std::uint64_t interval() const noexcept { return interval_; }

 private:
  std::uint64_t interval_;
};

struct BoundInputs {
  double F = 0.0;
  double B = 1.0;
  double gamma = 0.0;
  double Psi = 1.0;
  double zeta = 0.0;
  double sigma = 0.0;
  double N = 1.0;
  double L = 0.0;
  double rho = 0.0;
};

struct BoundResult {
  double value = 0.0;
  bool valid = false;
  bool agents_ok = false;  // N > 4
  bool budget_ok = false;  // Psi >= 3
  bool step_ok = false;    // gamma <= 1 / (8 B L N Psi)
  std::array<double, 6> terms{};
};

inline double max_theorem_step(double B, double L, double N, double Psi) {
  return 1.0 / (8.0 * B * L * N * Psi);
}

// (128 / (11 B gamma Psi)) F + 11136 zeta^2 / (11 (N - 4)) + 252 sigma^2 / 11
//   + 2592 N zeta^2 / 11 + 9216 B L^2 gamma^2 sigma^2 + 64 L gamma rho^2 sigma^2 / (11 N Psi)
inline BoundResult theorem_bound(const BoundInputs& in) {
  BoundResult r;
  r.agents_ok = in.N > 4.0;
  r.budget_ok = in.Psi >= 3.0;
  r.step_ok = in.gamma > 0.0 && in.gamma <= max_theorem_step(in.B, in.L, in.N, in.Psi);
  r.valid = r.agents_ok && r.budget_ok && r.step_ok;
  if (!r.agents_ok) {
    r.value = std::numeric_limits<double>::infinity();
    r.terms.fill(std::numeric_limits<double>::quiet_NaN());
    return r;
  }
  const double z2 = in.zeta * in.zeta;
  const double s2 = in.sigma * in.sigma;
  r.terms[0] = 128.0 / (11.0 * in.B * in.gamma * in.Psi) * in.F;
  r.terms[1] = 11136.0 * z2 / (11.0 * (in.N - 4.0));
  r.terms[2] = 252.0 * s2 / 11.0;
  r.terms[3] = 2592.0 * in.N * z2 / 11.0;
  r.terms[4] = 9216.0 * in.B * in.L * in.L * in.gamma * in.gamma * s2;
  r.terms[5] = 64.0 * in.L * in.gamma * in.rho * in.rho * s2 / (11.0 * in.N * in.Psi);
  for (double t : r.terms) r.value += t;
  return r;
}

// --- CSV -------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& os, std::span<const TraceRecord> records) {
  const std::size_t agents = records.empty() ? 0 : records.front().agent_loss.size();
  os << "time,events_executed,global_loss,grad_norm_sq,mean_local_grad_norm_sq,"
        "consensus_distance,sent,delivered,dropped_deadline,accepted,dropped_psi,in_flight";
  for (std::size_t i = 0; i < agents; ++i) os << ",loss_" << i;
  os << '\n';
  for (const auto& r : records) {
    os << format_double(r.time) << ',' << r.events_executed << ',' << format_double(r.global_loss)
       << ',' << format_double(r.grad_norm_sq) << ',' << format_double(r.mean_local_grad_norm_sq)
       << ',' << format_double(r.consensus_distance) << ',' << r.counters.sent << ','
       << r.counters.delivered << ',' << r.counters.dropped_deadline << ','
       << r.counters.accepted << ',' << r.counters.dropped_psi << ',' << r.counters.in_flight;
    for (double l : r.agent_loss) os << ',' << format_double(l);
    os << '\n';
  }
}

namespace detail {

// strtod keeps subnormals that std::stod rejects as out of range.
inline double parse_cell(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace detail

inline std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  std::vector<TraceRecord> out;
  std::string line;
  if (!std::getline(is, line)) throw IoError("trace CSV is empty");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 12) throw IoError("trace CSV line " + std::to_string(lineno) + ": short row");
    TraceRecord r;
    try {
      r.time = detail::parse_cell(cells[0]);
      r.events_executed = std::stoull(cells[1]);
      r.global_loss = detail::parse_cell(cells[2]);
      r.grad_norm_sq = detail::parse_cell(cells[3]);
      r.mean_local_grad_norm_sq = detail::parse_cell(cells[4]);
      r.consensus_distance = detail::parse_cell(cells[5]);
      r.counters.sent = std::stoull(cells[6]);
      r.counters.delivered = std::stoull(cells[7]);
      r.counters.dropped_deadline = std::stoull(cells[8]);
      r.counters.accepted = std::stoull(cells[9]);
      r.counters.dropped_psi = std::stoull(cells[10]);
      r.counters.in_flight = std::stoull(cells[11]);
      for (std::size_t k = 12; k < cells.size(); ++k) r.agent_loss.push_back(detail::parse_cell(cells[k]));
    } catch (const std::exception&) {
      throw IoError("trace CSV line " + std::to_string(lineno) + ": unparsable value");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace draco
