#pragma once

// Continuous-timeline event generation and the deterministic replay queue.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"

namespace draco {

// Arrival is internal: one delivered message landing at a receiver. Arrivals
// are folded into ReceiveGroup events by the superposition window.
enum class EventKind : std::uint8_t { Compute, Transmit, Arrival, ReceiveGroup, Unification };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Compute: return "compute";
    case EventKind::Transmit: return "transmit";
    case EventKind::Arrival: return "arrival";
    case EventKind::ReceiveGroup: return "receive_group";
    case EventKind::Unification: return "unification";
  }
  return "unknown";
}

inline EventKind event_kind_from_string(const std::string& s) {
  if (s == "compute") return EventKind::Compute;
  if (s == "transmit") return EventKind::Transmit;
  if (s == "arrival") return EventKind::Arrival;
  if (s == "receive_group") return EventKind::ReceiveGroup;
  if (s == "unification") return EventKind::Unification;
  throw InvalidInput("unknown event kind '" + s + "'");
}

inline constexpr std::int64_t kNoRef = -1;

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  AgentId node = 0;
  EventKind kind = EventKind::Compute;
  // Unification: hub id. Arrival: message index. Otherwise kNoRef.
  std::int64_t ref = kNoRef;

  friend bool operator==(const Event&, const Event&) = default;
};

inline bool event_before(const Event& a, const Event& b) noexcept {
  return a.time < b.time || (a.time == b.time && a.seq < b.seq);
}

struct EventSchedule {
  std::vector<Event> events;
  double horizon = 0.0;
  double period = 0.0;
};

// Inverse CDF draw for a fixed u in (0, 1].
inline double exponential_from_uniform(double rate, double u) {
  if (!(rate > 0.0)) throw InvalidInput("exponential rate must be > 0");
  if (!(u > 0.0 && u <= 1.0)) throw InvalidInput("uniform draw must lie in (0, 1]");
  return -std::log(u) / rate;
}

inline double sample_exponential(double rate, Rng& rng) {
  if (!(rate > 0.0)) throw InvalidInput("exponential rate must be > 0");
  return exponential_from_uniform(rate, uniform_open_closed(rng));
}

// Pr{num(t0, t0+P] = m} for a homogeneous Poisson process of rate lambda,
// evaluated in log space.
inline double poisson_count_pmf(double rate, double period, std::uint64_t m) {
  if (!(rate > 0.0) || !(period > 0.0)) throw InvalidInput("pmf needs rate > 0 and period > 0");
  const double mu = rate * period;
  const double md = static_cast<double>(m);
  const double log_p = (m == 0 ? 0.0 : md * std::log(mu)) - mu - std::lgamma(md + 1.0);
  return std::exp(log_p);
}

inline std::size_t unification_count(double horizon, double period) {
  auto k = static_cast<std::size_t>(std::floor(horizon / period));
  while (k > 0 && static_cast<double>(k) * period > horizon) --k;
  while (static_cast<double>(k + 1) * period <= horizon) ++k;
  return k;
}

// Round-robin hub for the m-th unification (m >= 1).
inline AgentId hub_for_period(std::size_t m, std::size_t agents) { return (m - 1) % agents; }

// Arrival times of a rate-`rate` Poisson process on (0, horizon].
inline std::vector<double> poisson_arrivals(double rate, double horizon, Rng& rng) {
  std::vector<double> out;
  double t = 0.0;
  for (;;) {
    t += sample_exponential(rate, rng);
    if (t > horizon) break;
    out.push_back(t);
  }
  return out;
}

// Per agent: Compute arrivals from one stream and Transmit arrivals from an
// independent stream, plus Unification at every multiple of the period.
// Sub-streams come from the master seed, so each agent's timeline is fixed by
// (seed, agent) alone.
inline EventSchedule generate_schedule(std::span<const double> compute_rates,
                                       std::span<const double> transmit_rates, double horizon,
                                       double period, std::uint64_t seed) {
  if (compute_rates.size() != transmit_rates.size() || compute_rates.empty()) {
    throw InvalidInput("rate vectors must be nonempty and of equal length");
  }
  if (!(period > 0.0) || !(horizon >= period)) {
    throw InvalidInput("schedule needs 0 < P <= T");
  }
  const auto n = compute_rates.size();
  EventSchedule s;
  s.horizon = horizon;
  s.period = period;
  std::uint64_t seq = 0;
  for (AgentId i = 0; i < n; ++i) {
    Rng crng = make_stream(seed, Stream::ComputeSchedule, i);
    for (double t : poisson_arrivals(compute_rates[i], horizon, crng)) {
      s.events.push_back({t, seq++, i, EventKind::Compute, kNoRef});
    }
    Rng trng = make_stream(seed, Stream::TransmitSchedule, i);
    for (double t : poisson_arrivals(transmit_rates[i], horizon, trng)) {
      s.events.push_back({t, seq++, i, EventKind::Transmit, kNoRef});
    }
  }
  const auto k = unification_count(horizon, period);
  for (std::size_t m = 1; m <= k; ++m) {
    const auto hub = hub_for_period(m, n);
    s.events.push_back(
        {static_cast<double>(m) * period, seq++, hub, EventKind::Unification,
         static_cast<std::int64_t>(hub)});
  }
  std::sort(s.events.begin(), s.events.end(), event_before);
  return s;
}

// Min-priority queue over (time, seq). Rejects inserts earlier than the time of
// the last popped event.
class EventQueue {
 public:
  EventQueue() = default;

  explicit EventQueue(const EventSchedule& schedule) {
    for (const auto& e : schedule.events) insert(e);
  }

  void insert(const Event& e) {
    if (!std::isfinite(e.time) || e.time < 0.0) {
      throw InvalidInput("event time must be finite and >= 0");
    }
    if (e.time < clock_) {
      throw CausalityViolation("event at t=" + std::to_string(e.time) +
                               " inserted after clock reached t=" + std::to_string(clock_));
    }
    next_seq_ = std::max(next_seq_, e.seq + 1);
    heap_.push(e);
  }

  // Inserts with the next free sequence number.
  Event schedule(double time, AgentId node, EventKind kind, std::int64_t ref = kNoRef) {
    Event e{time, next_seq_, node, kind, ref};
    insert(e);
    return e;
  }

  // nullopt signals end of simulation.
  std::optional<Event> pop_next() {
    if (heap_.empty()) return std::nullopt;
    Event e = heap_.top();
    heap_.pop();
    clock_ = e.time;
    return e;
  }

  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  double clock() const noexcept { return clock_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept { return event_before(b, a); }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  double clock_ = 0.0;
  std::uint64_t next_seq_ = 0;
};

struct TimedArrival {
  double time = 0.0;
  std::size_t message = 0;
};

struct ArrivalGroup {
  double time = 0.0;  // latest arrival in the group
  std::vector<std::size_t> messages;
};

// Greedy left-to-right grouping: a group opens at the first ungrouped arrival
// t0 and absorbs every arrival with time <= t0 + window.
inline std::vector<ArrivalGroup> group_superposition(std::span<const TimedArrival> arrivals,
                                                     double window) {
  if (window < 0.0) throw InvalidInput("superposition window must be >= 0");
  std::vector<ArrivalGroup> groups;
  std::size_t k = 0;
  while (k < arrivals.size()) {
    const double start = arrivals[k].time;
    ArrivalGroup g;
    while (k < arrivals.size() && arrivals[k].time <= start + window) {
      if (k > 0 && arrivals[k].time < arrivals[k - 1].time) {
        throw InvalidInput("arrivals must be sorted by time");
      }
      g.time = arrivals[k].time;
      g.messages.push_back(arrivals[k].message);
      ++k;
    }
    if (g.messages.empty()) {
      throw InvalidInput("arrivals must be sorted by time");
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

// Line format: `seq time node kind [ref]`, header lines start with '#'.
inline void dump_schedule(std::ostream& os, const EventSchedule& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", s.horizon);
  os << "# horizon " << buf;
  std::snprintf(buf, sizeof buf, "%.17g", s.period);
  os << " period " << buf << '\n';
  for (const auto& e : s.events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    os << e.seq << ' ' << buf << ' ' << e.node << ' ' << to_string(e.kind);
    if (e.ref != kNoRef) os << ' ' << e.ref;
    os << '\n';
  }
}

inline EventSchedule load_schedule(std::istream& is) {
  EventSchedule s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash;
      while (ls >> key) {
        if (key == "horizon") ls >> s.horizon;
        else if (key == "period") ls >> s.period;
      }
      continue;
    }
    Event e;
    std::string kind;
    if (!(ls >> e.seq >> e.time >> e.node >> kind)) {
      throw InvalidInput("schedule line " + std::to_string(lineno) + ": malformed");
    }
    e.kind = event_kind_from_string(kind);
    if (!(ls >> e.ref)) e.ref = kNoRef;
    s.events.push_back(e);
  }
  return s;
}

}  // namespace draco
