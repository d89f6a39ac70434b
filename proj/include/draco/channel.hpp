#pragma once

// Wireless geometry, fading, SINR, per-message delay and delivery decisions,
// plus topology and reception-weight construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"
#include "draco/events.hpp"

namespace draco {

inline constexpr double kLightspeed = 2.99792458e8;  // m/s

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Geometry {
  std::vector<Point> positions;
  double field_radius = 500.0;
  double interference_radius = 50.0;
};

// Uniform in the disk: polar draw with sqrt(u) radial law.
inline Geometry place_nodes(std::size_t n, double radius, Rng& rng,
                            double interference_fraction = 0.1) {
  if (n == 0) throw InvalidInput("place_nodes needs N >= 1");
  if (!(radius > 0.0)) throw InvalidInput("field radius must be > 0");
  Geometry g;
  g.field_radius = radius;
  g.interference_radius = interference_fraction * radius;
  g.positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = radius * std::sqrt(uniform01(rng));
    const double theta = 2.0 * M_PI * uniform01(rng);
    g.positions.push_back({r * std::cos(theta), r * std::sin(theta)});
  }
  return g;
}

inline void dump_geometry_csv(std::ostream& os, const Geometry& g) {
  char buf[96];
  os << "node,x,y\n";
  for (std::size_t i = 0; i < g.positions.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, g.positions[i].x, g.positions[i].y);
    os << buf;
  }
}

struct ChannelParams {
  std::vector<double> tx_power_mw;  // per agent
  double path_loss_exponent = 4.0;
  double bandwidth_hz = 1e7;
  double noise_density_dbm_hz = -174.0;
  double message_bytes = 596776.0;
  double gamma_max = 10.0;  // seconds
  double lightspeed = kLightspeed;

  // z^2 = N0 * W in mW.
  double noise_power_mw() const { return dbm_to_mw(noise_density_dbm_hz) * bandwidth_hz; }

  static ChannelParams uniform(std::size_t n, double tx_power_dbm = 30.0) {
    ChannelParams p;
    p.tx_power_mw.assign(n, dbm_to_mw(tx_power_dbm));
    return p;
  }
};

struct Interferer {
  AgentId node = 0;
  double fading = 1.0;
};

// SINR_{i,j} = P_i h_ji d(j,i)^-a / (sum_n P_n h_jn d(j,n)^-a + z^2), linear mW.
inline double sinr(AgentId sender, AgentId receiver, const Geometry& geo,
                   const ChannelParams& params, double fading,
                   std::span<const Interferer> interferers) {
  if (fading < 0.0) throw InvalidInput("fading gain must be >= 0");
  const auto& pos = geo.positions;
  if (sender >= pos.size() || receiver >= pos.size()) throw InvalidInput("node id out of range");
  const double dij = distance(pos[receiver], pos[sender]);
  if (!(dij > 0.0)) {
    throw InvalidGeometry("sender " + std::to_string(sender) + " and receiver " +
                          std::to_string(receiver) + " coincide");
  }
  const double a = params.path_loss_exponent;
  const double signal = params.tx_power_mw.at(sender) * fading * std::pow(dij, -a);
  double interference = 0.0;
  for (const auto& n : interferers) {
    const double djn = distance(pos[receiver], pos.at(n.node));
    if (!(djn > 0.0)) {
      throw InvalidGeometry("interferer " + std::to_string(n.node) + " coincides with receiver");
    }
    interference += params.tx_power_mw.at(n.node) * n.fading * std::pow(djn, -a);
  }
  return signal / (interference + params.noise_power_mw());
}

// Gamma_ij = 8 * bytes / (W log2(1 + SINR)) + distance / c. SINR = 0 gives +inf.
inline double transmission_delay(double message_bytes, double bandwidth_hz, double sinr_value,
                                 double dist, double lightspeed = kLightspeed) {
  if (!(bandwidth_hz > 0.0)) throw InvalidInput("bandwidth must be > 0");
  if (sinr_value < 0.0) throw InvalidInput("SINR must be >= 0");
  const double rate = bandwidth_hz * std::log2(1.0 + sinr_value);
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return 8.0 * message_bytes / rate + dist / lightspeed;
}

struct Delivery {
  bool delivered = false;
  double at = std::numeric_limits<double>::infinity();
};

// Deliver iff gamma < gamma_max (strict).
inline Delivery delivery(double send_time, double gamma, double gamma_max) {
  if (gamma < gamma_max) return {true, send_time + gamma};
  return {};
}

enum class TopologyKind { Cycle, Complete, Geometric };

inline const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::Cycle: return "cycle";
    case TopologyKind::Complete: return "complete";
    case TopologyKind::Geometric: return "geometric";
  }
  return "unknown";
}

struct Topology {
  TopologyKind kind = TopologyKind::Complete;
  std::vector<std::vector<AgentId>> out;  // sorted, no self-loops

  std::size_t size() const noexcept { return out.size(); }
  std::size_t edge_count() const {
    std::size_t e = 0;
    for (const auto& n : out) e += n.size();
    return e;
  }
  bool has_edge(AgentId from, AgentId to) const {
    const auto& n = out.at(from);
    return std::binary_search(n.begin(), n.end(), to);
  }
};

// Median of exp(1) fading, used for the expected-feasibility edge rule.
inline constexpr double kMedianFading = 0.69314718055994530942;

inline bool link_feasible_in_expectation(AgentId i, AgentId j, const Geometry& geo,
                                         const ChannelParams& params) {
  const double s = sinr(i, j, geo, params, kMedianFading, {});
  const double g = transmission_delay(params.message_bytes, params.bandwidth_hz, s,
                                      distance(geo.positions[i], geo.positions[j]),
                                      params.lightspeed);
  return g < params.gamma_max;
}

inline Topology build_topology(TopologyKind kind, std::size_t n, const Geometry* geo = nullptr,
                               const ChannelParams* params = nullptr) {
  if (n == 0) throw InvalidInput("topology needs N >= 1");
  Topology t;
  t.kind = kind;
  t.out.resize(n);
  for (AgentId i = 0; i < n; ++i) {
    auto& nb = t.out[i];
    switch (kind) {
      case TopologyKind::Cycle:
        if (n > 1) {
          nb.push_back((i + 1) % n);
          nb.push_back((i + n - 1) % n);
        }
        break;
      case TopologyKind::Complete:
        for (AgentId j = 0; j < n; ++j) {
          if (j != i) nb.push_back(j);
        }
        break;
      case TopologyKind::Geometric:
        if (!geo || !params) throw InvalidInput("geometric topology needs geometry and channel");
        for (AgentId j = 0; j < n; ++j) {
          if (j != i && link_feasible_in_expectation(i, j, *geo, *params)) nb.push_back(j);
        }
        break;
    }
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return t;
}

// Receiver-side weights for one aggregation: uniform 1/|distinct senders| per
// sender, split equally across that sender's updates in the group. One entry
// per update, in input order.
struct WeightRow {
  std::vector<AgentId> senders;
  std::vector<double> weights;

  double sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
  double sum_sq() const {
    double s = 0.0;
    for (double w : weights) s += w * w;
    return s;
  }
};

// nullopt for an empty group (no-op).
inline std::optional<WeightRow> reception_weights(std::span<const AgentId> update_senders) {
  if (update_senders.empty()) return std::nullopt;
  std::map<AgentId, std::size_t> per_sender;
  for (auto s : update_senders) ++per_sender[s];
  const double share = 1.0 / static_cast<double>(per_sender.size());
  WeightRow row;
  row.senders.assign(update_senders.begin(), update_senders.end());
  row.weights.reserve(update_senders.size());
  for (auto s : update_senders) {
    row.weights.push_back(share / static_cast<double>(per_sender[s]));
  }
  return row;
}

enum class ChannelMode { Sinr, Ideal };

inline const char* to_string(ChannelMode m) { return m == ChannelMode::Sinr ? "sinr" : "ideal"; }

struct LinkOutcome {
  AgentId receiver = 0;
  double sinr = 0.0;
  double gamma = 0.0;
  Delivery delivery;
};

// Runtime channel state. Interferers for link i->j are other nodes whose
// transmission is still on air at the send time and that lie within the
// interference radius of j. Fading is redrawn i.i.d. exp(1) per link and
// per transmission.
class ChannelModel {
 public:
  ChannelModel(ChannelMode mode, Geometry geometry, ChannelParams params, double ideal_delay)
      : mode_(mode), geo_(std::move(geometry)), params_(std::move(params)),
        ideal_delay_(ideal_delay) {
    if (mode_ == ChannelMode::Sinr && params_.tx_power_mw.size() != geo_.positions.size()) {
      throw InvalidInput("one transmit power per node required");
    }
    if (ideal_delay_ < 0.0) throw InvalidInput("ideal delay must be >= 0");
  }

  ChannelMode mode() const noexcept { return mode_; }
  const Geometry& geometry() const noexcept { return geo_; }
  const ChannelParams& params() const noexcept { return params_; }

  std::vector<LinkOutcome> transmit(AgentId sender, double now,
                                    std::span<const AgentId> receivers, Rng& fading_rng) {
    std::vector<LinkOutcome> out;
    out.reserve(receivers.size());
    if (mode_ == ChannelMode::Ideal) {
      for (auto j : receivers) {
        out.push_back({j, std::numeric_limits<double>::infinity(), ideal_delay_,
                       Delivery{true, now + ideal_delay_}});
      }
      return out;
    }
    prune(now);
    double airtime = 0.0;
    std::vector<Interferer> phi;
    for (auto j : receivers) {
      phi.clear();
      for (const auto& tx : active_) {
        if (tx.node == sender || tx.node == j) continue;
        if (distance(geo_.positions[j], geo_.positions[tx.node]) < geo_.interference_radius) {
          phi.push_back({tx.node, sample_exponential(1.0, fading_rng)});
        }
      }
      const double h = sample_exponential(1.0, fading_rng);
      const double s = sinr(sender, j, geo_, params_, h, phi);
      const double g = transmission_delay(params_.message_bytes, params_.bandwidth_hz, s,
                                          distance(geo_.positions[sender], geo_.positions[j]),
                                          params_.lightspeed);
      out.push_back({j, s, g, delivery(now, g, params_.gamma_max)});
      if (std::isfinite(g)) airtime = std::max(airtime, std::min(g, params_.gamma_max));
    }
    if (airtime > 0.0) active_.push_back({sender, now + airtime});
    return out;
  }

 private:
  struct OnAir {
    AgentId node;
    double until;
  };

  void prune(double now) {
    std::erase_if(active_, [now](const OnAir& a) { return a.until <= now; });
  }

  ChannelMode mode_;
  Geometry geo_;
  ChannelParams params_;
  double ideal_delay_;
  std::vector<OnAir> active_;
};

}  // namespace draco
