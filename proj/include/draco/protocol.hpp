#pragma once

// The agent state machine and the single-threaded replay loop: compute,
// transmit-with-backlog, windowed receive-aggregate under the per-period
// message budget, and periodic unification from a rotating hub.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "draco/channel.hpp"
#include "draco/core/error.hpp"
#include "draco/core/rng.hpp"
#include "draco/core/vec.hpp"
#include "draco/events.hpp"
#include "draco/metrics.hpp"
#include "draco/problem.hpp"

namespace draco {

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::SyntheticQuadratic;
  double noise = 0.0;  // injected gradient noise std per coordinate
  // quadratic: c_i = center_mean * 1 + center_spread * N(0, I)
  double center_mean = 1.0;
  double center_spread = 1.0;
  // logistic / mlp
  std::size_t features = 8;
  std::size_t hidden = 4;
  std::size_t samples = 1000;
  std::size_t batch = 64;
  double l2 = 1e-3;
  double separation = 1.0;
  double heterogeneity = 0.5;
  // x0 = x0_value * 1 + x0_noise * N(0, I)
  double x0_value = 0.0;
  double x0_noise = 0.0;

  friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&) = default;
};

struct ChannelSpec {
  ChannelMode mode = ChannelMode::Sinr;
  double field_radius = 500.0;
  double tx_power_dbm = 30.0;
  double path_loss_exponent = 4.0;
  double bandwidth_hz = 1e7;
  double noise_density_dbm_hz = -174.0;
  double message_bytes = 0.0;  // 0: raw model size, 8 bytes per parameter
  double gamma_max = 10.0;
  double interference_fraction = 0.1;
  double ideal_delay = 0.01;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

struct SimulationConfig {
  std::size_t N = 25;
  std::size_t d = 10;  // quadratic dimension; logistic uses features, mlp derives it
  std::size_t B = 5;
  double gamma = 0.01;
  double T = 2000.0;
  double P = 100.0;
  std::size_t Psi = 10;
  double epsilon = 1e-3;
  std::uint64_t seed = 1;
  double lambda_compute = 0.1;
  double lambda_transmit = 0.1;
  TopologyKind topology = TopologyKind::Complete;
  std::uint64_t sampling_interval = 500;
  bool record_receptions = true;
  ObjectiveSpec objective;
  ChannelSpec channel;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

inline std::size_t model_dimension(const SimulationConfig& c) {
  switch (c.objective.kind) {
    case ObjectiveKind::SyntheticQuadratic: return c.d;
    case ObjectiveKind::LogisticRegression: return c.objective.features;
    case ObjectiveKind::TinyMLP:
      return c.objective.hidden * c.objective.features + 2 * c.objective.hidden + 1;
  }
  return c.d;
}

// Throws InvalidInput on a hard violation; returns warnings otherwise.
inline std::vector<std::string> validate(const SimulationConfig& c) {
  auto fail = [](const std::string& m) { throw InvalidInput(m); };
  if (c.N < 1) fail("N must be >= 1");
  if (model_dimension(c) < 1) fail("model dimension must be >= 1");
  if (c.B < 1) fail("B must be >= 1");
  if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) fail("gamma must be > 0");
  if (!(c.P > 0.0) || !(c.T >= c.P) || !std::isfinite(c.T)) fail("need 0 < P <= T");
  if (c.Psi < 1) fail("Psi must be >= 1");
  if (!(c.epsilon >= 0.0)) fail("epsilon must be >= 0");
  if (!(c.lambda_compute > 0.0) || !(c.lambda_transmit > 0.0)) fail("event rates must be > 0");
  if (c.sampling_interval < 1) fail("sampling interval must be >= 1");
  if (!(c.objective.noise >= 0.0)) fail("gradient noise must be >= 0");
  if (c.objective.kind != ObjectiveKind::SyntheticQuadratic &&
      (c.objective.samples < 1 || c.objective.features < 1)) {
    fail("samples and features must be >= 1");
  }
  if (c.objective.kind == ObjectiveKind::TinyMLP && c.objective.hidden < 1) fail("hidden must be >= 1");
  const auto& ch = c.channel;
  if (!(ch.field_radius > 0.0)) fail("field radius must be > 0");
  if (!(ch.bandwidth_hz > 0.0)) fail("bandwidth must be > 0");
  if (!(ch.path_loss_exponent > 0.0)) fail("path-loss exponent must be > 0");
  if (!(ch.message_bytes >= 0.0)) fail("message size must be >= 0");
  if (!(ch.gamma_max >= 0.0)) fail("gamma_max must be >= 0");
  if (!(ch.interference_fraction >= 0.0)) fail("interference fraction must be >= 0");
  if (!(ch.ideal_delay >= 0.0)) fail("ideal delay must be >= 0");

  std::vector<std::string> warnings;
  std::optional<double> L;
  if (c.objective.kind == ObjectiveKind::SyntheticQuadratic) L = 1.0;
  if (L) {
    const double limit = max_theorem_step(static_cast<double>(c.B), *L, static_cast<double>(c.N),
                                          static_cast<double>(c.Psi));
    if (c.gamma > limit) {
      warnings.push_back("gamma=" + format_double(c.gamma) +
                         " exceeds the convergence-bound step condition 1/(8BLNPsi)=" +
                         format_double(limit));
    }
  }
  if (c.objective.kind == ObjectiveKind::TinyMLP && c.objective.x0_noise == 0.0 &&
      c.objective.x0_value == 0.0) {
    warnings.push_back("mlp started at x0 = 0 is a stationary point; set objective.x0_noise");
  }
  if (c.N <= 4) warnings.push_back("convergence bound requires N > 4");
  if (c.Psi < 3) warnings.push_back("convergence bound requires Psi >= 3");
  return warnings;
}

inline Objective build_objective(const SimulationConfig& c) {
  Rng rng = make_stream(c.seed, Stream::ObjectiveData, 0);
  const auto& o = c.objective;
  if (o.kind == ObjectiveKind::SyntheticQuadratic) {
    std::vector<Vec> centers(c.N, Vec(c.d));
    for (auto& ci : centers) {
      for (double& v : ci) v = o.center_mean + o.center_spread * standard_normal(rng);
    }
    return Objective::quadratic(std::move(centers), o.noise);
  }
  auto data = make_blob_datasets(c.N, o.samples, o.features, o.separation, o.heterogeneity, rng);
  if (o.kind == ObjectiveKind::LogisticRegression) {
    return Objective::logistic(std::move(data), o.noise, o.batch, o.l2);
  }
  return Objective::mlp(std::move(data), o.hidden, o.noise, o.batch, o.l2);
}

inline Vec initial_model(const SimulationConfig& c) {
  Vec x(model_dimension(c), c.objective.x0_value);
  if (c.objective.x0_noise > 0.0) {
    Rng rng = make_stream(c.seed, Stream::InitialModel, 0);
    for (double& v : x) v += c.objective.x0_noise * standard_normal(rng);
  }
  return x;
}

inline ChannelParams build_channel_params(const SimulationConfig& c) {
  ChannelParams p = ChannelParams::uniform(c.N, c.channel.tx_power_dbm);
  p.path_loss_exponent = c.channel.path_loss_exponent;
  p.bandwidth_hz = c.channel.bandwidth_hz;
  p.noise_density_dbm_hz = c.channel.noise_density_dbm_hz;
  p.message_bytes = c.channel.message_bytes > 0.0
                        ? c.channel.message_bytes
                        : 8.0 * static_cast<double>(model_dimension(c));
  p.gamma_max = c.channel.gamma_max;
  return p;
}

inline Geometry build_geometry(const SimulationConfig& c) {
  Rng rng = make_stream(c.seed, Stream::Placement, 0);
  return place_nodes(c.N, c.channel.field_radius, rng, c.channel.interference_fraction);
}

struct AgentState {
  AgentId id = 0;
  Vec x;
  std::vector<LocalUpdate> backlog;
  std::size_t psi_counter = 0;
  double rate = 0.0;
  Rng gradient_rng;
  Rng fading_rng;
};

struct Message {
  AgentId sender = 0;
  AgentId receiver = 0;
  double sent_at = 0.0;
  double arrives_at = 0.0;
  std::shared_ptr<const std::vector<LocalUpdate>> payload;
};

struct ReceptionRecord {
  double time = 0.0;        // latest arrival in the group
  double applied_at = 0.0;  // window close
  AgentId receiver = 0;
  std::uint64_t period = 0;  // index m of window [mP, (m+1)P)
  std::size_t offered = 0;   // messages in the group
  std::size_t accepted = 0;  // messages applied
  std::vector<AgentId> senders;  // per applied update
  std::vector<double> weights;   // per applied update
  std::vector<double> sent_at;   // per applied message
};

struct UnificationRecord {
  double time = 0.0;
  AgentId hub = 0;
  std::uint64_t period = 0;
  double consensus_distance = 0.0;
  bool bitwise_identical = false;
};

struct RunResult {
  std::vector<TraceRecord> records;
  std::vector<UnificationRecord> unifications;
  std::vector<ReceptionRecord> receptions;
  std::vector<Vec> final_models;
  std::vector<std::uint64_t> compute_counts;
  std::vector<Vec> last_delta;  // empty if the agent never computed
  std::vector<std::size_t> max_psi;  // max accepted messages in any period, per agent
  MessageCounters counters;
  double rho = 0.0;  // max over groups of sqrt(sum q^2)
  std::uint64_t events_executed = 0;
  std::vector<std::string> warnings;
};

class Simulator {
 public:
  Simulator(SimulationConfig config, Objective objective, Vec x0, ChannelModel channel,
            Topology topology)
      : cfg_(std::move(config)), obj_(std::move(objective)), channel_(std::move(channel)),
        topo_(std::move(topology)), sampler_(cfg_.sampling_interval) {
    warnings_ = validate(cfg_);
    if (obj_.num_agents() != cfg_.N || topo_.size() != cfg_.N) {
      throw InvalidInput("objective, topology and config disagree on N");
    }
    if (x0.size() != obj_.dimension()) throw InvalidInput("x0 dimension mismatch");
    agents_.resize(cfg_.N);
    for (AgentId i = 0; i < cfg_.N; ++i) {
      auto& a = agents_[i];
      a.id = i;
      a.x = x0;
      a.rate = cfg_.lambda_compute;
      a.gradient_rng = make_stream(cfg_.seed, Stream::Gradient, i);
      a.fading_rng = make_stream(cfg_.seed, Stream::Fading, i);
    }
    windows_.resize(cfg_.N);
    max_psi_.assign(cfg_.N, 0);
    compute_counts_.assign(cfg_.N, 0);
    last_delta_.assign(cfg_.N, Vec{});
  }

  static Simulator from_config(const SimulationConfig& c) {
    validate(c);
    auto obj = build_objective(c);
    auto geo = build_geometry(c);
    auto params = build_channel_params(c);
    auto topo = build_topology(c.topology, c.N, &geo, &params);
    ChannelModel ch(c.channel.mode, std::move(geo), std::move(params), c.channel.ideal_delay);
    return Simulator(c, std::move(obj), initial_model(c), std::move(ch), std::move(topo));
  }

  const SimulationConfig& config() const noexcept { return cfg_; }
  const Objective& objective() const noexcept { return obj_; }
  const Topology& topology() const noexcept { return topo_; }
  const ChannelModel& channel() const noexcept { return channel_; }
  const std::vector<AgentState>& agents() const noexcept { return agents_; }
  std::vector<AgentState>& agents() noexcept { return agents_; }
  const std::vector<Message>& messages() const noexcept { return messages_; }
  const MessageCounters& counters() const noexcept { return counters_; }
  EventQueue& queue() noexcept { return queue_; }

  std::vector<Vec> models() const {
    std::vector<Vec> out;
    out.reserve(agents_.size());
    for (const auto& a : agents_) out.push_back(a.x);
    return out;
  }

  // Delta from the current reference model goes to the backlog; x is unchanged.
  void on_compute(AgentId i, double t) {
    auto& a = agents_.at(i);
    LocalUpdate u = local_batch_train(obj_, i, a.x, cfg_.B, cfg_.gamma, a.gradient_rng, t);
    last_delta_[i] = u.delta;
    ++compute_counts_[i];
    a.backlog.push_back(std::move(u));
  }

  // Broadcasts the whole backlog to the out-neighbours and clears it whatever
  // the per-link outcome. Returns the Arrival events that were scheduled.
  std::vector<Event> on_transmit(AgentId i, double t) {
    auto& a = agents_.at(i);
    std::vector<Event> scheduled;
    if (a.backlog.empty()) return scheduled;
    auto payload = std::make_shared<const std::vector<LocalUpdate>>(std::move(a.backlog));
    a.backlog.clear();
    const auto& receivers = topo_.out[i];
    for (const auto& link : channel_.transmit(i, t, receivers, a.fading_rng)) {
      ++counters_.sent;
      if (!link.delivery.delivered) {
        ++counters_.dropped_deadline;
        continue;
      }
      ++counters_.delivered;
      if (link.delivery.at > cfg_.T) {
        ++counters_.in_flight;
        continue;
      }
      messages_.push_back({i, link.receiver, t, link.delivery.at, payload});
      scheduled.push_back(queue_.schedule(link.delivery.at, link.receiver, EventKind::Arrival,
                                          static_cast<std::int64_t>(messages_.size() - 1)));
    }
    return scheduled;
  }

  // First arrival at an idle receiver opens a superposition window that closes
  // at min(t + epsilon, T); later arrivals before the close join it.
  void on_arrival(AgentId j, std::size_t message, double t) {
    auto& w = windows_.at(j);
    if (!w) {
      w.emplace();
      queue_.schedule(std::min(t + cfg_.epsilon, cfg_.T), j, EventKind::ReceiveGroup);
    }
    w->push_back(message);
  }

  // Window close: aggregate the buffered group.
  void on_receive_group(AgentId j, double t) {
    auto& w = windows_.at(j);
    if (!w) return;
    std::vector<std::size_t> group = std::move(*w);
    w.reset();
    apply_group(j, group, t);
  }

  // Registers a message without going through the channel; returns its index.
  std::size_t inject_message(Message m) {
    messages_.push_back(std::move(m));
    return messages_.size() - 1;
  }

  // Accepts the earliest messages up to the remaining budget, then
  // x_j += sum_k q_k * delta_k with receiver-side uniform weights.
  void apply_group(AgentId j, std::span<const std::size_t> group, double t) {
    auto& a = agents_.at(j);
    ReceptionRecord rec;
    rec.receiver = j;
    rec.applied_at = t;
    rec.period = period_;
    rec.offered = group.size();
    for (auto m : group) rec.time = std::max(rec.time, messages_.at(m).arrives_at);
    const std::size_t room = cfg_.Psi - a.psi_counter;
    const std::size_t take = std::min(room, group.size());
    counters_.dropped_psi += group.size() - take;
    rec.accepted = take;

    std::vector<const LocalUpdate*> updates;
    for (std::size_t k = 0; k < take; ++k) {
      const auto& msg = messages_.at(group[k]);
      rec.sent_at.push_back(msg.sent_at);
      for (const auto& u : *msg.payload) {
        if (u.delta.size() != a.x.size()) {
          throw CorruptMessage("payload from agent " + std::to_string(msg.sender) +
                               " has dimension " + std::to_string(u.delta.size()));
        }
        updates.push_back(&u);
        rec.senders.push_back(msg.sender);
      }
    }
    if (take > 0) {
      auto row = reception_weights(rec.senders);
      for (std::size_t k = 0; k < updates.size(); ++k) vec::axpy(row->weights[k], updates[k]->delta, a.x);
      rho_ = std::max(rho_, std::sqrt(row->sum_sq()));
      rec.weights = std::move(row->weights);
      a.psi_counter += take;
      counters_.accepted += take;
      max_psi_[j] = std::max(max_psi_[j], a.psi_counter);
    }
    if (cfg_.record_receptions) receptions_.push_back(std::move(rec));
  }

  // Every other agent copies the hub's model over a reliable control channel;
  // budgets reset for the new period window.
  void on_unification(AgentId hub, double t) {
    const Vec hub_model = agents_.at(hub).x;
    for (auto& a : agents_) {
      if (a.id != hub) a.x = hub_model;
      a.psi_counter = 0;
    }
    ++period_;
    UnificationRecord u;
    u.time = t;
    u.hub = hub;
    u.period = period_;
    const auto states = models();
    u.consensus_distance = consensus_distance(states);
    u.bitwise_identical = std::all_of(states.begin(), states.end(),
                                      [&](const Vec& x) { return x == hub_model; });
    unifications_.push_back(u);
  }

  RunResult run() {
    std::vector<double> crates(cfg_.N, cfg_.lambda_compute);
    std::vector<double> trates(cfg_.N, cfg_.lambda_transmit);
    const auto schedule = generate_schedule(crates, trates, cfg_.T, cfg_.P, cfg_.seed);
    for (const auto& e : schedule.events) queue_.insert(e);

    RunResult result;
    result.records.push_back(make_record(obj_, models(), 0.0, 0, counters_));
    std::uint64_t executed = 0;
    while (auto e = queue_.pop_next()) {
      try {
        dispatch(*e);
      } catch (const Error& err) {
        throw Error(err.category(), "event seq=" + std::to_string(e->seq) +
                                        " t=" + format_double(e->time) +
                                        " node=" + std::to_string(e->node) + " (" +
                                        to_string(e->kind) + "): " + err.what());
      }
      ++executed;
      if (sampler_.due(executed)) {
        result.records.push_back(make_record(obj_, models(), e->time, executed, counters_));
      }
    }
    if (result.records.back().events_executed == executed && executed > 0) {
      result.records.back().time = cfg_.T;
    } else {
      result.records.push_back(make_record(obj_, models(), cfg_.T, executed, counters_));
    }
    result.unifications = std::move(unifications_);
    result.receptions = std::move(receptions_);
    result.final_models = models();
    result.compute_counts = compute_counts_;
    result.last_delta = last_delta_;
    result.max_psi = max_psi_;
    result.counters = counters_;
    result.rho = rho_;
    result.events_executed = executed;
    result.warnings = warnings_;
    return result;
  }

 private:
  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::Compute: on_compute(e.node, e.time); break;
      case EventKind::Transmit: on_transmit(e.node, e.time); break;
      case EventKind::Arrival: on_arrival(e.node, static_cast<std::size_t>(e.ref), e.time); break;
      case EventKind::ReceiveGroup: on_receive_group(e.node, e.time); break;
      case EventKind::Unification: on_unification(static_cast<AgentId>(e.ref), e.time); break;
    }
  }

  SimulationConfig cfg_;
  Objective obj_;
  ChannelModel channel_;
  Topology topo_;
  TraceSampler sampler_;
  EventQueue queue_;
  std::vector<AgentState> agents_;
  std::vector<std::optional<std::vector<std::size_t>>> windows_;
  std::vector<Message> messages_;
  std::vector<ReceptionRecord> receptions_;
  std::vector<UnificationRecord> unifications_;
  std::vector<std::size_t> max_psi_;
  std::vector<std::uint64_t> compute_counts_;
  std::vector<Vec> last_delta_;
  std::vector<std::string> warnings_;
  MessageCounters counters_;
  double rho_ = 0.0;
  std::uint64_t period_ = 0;
};

inline RunResult run(const SimulationConfig& c) { return Simulator::from_config(c).run(); }

// Metropolis weights 1 / (1 + max(deg_i, deg_j)) on the undirected closure of
// the topology; equal to uniform 1 / (deg + 1) on regular graphs.
inline std::vector<std::vector<std::pair<AgentId, double>>> symmetric_mixing(const Topology& t) {
  const auto n = t.size();
  std::vector<std::vector<AgentId>> und(n);
  for (AgentId i = 0; i < n; ++i) {
    for (auto j : t.out[i]) {
      und[i].push_back(j);
      und[j].push_back(i);
    }
  }
  for (auto& nb : und) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  std::vector<std::vector<std::pair<AgentId, double>>> w(n);
  for (AgentId i = 0; i < n; ++i) {
    double self = 1.0;
    for (auto j : und[i]) {
      const double wij = 1.0 / (1.0 + static_cast<double>(std::max(und[i].size(), und[j].size())));
      w[i].push_back({j, wij});
      self -= wij;
    }
    w[i].push_back({i, self});
    std::sort(w[i].begin(), w[i].end());
  }
  return w;
}

// Synchronous stand-in for comparison: floor(lambda_compute * T) rounds, each
// all agents train B batches then average with symmetric neighbour weights.
// Each round counts N events for sampling purposes.
inline RunResult run_sync_baseline(const SimulationConfig& c) {
  auto warnings = validate(c);
  const auto obj = build_objective(c);
  const auto geo = build_geometry(c);
  const auto params = build_channel_params(c);
  const auto topo = build_topology(c.topology, c.N, &geo, &params);
  const auto mixing = symmetric_mixing(topo);
  const auto rounds =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(c.lambda_compute * c.T)));
  const double tick = c.T / static_cast<double>(rounds);

  std::vector<Vec> x(c.N, initial_model(c));
  std::vector<Rng> rngs;
  for (AgentId i = 0; i < c.N; ++i) rngs.push_back(make_stream(c.seed, Stream::Gradient, i));

  RunResult result;
  result.warnings = std::move(warnings);
  result.compute_counts.assign(c.N, 0);
  result.last_delta.assign(c.N, Vec{});
  result.max_psi.assign(c.N, 0);
  result.records.push_back(make_record(obj, x, 0.0, 0, result.counters));
  std::uint64_t executed = 0;
  for (std::uint64_t r = 1; r <= rounds; ++r) {
    std::vector<Vec> y(c.N);
    for (AgentId i = 0; i < c.N; ++i) {
      auto u = local_batch_train(obj, i, x[i], c.B, c.gamma, rngs[i], static_cast<double>(r) * tick);
      y[i] = x[i];
      vec::axpy(1.0, u.delta, y[i]);
      result.last_delta[i] = std::move(u.delta);
      ++result.compute_counts[i];
    }
    for (AgentId i = 0; i < c.N; ++i) {
      Vec mixed(obj.dimension(), 0.0);
      for (const auto& [j, w] : mixing[i]) vec::axpy(w, y[j], mixed);
      x[i] = std::move(mixed);
      result.counters.sent += mixing[i].size() - 1;
      result.counters.delivered += mixing[i].size() - 1;
      result.counters.accepted += mixing[i].size() - 1;
    }
    const auto before = executed;
    executed += c.N;
    if (r == rounds) break;
    if (before / c.sampling_interval != executed / c.sampling_interval) {
      result.records.push_back(make_record(obj, x, static_cast<double>(r) * tick, executed, result.counters));
    }
  }
  result.records.push_back(make_record(obj, x, c.T, executed, result.counters));
  result.final_models = std::move(x);
  result.events_executed = executed;
  return result;
}

}  // namespace draco
