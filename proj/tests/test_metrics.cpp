#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "draco/metrics.hpp"

using namespace draco;

TEST(VirtualGlobal, Mean) {
  const std::vector<Vec> xs{{1.0, 2.0}, {3.0, -2.0}, {2.0, 3.0}};
  const auto bar = virtual_global(xs);
  EXPECT_NEAR(bar[0], 2.0, 1e-15);
  EXPECT_NEAR(bar[1], 1.0, 1e-15);
}

TEST(Consensus, SmallCases) {
  const std::vector<Vec> same(5, Vec{0.1, 0.7, -3.3});
  EXPECT_EQ(consensus_distance(same), 0.0);
  const std::vector<Vec> two{{0.0}, {2.0}};
  EXPECT_EQ(consensus_distance(two), 1.0);
}

TEST(Consensus, MatchesTwoPassVariance) {
  Rng rng(12);
  std::vector<Vec> xs(17, Vec(6));
  for (auto& x : xs) {
    for (auto& v : x) v = 5.0 * standard_normal(rng) + 3.0;
  }
  // per coordinate: mean, then mean squared deviation, summed over coordinates
  double oracle = 0.0;
  for (std::size_t k = 0; k < 6; ++k) {
    double m = 0.0;
    for (const auto& x : xs) m += x[k];
    m /= 17.0;
    double v = 0.0;
    for (const auto& x : xs) v += (x[k] - m) * (x[k] - m);
    oracle += v / 17.0;
  }
  EXPECT_NEAR(consensus_distance(xs), oracle, 1e-12);
}

TEST(Record, QuadraticClosedForms) {
  const std::vector<Vec> centers{{1.0, 0.0}, {-1.0, 2.0}, {3.0, 1.0}};
  const auto obj = Objective::quadratic(centers, 0.0);
  const std::vector<Vec> xs{{0.0, 0.0}, {1.0, 1.0}, {2.0, -1.0}};
  const auto r = make_record(obj, xs, 4.5, 12, MessageCounters{});
  // xbar = (1, 0), cbar = (1, 1)
  EXPECT_NEAR(r.grad_norm_sq, 1.0, 1e-15);
  // mean local gradient = xbar - cbar as well
  EXPECT_NEAR(r.mean_local_grad_norm_sq, 1.0, 1e-15);
  EXPECT_EQ(r.time, 4.5);
  EXPECT_EQ(r.events_executed, 12u);
  ASSERT_EQ(r.agent_loss.size(), 3u);
  EXPECT_NEAR(r.agent_loss[1], 0.5 * (4.0 + 1.0), 1e-15);
}

TEST(Sampler, Counts) {
  auto count = [](std::uint64_t events, std::uint64_t interval) {
    TraceSampler s(interval);
    std::size_t records = 1;  // t = 0
    bool last_sampled = false;
    for (std::uint64_t e = 1; e <= events; ++e) {
      last_sampled = s.due(e);
      records += last_sampled;
    }
    return records + (last_sampled ? 0 : 1);
  };
  EXPECT_EQ(count(1000, 500), 3u);
  EXPECT_EQ(count(100, 500), 2u);
  EXPECT_THROW(TraceSampler(0), InvalidInput);
}

namespace {

BoundInputs reference_inputs() {
  BoundInputs in;
  in.F = 3.0;
  in.B = 5.0;
  in.Psi = 10.0;
  in.N = 25.0;
  in.L = 1.0;
  in.zeta = 0.7;
  in.sigma = 0.2;
  in.rho = 0.5;
  in.gamma = max_theorem_step(in.B, in.L, in.N, in.Psi);
  return in;
}

}  // namespace

TEST(Bound, TermWise) {
  const auto in = reference_inputs();
  EXPECT_NEAR(in.gamma, 1e-4, 1e-18);
  const auto r = theorem_bound(in);
  EXPECT_TRUE(r.valid);
  const double g = 1e-4;
  const double expect[6] = {
      128.0 / (11.0 * 5.0 * g * 10.0) * 3.0,
      11136.0 * 0.49 / (11.0 * 21.0),
      252.0 * 0.04 / 11.0,
      2592.0 * 25.0 * 0.49 / 11.0,
      9216.0 * 5.0 * 1.0 * g * g * 0.04,
      64.0 * 1.0 * g * 0.25 * 0.04 / (11.0 * 25.0 * 10.0),
  };
  double total = 0.0;
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(r.terms[k], expect[k], 1e-12 * std::abs(expect[k]) + 1e-300) << "term " << k;
    total += expect[k];
  }
  EXPECT_NEAR(r.value, total, 1e-12 * total);
}

TEST(Bound, MonotoneInPsi) {
  auto in = reference_inputs();
  in.gamma = 1e-5;
  double prev = std::numeric_limits<double>::infinity();
  for (double psi = 1.0; psi <= 64.0; psi += 1.0) {
    in.Psi = psi;
    const double v = theorem_bound(in).value;
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(Bound, Validity) {
  auto in = reference_inputs();
  in.N = 4.0;
  const auto r4 = theorem_bound(in);
  EXPECT_EQ(r4.value, std::numeric_limits<double>::infinity());
  EXPECT_FALSE(r4.valid);
  EXPECT_FALSE(r4.agents_ok);

  in = reference_inputs();
  in.Psi = 2.0;
  EXPECT_FALSE(theorem_bound(in).budget_ok);
  EXPECT_FALSE(theorem_bound(in).valid);

  in = reference_inputs();
  in.gamma *= 1.0001;
  const auto big = theorem_bound(in);
  EXPECT_FALSE(big.step_ok);
  EXPECT_FALSE(big.valid);
  EXPECT_TRUE(std::isfinite(big.value));
}

TEST(TraceCsv, RoundTripExact) {
  std::vector<TraceRecord> recs(2);
  recs[0].time = 0.1;
  recs[0].global_loss = 1.0 / 3.0;
  recs[0].grad_norm_sq = 2e-310;
  recs[0].agent_loss = {0.2, std::nextafter(1.0, 2.0)};
  recs[1].time = 2000.0;
  recs[1].events_executed = 99;
  recs[1].counters = {1, 2, 3, 4, 5, 6};
  recs[1].agent_loss = {-0.0, 1e300};
  std::stringstream ss;
  write_trace_csv(ss, recs);
  const auto text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "time,events_executed,global_loss,grad_norm_sq,mean_local_grad_norm_sq,"
            "consensus_distance,sent,delivered,dropped_deadline,accepted,dropped_psi,in_flight,"
            "loss_0,loss_1");
  const auto back = read_trace_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].global_loss, recs[0].global_loss);
  EXPECT_EQ(back[0].grad_norm_sq, recs[0].grad_norm_sq);
  EXPECT_EQ(back[0].agent_loss, recs[0].agent_loss);
  EXPECT_EQ(back[1].counters, recs[1].counters);
  EXPECT_EQ(back[1].agent_loss[1], 1e300);
  std::stringstream again;
  write_trace_csv(again, back);
  EXPECT_EQ(again.str(), text);
}

TEST(TraceCsv, Malformed) {
  std::stringstream empty;
  EXPECT_THROW(read_trace_csv(empty), IoError);
  std::stringstream bad("header\n1,2,3\n");
  EXPECT_THROW(read_trace_csv(bad), IoError);
}
