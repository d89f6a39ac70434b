#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "draco/events.hpp"

using namespace draco;

TEST(Exponential, InverseCdf) {
  EXPECT_NEAR(exponential_from_uniform(0.1, std::exp(-1.0)), 10.0, 1e-12);
  EXPECT_EQ(exponential_from_uniform(2.0, 1.0), 0.0);
  EXPECT_THROW(exponential_from_uniform(0.0, 0.5), InvalidInput);
  EXPECT_THROW(exponential_from_uniform(1.0, 0.0), InvalidInput);
  Rng rng(1);
  EXPECT_THROW(sample_exponential(-1.0, rng), InvalidInput);
}

TEST(Exponential, EmpiricalMean) {
  Rng rng(2024);
  double s = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double x = sample_exponential(0.1, rng);
    ASSERT_GE(x, 0.0);
    s += x;
  }
  EXPECT_NEAR(s / n, 10.0, 0.2);
}

TEST(PoissonPmf, UnitMean) {
  EXPECT_NEAR(poisson_count_pmf(1.0, 1.0, 0), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(poisson_count_pmf(1.0, 1.0, 1), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(poisson_count_pmf(0.5, 2.0, 0), 0.36787944117144233, 1e-12);
}

TEST(PoissonPmf, Normalization) {
  double s = 0.0;
  for (std::uint64_t m = 0; m <= 100; ++m) s += poisson_count_pmf(0.1, 10.0, m);
  EXPECT_NEAR(s, 1.0, 1e-12);
  // large m stays finite in log space
  const double big = poisson_count_pmf(3.0, 100.0, 300);
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_GT(big, 0.0);
}

TEST(PoissonPmf, MatchesRecurrence) {
  // p(m) = p(m-1) * mu / m
  const double mu = 7.3;
  double p = std::exp(-mu);
  for (std::uint64_t m = 0; m < 40; ++m) {
    if (m > 0) p *= mu / static_cast<double>(m);
    EXPECT_NEAR(poisson_count_pmf(7.3, 1.0, m), p, 1e-13);
  }
}

TEST(Schedule, UnificationsRoundRobin) {
  const std::vector<double> rates{0.1, 0.1};
  const auto s = generate_schedule(rates, rates, 10.0, 5.0, 3);
  std::vector<Event> unif;
  for (const auto& e : s.events) {
    if (e.kind == EventKind::Unification) unif.push_back(e);
  }
  ASSERT_EQ(unif.size(), 2u);
  EXPECT_EQ(unif[0].time, 5.0);
  EXPECT_EQ(unif[0].node, 0u);
  EXPECT_EQ(unif[1].time, 10.0);
  EXPECT_EQ(unif[1].node, 1u);
  EXPECT_EQ(unif[1].ref, 1);
}

TEST(Schedule, UnificationCount) {
  EXPECT_EQ(unification_count(2000.0, 100.0), 20u);
  EXPECT_EQ(unification_count(10.0, 3.0), 3u);
  EXPECT_EQ(unification_count(0.3, 0.1), 2u);  // 3 * 0.1 > 0.3 in floating point
  EXPECT_EQ(hub_for_period(1, 25), 0u);
  EXPECT_EQ(hub_for_period(26, 25), 0u);
  EXPECT_EQ(hub_for_period(27, 25), 1u);
}

TEST(Schedule, SortedAndUnique) {
  const std::vector<double> rates(5, 0.7);
  const auto s = generate_schedule(rates, rates, 50.0, 10.0, 9);
  EXPECT_TRUE(std::is_sorted(s.events.begin(), s.events.end(), event_before));
  std::vector<std::uint64_t> seqs;
  for (const auto& e : s.events) {
    seqs.push_back(e.seq);
    EXPECT_GT(e.time, 0.0);
    EXPECT_LE(e.time, 50.0);
  }
  std::sort(seqs.begin(), seqs.end());
  EXPECT_EQ(std::adjacent_find(seqs.begin(), seqs.end()), seqs.end());
}

TEST(Schedule, ComputeCountMatchesRate) {
  const std::vector<double> rates(25, 0.1);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = generate_schedule(rates, rates, 1000.0, 100.0, seed);
    const auto computes = std::count_if(s.events.begin(), s.events.end(),
                                        [](const Event& e) { return e.kind == EventKind::Compute; });
    EXPECT_NEAR(static_cast<double>(computes), 2500.0, 250.0) << "seed " << seed;
  }
}

TEST(Schedule, Deterministic) {
  const std::vector<double> c{0.3, 0.2, 0.5}, t{0.1, 0.4, 0.2};
  const auto a = generate_schedule(c, t, 100.0, 20.0, 77);
  const auto b = generate_schedule(c, t, 100.0, 20.0, 77);
  EXPECT_EQ(a.events, b.events);
  const auto other = generate_schedule(c, t, 100.0, 20.0, 78);
  EXPECT_NE(a.events, other.events);
}

TEST(Schedule, StreamsAreDecoupled) {
  // changing the transmit rate leaves compute times untouched
  const std::vector<double> c{0.3, 0.3}, t1{0.1, 0.1}, t2{0.9, 0.9};
  auto computes = [](const EventSchedule& s) {
    std::vector<double> out;
    for (const auto& e : s.events) {
      if (e.kind == EventKind::Compute) out.push_back(e.time);
    }
    return out;
  };
  EXPECT_EQ(computes(generate_schedule(c, t1, 200.0, 50.0, 5)),
            computes(generate_schedule(c, t2, 200.0, 50.0, 5)));
}

TEST(Schedule, Errors) {
  const std::vector<double> r{0.1};
  const std::vector<double> bad{0.0};
  EXPECT_THROW(generate_schedule(r, r, 5.0, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_schedule(r, bad, 50.0, 10.0, 1), InvalidInput);
  EXPECT_THROW(generate_schedule(r, std::vector<double>{0.1, 0.1}, 50.0, 10.0, 1), InvalidInput);
}

TEST(Queue, TieBreakBySeq) {
  EventQueue q;
  q.insert({3.0, 0, 0, EventKind::Compute, kNoRef});
  q.insert({1.0, 1, 0, EventKind::Compute, kNoRef});
  q.insert({1.0, 2, 0, EventKind::Compute, kNoRef});
  auto a = q.pop_next(), b = q.pop_next(), c = q.pop_next();
  EXPECT_EQ(a->time, 1.0);
  EXPECT_EQ(a->seq, 1u);
  EXPECT_EQ(b->time, 1.0);
  EXPECT_EQ(b->seq, 2u);
  EXPECT_EQ(c->time, 3.0);
  EXPECT_EQ(c->seq, 0u);
  EXPECT_FALSE(q.pop_next().has_value());
}

TEST(Queue, RejectsPastInsert) {
  EventQueue q;
  q.insert({5.0, 0, 0, EventKind::Compute, kNoRef});
  q.pop_next();
  EXPECT_EQ(q.clock(), 5.0);
  EXPECT_THROW(q.schedule(4.0, 0, EventKind::Arrival), CausalityViolation);
  EXPECT_NO_THROW(q.schedule(5.0, 0, EventKind::Arrival));
}

TEST(Queue, ScheduleAssignsFreshSeq) {
  EventQueue q;
  q.insert({1.0, 41, 0, EventKind::Compute, kNoRef});
  const auto e = q.schedule(1.0, 2, EventKind::Arrival, 7);
  EXPECT_EQ(e.seq, 42u);
  EXPECT_EQ(q.pop_next()->seq, 41u);
  EXPECT_EQ(q.pop_next()->ref, 7);
}

TEST(Queue, RandomInsertsPopSorted) {
  Rng rng(123);
  EventQueue q;
  std::vector<Event> all;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    // coarse times force many ties
    Event e{std::floor(uniform01(rng) * 100.0), k, 0, EventKind::Compute, kNoRef};
    all.push_back(e);
    q.insert(e);
  }
  std::sort(all.begin(), all.end(), event_before);
  std::vector<Event> popped;
  while (auto e = q.pop_next()) popped.push_back(*e);
  EXPECT_EQ(popped, all);
}

TEST(Superposition, WindowSemantics) {
  const std::vector<TimedArrival> a{{1.0, 0}, {1.0001, 1}, {5.0, 2}};
  const auto g = group_superposition(a, 0.001);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].messages, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(g[0].time, 1.0001);
  EXPECT_EQ(g[1].messages, (std::vector<std::size_t>{2}));
  EXPECT_EQ(group_superposition(a, 0.0).size(), 3u);
}

TEST(Superposition, MatchesBruteForce) {
  Rng rng(8);
  std::vector<TimedArrival> a;
  for (std::size_t k = 0; k < 100; ++k) a.push_back({uniform01(rng), k});
  std::sort(a.begin(), a.end(), [](auto& x, auto& y) { return x.time < y.time; });
  // oracle: label each arrival with its group start
  std::size_t groups = 0;
  double start = -1.0;
  for (const auto& x : a) {
    if (groups == 0 || x.time > start + 0.01) {
      ++groups;
      start = x.time;
    }
  }
  const auto g = group_superposition(a, 0.01);
  EXPECT_EQ(g.size(), groups);
  std::size_t total = 0;
  for (const auto& grp : g) total += grp.messages.size();
  EXPECT_EQ(total, 100u);
}

TEST(Superposition, RejectsUnsorted) {
  const std::vector<TimedArrival> a{{2.0, 0}, {1.0, 1}};
  EXPECT_THROW(group_superposition(a, 5.0), InvalidInput);
  EXPECT_THROW(group_superposition(a, 0.0), InvalidInput);
}

TEST(ScheduleText, RoundTrip) {
  const std::vector<double> rates{0.2, 0.3, 0.1};
  const auto s = generate_schedule(rates, rates, 30.0, 10.0, 4);
  std::stringstream ss;
  dump_schedule(ss, s);
  const auto back = load_schedule(ss);
  EXPECT_EQ(back.events, s.events);
  EXPECT_EQ(back.horizon, 30.0);
  EXPECT_EQ(back.period, 10.0);
}

TEST(EventKind, Names) {
  for (auto k : {EventKind::Compute, EventKind::Transmit, EventKind::Arrival, EventKind::ReceiveGroup,
                 EventKind::Unification}) {
    EXPECT_EQ(event_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(event_kind_from_string("bogus"), InvalidInput);
}
