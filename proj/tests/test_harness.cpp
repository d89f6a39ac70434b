#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "draco/harness/config.hpp"
#include "draco/harness/experiment.hpp"

using namespace draco;
using namespace draco::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("draco-test-" + name);
  fs::remove_all(p);
  return p;
}

ExperimentSpec quick_spec(const fs::path& out) {
  ExperimentSpec s;
  s.base.N = 6;
  s.base.d = 3;
  s.base.T = 100.0;
  s.base.P = 25.0;
  s.base.channel.mode = ChannelMode::Ideal;
  s.base.sampling_interval = 40;
  s.output_dir = out.string();
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const auto spec = parse_config_text("[simulation]\nN = 25\n");
  const ExperimentSpec defaults;
  EXPECT_EQ(spec.base, defaults.base);
  EXPECT_EQ(spec.base.N, 25u);
  EXPECT_EQ(spec.base.lambda_compute, 0.1);
  EXPECT_EQ(spec.base.objective.batch, 64u);
  EXPECT_EQ(spec.base.channel.field_radius, 500.0);
  EXPECT_EQ(spec.base.channel.path_loss_exponent, 4.0);
  EXPECT_EQ(spec.base.channel.bandwidth_hz, 1e7);
  EXPECT_EQ(spec.base.channel.noise_density_dbm_hz, -174.0);
  EXPECT_EQ(spec.base.channel.tx_power_dbm, 30.0);
  EXPECT_EQ(spec.base.channel.gamma_max, 10.0);
  EXPECT_EQ(spec.base.sampling_interval, 500u);
  EXPECT_EQ(spec.values, std::vector<std::string>{"1"});
}

TEST(Config, RangeError) {
  try {
    parse_config_text("[simulation]\nN = 0\n", "c.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Config);
    EXPECT_NE(std::string(e.what()).find("N must be >= 1"), std::string::npos);
  }
}

TEST(Config, LineContext) {
  const std::string text = "# comment\n[simulation]\nN = 5\nbogus = 1\n";
  try {
    parse_config_text(text, "c.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text("N = 5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[simulation]\nN = 5\nN = 6\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[simulation]\nN = five\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[simulation]\nN\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[sweep]\nrepetitions = 0\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[channel]\nmode = laser\n"), ConfigError);
}

TEST(Config, RoundTrip) {
  const std::string text =
      "[simulation]\nN = 12\ngamma = 0.003\ntopology = cycle\nseed = 99\n"
      "[objective]\nkind = logistic\nfeatures = 5\nnoise = 0.1\n"
      "[channel]\nmode = ideal\ngamma_max = 2.5\n"
      "[sweep]\naxis = psi\nvalues = 1, 3, 5\nrepetitions = 2\n"
      "[output]\ndir = somewhere\n";
  const auto a = parse_config_text(text);
  const auto b = parse_config_text(serialize_config(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_config(a), serialize_config(b));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(a.values, (std::vector<std::string>{"1", "3", "5"}));
  auto c = a;
  c.base.gamma = 0.004;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(Config, MissingFileIsIo) {
  EXPECT_THROW(parse_config("/nonexistent/draco.cfg"), IoError);
}

TEST(Sweep, ApplyAxis) {
  SimulationConfig base;
  EXPECT_EQ(apply_sweep(base, SweepAxis::Psi, "3").Psi, 3u);
  EXPECT_EQ(apply_sweep(base, SweepAxis::GammaMax, "0.5").channel.gamma_max, 0.5);
  EXPECT_EQ(apply_sweep(base, SweepAxis::Topology, "cycle").topology, TopologyKind::Cycle);
  EXPECT_EQ(apply_sweep(base, SweepAxis::Seed, "42").seed, 42u);
  EXPECT_THROW(apply_sweep(base, SweepAxis::Psi, "x"), ConfigError);
}

TEST(Experiment, SweepWritesTracesAndSummary) {
  const auto out = scratch("sweep");
  auto spec = quick_spec(out);
  spec.axis = SweepAxis::Psi;
  spec.values = {"1", "3", "5", "10"};
  spec.repetitions = 3;
  const auto res = run_experiment(spec);
  EXPECT_EQ(res.runs, 12u);
  EXPECT_EQ(res.failures, 0u);
  std::size_t traces = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    const auto name = e.path().filename().string();
    if (name.rfind("trace_", 0) == 0 && e.path().extension() == ".csv") ++traces;
  }
  EXPECT_EQ(traces, 12u);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], config_hash(spec));
  EXPECT_EQ(manifest["version"], kVersion);
  EXPECT_EQ(manifest["runs"].size(), 12u);
  // the manifest config text parses back to the same experiment
  EXPECT_EQ(parse_config_text(manifest["config"].get<std::string>()), spec);

  const auto first = slurp(out / "summary.csv");
  run_experiment(spec);
  EXPECT_EQ(slurp(out / "summary.csv"), first);
  fs::remove_all(out);
}

TEST(Experiment, SummaryMediansRecomputed) {
  const auto out = scratch("median");
  auto spec = quick_spec(out);
  spec.axis = SweepAxis::Psi;
  spec.values = {"2", "6"};
  spec.repetitions = 4;
  spec.base.objective.noise = 0.05;
  run_experiment(spec);
  // oracle: read every trace's last row by hand and take the median
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  std::map<std::string, std::vector<double>> finals;
  for (const auto& r : manifest["runs"]) {
    std::istringstream is(slurp(out / r["trace"].get<std::string>()));
    std::string line, last;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (!line.empty()) last = line;
    }
    std::stringstream cells(last);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    finals[r["value"].get<std::string>()].push_back(std::stod(cell));
  }
  std::istringstream summary(slurp(out / "summary.csv"));
  std::string line;
  std::getline(summary, line);
  std::size_t rows = 0;
  while (std::getline(summary, line)) {
    std::stringstream cells(line);
    std::string axis, value, runs, loss;
    std::getline(cells, axis, ',');
    std::getline(cells, value, ',');
    std::getline(cells, runs, ',');
    std::getline(cells, loss, ',');
    auto v = finals.at(value);
    std::sort(v.begin(), v.end());
    EXPECT_EQ(runs, "4");
    EXPECT_EQ(std::stod(loss), 0.5 * (v[1] + v[2]));
    ++rows;
  }
  EXPECT_EQ(rows, 2u);
  fs::remove_all(out);
}

TEST(Experiment, AddingPointsKeepsExistingRuns) {
  const auto a = scratch("pts-a"), b = scratch("pts-b");
  auto spec = quick_spec(a);
  spec.axis = SweepAxis::Psi;
  spec.values = {"3"};
  spec.repetitions = 2;
  run_experiment(spec);
  spec.output_dir = b.string();
  spec.values = {"1", "3"};
  spec.repetitions = 3;
  run_experiment(spec);
  for (const char* f : {"trace_psi-3_rep0.csv", "trace_psi-3_rep1.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, FailuresRecordedOthersProceed) {
  const auto out = scratch("fail");
  auto spec = quick_spec(out);
  spec.axis = SweepAxis::Seed;
  spec.values = {"1", "2"};
  spec.base.gamma = 1e200;  // every run overflows
  const auto res = run_experiment(spec);
  EXPECT_EQ(res.failures, 2u);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  for (const auto& r : manifest["runs"]) {
    EXPECT_EQ(r["status"], "failed");
    EXPECT_EQ(r["category"], "numerical-overflow");
  }
  fs::remove_all(out);
}

TEST(Experiment, ParallelMatchesSerial) {
  const auto a = scratch("par-a"), b = scratch("par-b");
  auto spec = quick_spec(a);
  spec.axis = SweepAxis::Seed;
  spec.values = {"1", "2", "3"};
  spec.repetitions = 2;
  run_experiment(spec, 1);
  spec.output_dir = b.string();
  run_experiment(spec, 4);
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_EQ(slurp(a / "trace_seed-2_rep1.csv"), slurp(b / "trace_seed-2_rep1.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, OutputRootOverride) {
  const auto root = scratch("root");
  ::setenv(kOutputRootEnv, root.string().c_str(), 1);
  EXPECT_EQ(resolve_output_dir("rel"), root / "rel");
  EXPECT_EQ(resolve_output_dir("/abs/dir"), fs::path("/abs/dir"));
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_output_dir("rel"), fs::path("rel"));
}

TEST(Experiment, RunOutputs) {
  const auto out = scratch("single");
  const auto spec = quick_spec(out);
  const auto r = run(spec.base);
  write_run_outputs(out, spec.base, r);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["final"]["global_loss"].get<double>(), r.records.back().global_loss);
  EXPECT_TRUE(summary["bound"].contains("valid"));
  EXPECT_TRUE(summary["constants"]["exact"].get<bool>());
  std::istringstream is(slurp(out / "trace.csv"));
  EXPECT_EQ(read_trace_csv(is).size(), r.records.size());
  EXPECT_TRUE(fs::exists(out / "final_models.csv"));
  fs::remove_all(out);
}

TEST(Baseline, IdealLongHorizonComparable) {
  const auto out = scratch("baseline");
  ExperimentSpec spec;
  spec.base.channel.mode = ChannelMode::Ideal;
  spec.base.T = 5000.0;
  spec.repetitions = 2;
  spec.output_dir = out.string();
  const auto s = compare_baseline(spec);
  ASSERT_EQ(s.rows.size(), 2u);
  for (const auto& row : s.rows) {
    const double hi = std::max(row.draco_final_loss, row.baseline_final_loss);
    const double lo = std::min(row.draco_final_loss, row.baseline_final_loss);
    EXPECT_LE(hi, 10.0 * lo);
  }
  EXPECT_TRUE(fs::exists(out / "baseline.csv"));
  const auto first = slurp(out / "baseline.csv");
  compare_baseline(spec);
  EXPECT_EQ(slurp(out / "baseline.csv"), first);
  fs::remove_all(out);
}

TEST(Baseline, ChannelOffLeavesBaselineAlone) {
  const auto out = scratch("baseline-off");
  ExperimentSpec spec;
  spec.base.N = 8;
  spec.base.T = 500.0;
  spec.output_dir = out.string();
  const auto on = compare_baseline(spec);
  spec.base.channel.gamma_max = 0.0;
  const auto off = compare_baseline(spec);
  EXPECT_EQ(on.rows[0].baseline_final_loss, off.rows[0].baseline_final_loss);
  // no aggregation: every reference model stays at x0
  SimulationConfig c = spec.base;
  c.seed = off.rows[0].seed;
  EXPECT_EQ(off.rows[0].draco_final_loss, build_objective(c).global_loss(initial_model(c)));
  fs::remove_all(out);
}
