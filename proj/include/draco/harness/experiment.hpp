#pragma once

// Seeded experiment sweeps, trace persistence and run summaries.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "draco/core/error.hpp"
#include "draco/harness/config.hpp"
#include "draco/metrics.hpp"
#include "draco/protocol.hpp"
#include "draco/version.hpp"

namespace draco::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kOutputRootEnv = "DRACO_OUTPUT_ROOT";

// Relative output directories resolve under $DRACO_OUTPUT_ROOT when set.
inline fs::path resolve_output_dir(const std::string& dir) {
  fs::path p(dir);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && p.is_relative()) {
    return fs::path(root) / p;
  }
  return p;
}

// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string trace_csv(const RunResult& r) {
  std::ostringstream os;
  write_trace_csv(os, r.records);
  return os.str();
}

inline std::string models_csv(const std::vector<Vec>& models) {
  std::ostringstream os;
  os << "agent";
  const std::size_t d = models.empty() ? 0 : models.front().size();
  for (std::size_t k = 0; k < d; ++k) os << ",x" << k;
  os << '\n';
  for (std::size_t i = 0; i < models.size(); ++i) {
    os << i;
    for (double v : models[i]) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

inline double min_mean_local_grad_norm_sq(const std::vector<TraceRecord>& records) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : records) m = std::min(m, r.mean_local_grad_norm_sq);
  return m;
}

// Bound inputs from the run's config, the objective's constants at x0 and the
// observed rho.
inline BoundInputs bound_inputs(const SimulationConfig& c, const ProblemConstants& pc, double rho) {
  BoundInputs in;
  in.F = pc.F;
  in.B = static_cast<double>(c.B);
  in.gamma = c.gamma;
  in.Psi = static_cast<double>(c.Psi);
  in.zeta = pc.zeta;
  in.sigma = pc.sigma;
  in.N = static_cast<double>(c.N);
  in.L = pc.L;
  in.rho = rho;
  return in;
}

inline json run_summary_json(const SimulationConfig& c, const RunResult& r) {
  const auto obj = build_objective(c);
  const auto pc = estimate_constants(obj, initial_model(c), c.seed);
  const auto bound = theorem_bound(bound_inputs(c, pc, r.rho));
  const auto& last = r.records.back();
  json j;
  j["version"] = kVersion;
  j["seed"] = c.seed;
  j["events_executed"] = r.events_executed;
  j["final"] = {{"global_loss", last.global_loss},
                {"grad_norm_sq", last.grad_norm_sq},
                {"mean_local_grad_norm_sq", last.mean_local_grad_norm_sq},
                {"consensus_distance", last.consensus_distance},
                {"agent_loss", last.agent_loss}};
  j["min_mean_local_grad_norm_sq"] = min_mean_local_grad_norm_sq(r.records);
  j["constants"] = {{"L", pc.L}, {"sigma", pc.sigma}, {"zeta", pc.zeta}, {"F", pc.F},
                    {"exact", pc.exact}};
  j["rho"] = r.rho;
  j["bound"] = {{"value", bound.value},
                {"valid", bound.valid},
                {"agents_ok", bound.agents_ok},
                {"budget_ok", bound.budget_ok},
                {"step_ok", bound.step_ok},
                {"holds", min_mean_local_grad_norm_sq(r.records) <= bound.value}};
  j["counters"] = {{"sent", r.counters.sent},
                   {"delivered", r.counters.delivered},
                   {"dropped_deadline", r.counters.dropped_deadline},
                   {"accepted", r.counters.accepted},
                   {"dropped_psi", r.counters.dropped_psi},
                   {"in_flight", r.counters.in_flight}};
  std::size_t max_psi = 0;
  for (auto m : r.max_psi) max_psi = std::max(max_psi, m);
  j["max_accepted_per_period"] = max_psi;
  j["unifications"] = r.unifications.size();
  j["warnings"] = r.warnings;
  return j;
}

// trace.csv, final_models.csv and summary.json for a single run.
inline void write_run_outputs(const fs::path& dir, const SimulationConfig& c, const RunResult& r) {
  write_atomic(dir / "trace.csv", trace_csv(r));
  write_atomic(dir / "final_models.csv", models_csv(r.final_models));
  write_atomic(dir / "summary.json", run_summary_json(c, r).dump(2) + "\n");
}

struct PlannedRun {
  std::string value;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::string trace_file;
};

// Repetition r of every sweep point derives its seed from (seed, r) only, so
// points are paired and adding points or repetitions leaves existing runs
// untouched. On the seed axis the swept value is the seed.
inline std::vector<PlannedRun> plan_runs(const ExperimentSpec& spec) {
  std::vector<PlannedRun> out;
  for (const auto& v : spec.values) {
    const auto cfg = apply_sweep(spec.base, spec.axis, v);
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      PlannedRun p;
      p.value = v;
      p.repetition = r;
      p.seed = derive_seed(cfg.seed, Stream::Repetition, r);
      p.trace_file = std::string("trace_") + to_string(spec.axis) + "-" + v + "_rep" +
                     std::to_string(r) + ".csv";
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SummaryRow {
  std::string value;
  std::size_t runs = 0;
  double final_global_loss = 0.0;
  double final_grad_norm_sq = 0.0;
  double min_mean_local_grad_norm_sq = 0.0;
  double final_consensus_distance = 0.0;
  double dropped_deadline = 0.0;
  double dropped_psi = 0.0;
};

// Per-point medians, computed from the trace files alone. Points keep the
// order of first appearance.
inline std::vector<SummaryRow> summarize_traces(
    const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& point_files) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<TraceRecord>>> by_point;
  for (const auto& [value, file] : point_files) {
    if (!by_point.count(value)) order.push_back(value);
    std::istringstream is(read_file(dir / file));
    auto recs = read_trace_csv(is);
    if (recs.empty()) throw IoError("trace " + file + " has no records");
    by_point[value].push_back(std::move(recs));
  }
  std::vector<SummaryRow> rows;
  for (const auto& value : order) {
    const auto& traces = by_point[value];
    std::vector<double> fl, fg, mg, cd, dd, dp;
    for (const auto& t : traces) {
      const auto& last = t.back();
      fl.push_back(last.global_loss);
      fg.push_back(last.grad_norm_sq);
      mg.push_back(min_mean_local_grad_norm_sq(t));
      cd.push_back(last.consensus_distance);
      dd.push_back(static_cast<double>(last.counters.dropped_deadline));
      dp.push_back(static_cast<double>(last.counters.dropped_psi));
    }
    rows.push_back({value, traces.size(), median(fl), median(fg), median(mg), median(cd),
                    median(dd), median(dp)});
  }
  return rows;
}

inline std::string summary_csv(SweepAxis axis, const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "axis,value,runs,median_final_global_loss,median_final_grad_norm_sq,"
        "median_min_mean_local_grad_norm_sq,median_final_consensus_distance,"
        "median_dropped_deadline,median_dropped_psi\n";
  for (const auto& r : rows) {
    os << to_string(axis) << ',' << r.value << ',' << r.runs << ',' << format_double(r.final_global_loss)
       << ',' << format_double(r.final_grad_norm_sq) << ','
       << format_double(r.min_mean_local_grad_norm_sq) << ','
       << format_double(r.final_consensus_distance) << ',' << format_double(r.dropped_deadline)
       << ',' << format_double(r.dropped_psi) << '\n';
  }
  return os.str();
}

// Runs fn(k) for k in [0, count) on `jobs` worker threads.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) fn(k);
    });
  }
}

struct ExperimentResult {
  fs::path directory;
  std::size_t runs = 0;
  std::size_t failures = 0;
};

// One trace CSV per (value, repetition), manifest.json and summary.csv.
// A failing run is recorded in the manifest; the others proceed.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t jobs = 1) {
  const fs::path dir = resolve_output_dir(spec.output_dir);
  const auto plan = plan_runs(spec);
  std::vector<std::string> errors(plan.size());
  std::vector<std::string> categories(plan.size());
  parallel_for(plan.size(), jobs, [&](std::size_t k) {
    const auto& p = plan[k];
    try {
      auto cfg = apply_sweep(spec.base, spec.axis, p.value);
      cfg.seed = p.seed;
      cfg.record_receptions = false;
      const auto r = run(cfg);
      write_atomic(dir / p.trace_file, trace_csv(r));
    } catch (const Error& e) {
      errors[k] = e.what();
      categories[k] = to_string(e.category());
    } catch (const std::exception& e) {
      errors[k] = e.what();
      categories[k] = "internal";
    }
  });

  ExperimentResult res;
  res.directory = dir;
  res.runs = plan.size();
  json manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = config_hash(spec);
  manifest["base_seed"] = spec.base.seed;
  manifest["axis"] = to_string(spec.axis);
  manifest["values"] = spec.values;
  manifest["repetitions"] = spec.repetitions;
  manifest["config"] = serialize_config(spec);
  json runs = json::array();
  std::vector<std::pair<std::string, std::string>> ok_files;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& p = plan[k];
    json entry = {{"value", p.value}, {"repetition", p.repetition}, {"seed", p.seed},
                  {"trace", p.trace_file}, {"status", errors[k].empty() ? "ok" : "failed"}};
    if (!errors[k].empty()) {
      entry["error"] = errors[k];
      entry["category"] = categories[k];
      ++res.failures;
    } else {
      ok_files.emplace_back(p.value, p.trace_file);
    }
    runs.push_back(std::move(entry));
  }
  manifest["runs"] = std::move(runs);
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  write_atomic(dir / "summary.csv", summary_csv(spec.axis, summarize_traces(dir, ok_files)));
  return res;
}

struct PairedRow {
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  double draco_final_loss = 0.0;
  double baseline_final_loss = 0.0;
  double draco_grad_norm_sq = 0.0;
  double baseline_grad_norm_sq = 0.0;
};

struct PairedSummary {
  std::vector<PairedRow> rows;
  fs::path file;
};

// DRACO and the synchronous baseline on the same objective and seed for each
// repetition; writes baseline.csv.
inline PairedSummary compare_baseline(const ExperimentSpec& spec) {
  PairedSummary out;
  for (std::size_t r = 0; r < spec.repetitions; ++r) {
    auto cfg = spec.base;
    cfg.seed = derive_seed(spec.base.seed, Stream::Repetition, r);
    cfg.record_receptions = false;
    const auto a = run(cfg);
    const auto b = run_sync_baseline(cfg);
    out.rows.push_back({r, cfg.seed, a.records.back().global_loss, b.records.back().global_loss,
                        a.records.back().grad_norm_sq, b.records.back().grad_norm_sq});
  }
  std::ostringstream os;
  os << "repetition,seed,draco_final_global_loss,baseline_final_global_loss,"
        "draco_final_grad_norm_sq,baseline_final_grad_norm_sq\n";
  for (const auto& row : out.rows) {
    os << row.repetition << ',' << row.seed << ',' << format_double(row.draco_final_loss) << ','
       << format_double(row.baseline_final_loss) << ',' << format_double(row.draco_grad_norm_sq)
       << ',' << format_double(row.baseline_grad_norm_sq) << '\n';
  }
  out.file = resolve_output_dir(spec.output_dir) / "baseline.csv";
  write_atomic(out.file, os.str());
  return out;
}

}  // namespace draco::harness
