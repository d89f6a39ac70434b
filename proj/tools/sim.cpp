// sim: command-line front end for the simulator, sweeps and the inequality fuzzer.

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "draco/draco.hpp"
#include "draco/harness/config.hpp"
#include "draco/harness/experiment.hpp"

namespace {

using namespace draco;
using namespace draco::harness;

int cmd_run(const std::string& path) {
  const auto spec = parse_config(path);
  const auto r = run(spec.base);
  const auto dir = resolve_output_dir(spec.output_dir);
  write_run_outputs(dir, spec.base, r);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  const auto& last = r.records.back();
  std::cout << "events=" << r.events_executed << " final_global_loss=" << format_double(last.global_loss)
            << " grad_norm_sq=" << format_double(last.grad_norm_sq) << " out=" << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const std::string& path, std::size_t jobs) {
  const auto spec = parse_config(path);
  const auto res = run_experiment(spec, jobs);
  std::cout << "runs=" << res.runs << " failed=" << res.failures << " out=" << res.directory.string()
            << '\n';
  return res.failures ? 1 : 0;
}

int cmd_baseline(const std::string& path) {
  const auto spec = parse_config(path);
  const auto s = compare_baseline(spec);
  for (const auto& row : s.rows) {
    std::cout << "rep=" << row.repetition << " draco=" << format_double(row.draco_final_loss)
              << " baseline=" << format_double(row.baseline_final_loss) << '\n';
  }
  std::cout << "out=" << s.file.string() << '\n';
  return 0;
}

int cmd_dump(const std::string& path) {
  const auto spec = parse_config(path);
  const auto& c = spec.base;
  validate(c);
  std::vector<double> crates(c.N, c.lambda_compute), trates(c.N, c.lambda_transmit);
  const auto sched = generate_schedule(crates, trates, c.T, c.P, c.seed);
  const auto dir = resolve_output_dir(spec.output_dir);
  std::ostringstream s, g;
  dump_schedule(s, sched);
  dump_geometry_csv(g, build_geometry(c));
  write_atomic(dir / "schedule.txt", s.str());
  write_atomic(dir / "geometry.csv", g.str());
  std::cout << "events=" << sched.events.size() << " out=" << dir.string() << '\n';
  return 0;
}

nlohmann::ordered_json tally_json(const verify::FuzzTally& t) {
  return {{"instances", t.instances},
          {"violations", t.violations},
          {"zeta_invalid", t.zeta_invalid},
          {"worst_slack", t.worst_slack},
          {"max_lhs_over_rhs", t.max_ratio},
          {"pass", t.violations == 0 && t.zeta_invalid == 0}};
}

int cmd_verify(std::size_t instances, std::uint64_t seed, const std::string& law) {
  const auto rep = verify::run_fuzz(instances, seed, verify::weight_law_from_string(law));
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["weights"] = verify::to_string(rep.law);
  j["slack"] = verify::kSlack;
  j["checks"] = {{"grad_deviation", tally_json(rep.lemma)}, {"weighted_divergence", tally_json(rep.prop)}};
  j["pass"] = rep.passed();
  std::cout << j.dump(2) << '\n';
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous decentralized SGD simulator"};
  app.require_subcommand(1);

  std::string config;
  std::size_t jobs = 1;
  std::size_t instances = 1000;
  std::uint64_t seed = 1;
  std::string law = "simplex";

  auto* run_cmd = app.add_subcommand("run", "single run: trace.csv, summary.json, final_models.csv");
  run_cmd->add_option("config", config)->required();
  auto* sweep_cmd = app.add_subcommand("sweep", "seeded sweep: traces, manifest.json, summary.csv");
  sweep_cmd->add_option("config", config)->required();
  sweep_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* base_cmd = app.add_subcommand("baseline", "paired run against synchronous mixing");
  base_cmd->add_option("config", config)->required();
  auto* dump_cmd = app.add_subcommand("dump", "event schedule and node placement");
  dump_cmd->add_option("config", config)->required();
  auto* verify_cmd = app.add_subcommand("verify", "fuzz the gradient-deviation inequalities");
  verify_cmd->add_option("--instances", instances, "instances per inequality");
  verify_cmd->add_option("--seed", seed);
  verify_cmd->add_option("--weights", law, "simplex | subset | single")
      ->check(CLI::IsMember({"simplex", "subset", "single"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config);
    if (*sweep_cmd) return cmd_sweep(config, jobs);
    if (*base_cmd) return cmd_baseline(config);
    if (*dump_cmd) return cmd_dump(config);
    if (*verify_cmd) return cmd_verify(instances, seed, law);
  } catch (const draco::Error& e) {
    std::cerr << "error (" << draco::to_string(e.category()) << "): " << e.what() << '\n';
    return draco::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
