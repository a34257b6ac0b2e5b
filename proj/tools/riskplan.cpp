// riskplan: batch front end for planning, sweeps, dataset generation and
// certification. Exit codes: 0 converged, 2 infeasible, 1 usage or input error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "riskplan/errors.hpp"
#include "riskplan/grip_dataset.hpp"
#include "riskplan/plan_io.hpp"
#include "riskplan/scenario.hpp"

namespace {

using namespace riskplan;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;

std::string format_delta(double d) {
  std::ostringstream s;
  s << d;
  return s.str();
}

void print_summary(const scenario::Scenario& sc, const io::PlanArtifacts& art) {
  const auto& res = art.result;
  std::cout << sc.name << ": " << nlp::to_string(res.status);
  if (!res.reason.empty()) std::cout << " (" << res.reason << ")";
  std::cout << ", " << res.layout.n_vars << " vars, " << res.layout.n_eq << " eq, " << res.layout.n_ineq << " ineq, "
            << res.report.outer_iterations << " outer / " << res.report.inner_iterations << " inner iterations, "
            << art.solve_time_s << " s\n";
  if (res.status != nlp::Status::Converged) return;
  std::cout << "  energy proxy " << art.energy.force << " N^2, torque " << art.energy.torque << " N^2 m^2\n";
  std::cout << "  min cone margin " << res.trajectory.min_cone_margin() << " N\n";
  if (art.audit) std::cout << "  audit max violation " << art.audit->max_violation() << "\n";
  if (art.deflection) std::cout << "  deflection max |delta_wall| " << art.deflection->max_wall_norm << " m\n";
  if (!art.deflection_error.empty()) std::cout << "  deflection: " << art.deflection_error << "\n";
  if (art.risk) {
    std::cout << "  certified joint violation " << art.risk->joint_rate << " +/- " << art.risk->joint_half_width
              << " (Delta " << art.risk->delta << ", " << art.risk->samples << " samples)\n";
  }
}

// Writes the plan JSON and the per-plan CSVs under `dir` with `suffix`
// inserted before each file extension.
void write_outputs(const scenario::Scenario& sc, const io::PlanArtifacts& art, const std::filesystem::path& dir,
                   const std::string& suffix) {
  auto named = [&](const std::string& file) {
    std::filesystem::path p(file);
    return dir / (p.stem().string() + suffix + p.extension().string());
  };
  const json doc = io::plan_document(sc, art, io::utc_timestamp());
  io::write_file_atomic(named(sc.output.plan), doc.dump(2) + "\n");
  if (art.result.status == nlp::Status::Converged) {
    std::ostringstream feet;
    io::write_footholds_csv(feet, art.result.trajectory, sc.problem);
    io::write_file_atomic(named(sc.output.footholds), feet.str());
    if (art.risk) {
      std::ostringstream risk;
      art.risk->write_csv(risk);
      io::write_file_atomic(named(sc.output.risk_csv), risk.str());
    }
  }
  if (!sc.output.iteration_log.empty()) {
    std::ostringstream log;
    nlp::write_iteration_log(log, art.result.report);
    io::write_file_atomic(named(sc.output.iteration_log), log.str());
  }
}

int run_plan(const std::string& config, const std::string& out_dir) {
  auto sc = scenario::load_scenario(config);
  if (!out_dir.empty()) sc.output.dir = out_dir;
  const auto art = io::run_scenario(sc);
  print_summary(sc, art);
  write_outputs(sc, art, sc.output.dir, "");
  return art.result.status == nlp::Status::Converged ? kExitOk : kExitInfeasible;
}

int run_sweep(const std::string& config, const std::vector<double>& deltas, const std::string& out_dir, int jobs) {
  if (deltas.size() < 2) throw InvalidInput("sweep needs at least two Delta values");
  std::ifstream in(config);
  if (!in) throw InvalidInput("cannot open config " + config);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(config).has_parent_path()
                                         ? std::filesystem::path(config).parent_path()
                                         : std::filesystem::path(".");
  std::vector<scenario::Scenario> scenarios;
  for (double d : deltas) {
    json row = doc;
    if (row.contains("risk") && row["risk"].is_object()) row["risk"]["delta"] = d;
    scenarios.push_back(scenario::build_scenario(row, base));
    if (!out_dir.empty()) scenarios.back().output.dir = out_dir;
  }

  const unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  std::vector<io::PlanArtifacts> results(scenarios.size());
  std::size_t next = 0;
  while (next < scenarios.size()) {
    std::vector<std::future<void>> batch;
    for (unsigned w = 0; w < workers && next < scenarios.size(); ++w, ++next) {
      batch.push_back(std::async(std::launch::async, [&, k = next] {
        scenarios[k].validation.threads = 1;
        results[k] = io::run_scenario(scenarios[k]);
        write_outputs(scenarios[k], results[k], scenarios[k].output.dir, "_delta_" + format_delta(deltas[k]));
      }));
    }
    for (auto& f : batch) f.get();
  }

  std::vector<io::SweepRow> rows;
  bool all_converged = true;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    const auto& art = results[k];
    print_summary(scenarios[k], art);
    const bool ok = art.result.status == nlp::Status::Converged;
    all_converged = all_converged && ok;
    rows.push_back({deltas[k], nlp::to_string(art.result.status), ok ? art.energy.force : std::nan(""),
                    ok ? art.result.trajectory.min_cone_margin() : std::nan(""), art.solve_time_s});
  }
  std::ostringstream csv;
  io::write_sweep_csv(csv, rows);
  const auto dir = scenarios.front().output.dir;
  io::write_file_atomic(dir / "sweep.csv", csv.str());
  std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
  return all_converged ? kExitOk : kExitInfeasible;
}

int run_gen_dataset(std::uint64_t seed, const std::string& out, int repeats) {
  gp::SyntheticGripGenerator gen;
  gen.seed = seed;
  const auto grid = gp::OrientationGrid::training();
  const auto samples = gen.generate(grid, repeats);
  std::ostringstream s;
  gp::write_dataset(s, samples);
  io::write_file_atomic(out, s.str());
  std::cout << "wrote " << samples.size() << " rows to " << out << "\n";
  return kExitOk;
}

int run_certify(const std::string& plan_path, std::int64_t samples, std::uint64_t seed, int threads,
                const std::string& csv_out) {
  std::ifstream in(plan_path);
  if (!in) throw InvalidInput("cannot open plan " + plan_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("invalid plan JSON: ") + e.what());
  }
  io::validate_plan_json(doc);
  if (doc["status"] != "Converged") {
    std::cout << "plan status is " << doc["status"].get<std::string>() << "; nothing to certify\n";
    return kExitInfeasible;
  }
  const auto traj = io::trajectory_from_json(doc["trajectory"]);
  const auto model = gp::GPModel::from_json(doc["gp"]);
  const auto rep = validator::certify(traj, model, samples, seed, threads);
  std::cout << rep.to_json().dump(2) << "\n";
  if (!csv_out.empty()) {
    std::ostringstream s;
    rep.write_csv(s);
    io::write_file_atomic(csv_out, s.str());
  }
  const double bound = rep.delta + 3.0 * std::sqrt(rep.delta / static_cast<double>(rep.samples));
  std::cout << "joint violation " << rep.joint_rate << (rep.joint_rate <= bound ? " <= " : " > ") << bound << "\n";
  return rep.joint_rate <= bound ? kExitOk : kExitInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-bounded contact and pose planning for wall-bracing legged robots"};
  app.require_subcommand(1);

  std::string config, out_dir, plan_path, csv_out, dataset_out;
  std::vector<double> deltas;
  std::uint64_t seed = 1;
  std::int64_t samples = 100000;
  int jobs = 0, threads = 0, repeats = 20;

  auto* plan = app.add_subcommand("plan", "plan a scenario and write the plan JSON and CSVs");
  plan->add_option("config", config, "scenario config (JSON)")->required();
  plan->add_option("--out-dir", out_dir, "override the output directory");

  auto* sweep = app.add_subcommand("sweep", "plan a scenario for several Delta values");
  sweep->add_option("config", config, "scenario config (JSON)")->required();
  sweep->add_option("--deltas", deltas, "comma-separated Delta values")->required()->delimiter(',');
  sweep->add_option("--out-dir", out_dir, "override the output directory");
  sweep->add_option("--jobs", jobs, "concurrent plans (0 = hardware)")->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-dataset", "write a synthetic pull-test dataset");
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--out", dataset_out, "output CSV path")->required();
  gen->add_option("--repeats", repeats, "pull tests per orientation")->check(CLI::PositiveNumber);

  auto* cert = app.add_subcommand("certify", "Monte-Carlo certification of a plan JSON");
  cert->add_option("plan", plan_path, "plan JSON")->required();
  cert->add_option("--samples", samples, "sample count")->check(CLI::PositiveNumber);
  cert->add_option("--seed", seed, "sampling seed");
  cert->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
  cert->add_option("--csv", csv_out, "write per-constraint rates to this CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*plan) return run_plan(config, out_dir);
    if (*sweep) return run_sweep(config, deltas, out_dir, jobs);
    if (*gen) return run_gen_dataset(seed, dataset_out, repeats);
    if (*cert) return run_certify(plan_path, samples, seed, threads, csv_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kExitInput;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error (line " << e.line() << "): " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
