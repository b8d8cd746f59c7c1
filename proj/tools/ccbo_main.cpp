// ccbo: command-line harness for chance-constrained Bayesian optimization runs.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "ccbo/campaign.hpp"
#include "ccbo/config.hpp"
#include "ccbo/driver.hpp"
#include "ccbo/errors.hpp"
#include "ccbo/history.hpp"

namespace fs = std::filesystem;
using namespace ccbo;

namespace {

enum ExitCode { kOk = 0, kConfigFailure = 1, kRunFailure = 2, kIoFailure = 3 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string algo;
  std::optional<int> iters;
};

CliConfig load(const CommonOptions& o) { return o.config.empty() ? CliConfig{} : load_config(o.config); }

std::vector<double> as_vector(const Vec& v) { return {v.begin(), v.end()}; }

// Reference selection for convergence metrics: the problem's built-in
// point, the brute-force oracle, or an explicit "x1,x2,..." list.
void resolve_reference(ProblemSpec& problem, const CliConfig& cfg) {
  const std::string& mode = cfg.campaign.reference;
  if (mode == "builtin") {
    if (!problem.reference_x()) throw ConfigError("problem has no built-in reference; use reference = computed");
    return;
  }
  if (mode == "computed") {
    const auto& r = cfg.reference;
    const auto solution = reference_solution(problem, r.grid_res, r.mc_size, r.refine_levels);
    if (!solution) throw RunError("reference oracle found no feasible design");
    problem.set_reference_x(solution->x);
    return;
  }
  ProblemDefinition def;
  def.name = problem.name();
  std::vector<double> values;
  std::stringstream in(mode);
  for (std::string cell; std::getline(in, cell, ',');) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("[campaign] reference: cannot parse '{}'", mode));
    }
  }
  if (static_cast<int>(values.size()) != problem.dim_x()) throw ConfigError("[campaign] reference has the wrong dimension");
  problem.set_reference_x(Eigen::Map<const Vec>(values.data(), problem.dim_x()));
}

int cmd_run(const CommonOptions& o, bool timing) {
  CliConfig cfg = load(o);
  const ProblemSpec problem = build_problem(cfg.problem);
  const Algorithm algorithm = o.algo.empty() ? cfg.run.algorithm : algorithm_from_string(o.algo);
  RunConfig run_cfg = cfg.run_config_for(algorithm);
  if (o.seed) run_cfg.seed = *o.seed;
  if (o.iters) run_cfg.max_iterations = *o.iters;
  run_cfg.validate(problem);

  const RunHistory history = run(problem, run_cfg);
  const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(fmt::format("cannot create {}", out.string()));
  write_history(history, out / "history.jsonl");
  if (timing) write_timing_csv(history, out / "timing.csv");

  const auto& last = history.incumbents.back();
  fmt::print("{} on {}: {} iterations, {} evaluations\n", to_string(algorithm), problem.name(),
             history.iterations(), history.final_design.size());
  fmt::print("incumbent x = [{}], z_min_feas = {:.6g}, feasible = {}\n", fmt::join(as_vector(last.x), ", "),
             last.z_min_feas, last.feasible);
  if (problem.reference_x())
    fmt::print("distance to reference = {:.6g}\n", (last.x - *problem.reference_x()).norm());
  fmt::print("history written to {}\n", (out / "history.jsonl").string());
  return kOk;
}

int cmd_campaign(const CommonOptions& o, std::optional<int> replications, std::optional<int> workers) {
  CliConfig cfg = load(o);
  ProblemSpec problem = build_problem(cfg.problem);
  resolve_reference(problem, cfg);

  CampaignConfig campaign;
  campaign.problem_name = problem.name();
  campaign.algorithms = cfg.campaign.algorithms;
  if (!o.algo.empty()) {
    campaign.algorithms.clear();
    std::stringstream in(o.algo);
    for (std::string name; std::getline(in, name, ',');) campaign.algorithms.push_back(algorithm_from_string(name));
  }
  campaign.replications = replications.value_or(cfg.campaign.replications);
  if (campaign.replications < 1) throw ConfigError("--replications must be at least 1");
  campaign.base_seed = o.seed.value_or(cfg.campaign.base_seed);
  campaign.run_template = cfg.run;
  campaign.per_algorithm = cfg.per_algorithm;
  if (o.iters) {
    campaign.run_template.max_iterations = *o.iters;
    for (auto& [a, rc] : campaign.per_algorithm) rc.max_iterations = *o.iters;
  }
  campaign.output_dir = o.out.empty() ? cfg.campaign.output : fs::path(o.out);
  campaign.workers = workers.value_or(cfg.campaign.workers);

  const CampaignResult result = run_campaign(problem, campaign);
  for (const auto& f : result.failures)
    fmt::print(stderr, "run failed: {} replicate {}: {}\n", f.algorithm, f.replicate, f.message);
  for (const auto& [name, runs] : result.histories) {
    int last = 0;
    for (const auto& row : result.table.rows)
      if (row.algorithm == name) last = std::max(last, row.iteration);
    if (const auto* row = result.table.find(name, last))
      fmt::print("{:>10}: {} runs, iteration {}: median distance {:.4g} (IQR {:.4g}-{:.4g})\n", name, runs.size(),
                 last, row->median_dist, row->q25, row->q75);
  }
  fmt::print("results written to {}\n", campaign.output_dir.string());
  return kOk;
}

int cmd_reference(const CommonOptions& o, std::optional<int> grid, std::optional<int> mc, std::optional<int> refine) {
  CliConfig cfg = load(o);
  const ProblemSpec problem = build_problem(cfg.problem);
  const int g = grid.value_or(cfg.reference.grid_res);
  const int n = mc.value_or(cfg.reference.mc_size);
  const int r = refine.value_or(cfg.reference.refine_levels);
  const auto solution = reference_solution(problem, g, n, r);
  if (!solution) {
    fmt::print("no feasible design on the {}-point grid\n", g);
    return kRunFailure;
  }
  fmt::print("x* = [{}]\nE[f] = {:.6g}\nP(feasible) = {:.6g}\n", fmt::join(as_vector(solution->x), ", "),
             solution->mean_objective, solution->feasibility);
  if (!o.out.empty()) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    const fs::path path = fs::path(o.out) / "reference.json";
    std::ofstream out(path);
    out << nlohmann::json{{"x", as_vector(solution->x)},
                          {"mean_objective", solution->mean_objective},
                          {"feasibility", solution->feasibility},
                          {"grid_res", g},
                          {"mc_size", n},
                          {"refine_levels", r}}
               .dump(2)
        << '\n';
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
  }
  return kOk;
}

int cmd_validate(const CommonOptions& o, const std::string& history_path, std::optional<int> repeats,
                 std::optional<int> M, std::optional<int> N) {
  CliConfig cfg = load(o);
  const RunHistory history = read_history(history_path);
  ProblemDefinition def = cfg.problem;
  if (o.config.empty()) def.name = history.problem;
  const ProblemSpec problem = build_problem(def);
  if (problem.name() != history.problem)
    throw ConfigError(fmt::format("history is for problem '{}', config defines '{}'", history.problem, problem.name()));

  const auto summary = validate_final_model(problem, history, repeats.value_or(cfg.validate.repeats),
                                            M.value_or(cfg.validate.M), N.value_or(cfg.validate.N),
                                            o.seed.value_or(cfg.validate.seed));
  fmt::print("incumbent x = [{}]\n", fmt::join(as_vector(summary.x), ", "));
  fmt::print("P(feasible) over {} repeats: min {:.4f} q25 {:.4f} median {:.4f} q75 {:.4f} max {:.4f} (1 - alpha = {:.4f})\n",
             summary.estimates.size(), summary.min, summary.q25, summary.median, summary.q75, summary.max,
             summary.target);
  if (!o.out.empty()) write_validation(summary, o.out);
  return kOk;
}

int cmd_report(const CommonOptions& o, const std::string& input, const std::string& format) {
  CliConfig cfg = load(o);
  const auto histories = load_histories(input);
  if (histories.empty()) throw ConfigError(fmt::format("no histories found under {}", input));
  ProblemDefinition def = cfg.problem;
  if (o.config.empty()) def.name = histories.begin()->second.front().problem;
  ProblemSpec problem = build_problem(def);
  resolve_reference(problem, cfg);

  const ConvergenceTable table = convergence_table(histories, *problem.reference_x());
  const fs::path out = o.out.empty() ? fs::path(input) : fs::path(o.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(fmt::format("cannot create {}", out.string()));
  if (format == "csv" || format == "both") emit_report(table, ReportFormat::csv, out / "convergence.csv");
  if (format == "json" || format == "both") emit_report(table, ReportFormat::json, out / "convergence.json");
  write_plot_data(histories, *problem.reference_x(), out);
  fmt::print("{} rows written to {}\n", table.rows.size(), out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained Bayesian optimization harness"};
  app.require_subcommand(1);

  CommonOptions common;
  bool timing = false;
  std::optional<int> replications, workers, grid, mc, refine, repeats, M, N;
  std::string history_path, input, format = "both";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", common.seed, "Seed (base seed for campaigns)");
    cmd->add_option("--out", common.out, "Output directory");
  };

  auto* run_cmd = app.add_subcommand("run", "Single optimization run");
  add_common(run_cmd);
  run_cmd->add_option("--algo", common.algo, "efisur | efirand | ceidevnum");
  run_cmd->add_option("--iters", common.iters, "Iterations after the initial design")->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--timing", timing, "Also write per-iteration wall times to timing.csv");

  auto* campaign_cmd = app.add_subcommand("campaign", "Replicated study of one or more algorithms");
  add_common(campaign_cmd);
  campaign_cmd->add_option("--algo", common.algo, "Comma-separated algorithms");
  campaign_cmd->add_option("--iters", common.iters, "Iterations per run")->check(CLI::NonNegativeNumber);
  campaign_cmd->add_option("--replications", replications, "Replications per algorithm")->check(CLI::PositiveNumber);
  campaign_cmd->add_option("--workers", workers, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  auto* reference_cmd = app.add_subcommand("reference", "Brute-force reference solution");
  add_common(reference_cmd);
  reference_cmd->add_option("--grid", grid, "Grid points per design axis")->check(CLI::Range(2, 100000));
  reference_cmd->add_option("--mc", mc, "Monte Carlo size per grid point")->check(CLI::PositiveNumber);
  reference_cmd->add_option("--refine", refine, "Local zoom levels")->check(CLI::NonNegativeNumber);

  auto* validate_cmd = app.add_subcommand("validate", "Re-estimate feasibility at a run's final incumbent");
  add_common(validate_cmd);
  validate_cmd->add_option("--history", history_path, "History file of the run")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--repeats", repeats, "Repetitions")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--M", M, "u-points per repetition")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--N", N, "Trajectories per repetition")->check(CLI::PositiveNumber);

  auto* report_cmd = app.add_subcommand("report", "Aggregate existing histories");
  add_common(report_cmd);
  report_cmd->add_option("--in", input, "Directory searched for *.jsonl histories")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--format", format, "csv | json | both")->check(CLI::IsMember({"csv", "json", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*run_cmd) return cmd_run(common, timing);
    if (*campaign_cmd) return cmd_campaign(common, replications, workers);
    if (*reference_cmd) return cmd_reference(common, grid, mc, refine);
    if (*validate_cmd) return cmd_validate(common, history_path, repeats, M, N);
    if (*report_cmd) return cmd_report(common, input, format);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return kConfigFailure;
  } catch (const IoError& e) {
    fmt::print(stderr, "I/O error: {}\n", e.what());
    return kIoFailure;
  } catch (const std::exception& e) {
    fmt::print(stderr, "run failed: {}\n", e.what());
    return kRunFailure;
  }
  return kOk;
}
