#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ccbo/config.hpp"
#include "ccbo/driver.hpp"

namespace ccbo {

struct CampaignConfig {
  std::string problem_name = "analytic-2x2";
  std::vector<Algorithm> algorithms;
  int replications = 1;
  std::uint64_t base_seed = 0;
  RunConfig run_template;
  std::map<Algorithm, RunConfig> per_algorithm;
  std::filesystem::path output_dir;
  int workers = 0;

  RunConfig run_config(Algorithm algorithm, int replicate) const;
};

/// Distance statistics of the incumbent to the reference, in raw design
/// coordinates, per (algorithm, iteration).
struct ConvergenceRow {
  std::string algorithm;
  int iteration = 0;
  double mean_dist = 0.0;
  double median_dist = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;

  bool empty() const { return rows.empty(); }
  const ConvergenceRow* find(const std::string& algorithm, int iteration) const;
};

// Keyed by algorithm name; iterations up to the shortest history.
ConvergenceTable convergence_table(
    const std::map<std::string, std::vector<RunHistory>>& histories,
    const Vec& reference_x);

std::vector<double> incumbent_distances(const RunHistory& history,
                                        const Vec& reference_x);

struct RunFailure {
  std::string algorithm;
  int replicate = 0;
  std::string message;
};

struct CampaignResult {
  ConvergenceTable table;
  std::map<std::string, std::vector<RunHistory>> histories;
  std::vector<RunFailure> failures;
};

/// Runs replications x algorithms on a worker pool, seeds base_seed + r.
/// Writes <out>/<algo>/rep_<r>.jsonl, convergence.csv, convergence.json,
/// distance_<algo>.csv and boxplot_iter{10,20,30}.csv. Throws RunError when
/// every replication of some algorithm failed.
CampaignResult run_campaign(const ProblemSpec& problem, const CampaignConfig& config);

/// Writes the per-algorithm distance series and the 10/20/30 boxplot data.
void write_plot_data(const std::map<std::string, std::vector<RunHistory>>& histories,
                     const Vec& reference_x, const std::filesystem::path& dir);

enum class ReportFormat { csv, json };

/// CSV columns: algorithm, iteration, mean_dist, median_dist, q25, q75.
/// JSON follows docs/convergence.schema.json. Throws PreconditionError on an
/// empty table and IoError on an unwritable path.
void emit_report(const ConvergenceTable& table, ReportFormat format,
                 const std::filesystem::path& path);
ConvergenceTable parse_report_csv(const std::filesystem::path& path);

/// Loads every *.jsonl history below dir, grouped by algorithm.
std::map<std::string, std::vector<RunHistory>> load_histories(
    const std::filesystem::path& dir);

struct ValidationSummary {
  Vec x;  // raw design coordinates of the validated point
  std::vector<double> estimates;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double target = 0.0;  // 1 - alpha
};

/// Re-estimates the probability that every constraint holds at x (raw) with
/// the given constraint GPs, once per repeat with fresh u-points and
/// trajectories drawn from seed + repeat.
ValidationSummary validate_at(const ProblemSpec& problem,
                              const std::vector<std::shared_ptr<const GpPosterior>>& constraint_gps,
                              const Vec& x, int repeats, int M, int N,
                              std::uint64_t seed);

/// Refits the final models of the history and validates its incumbent.
/// Throws PreconditionError when the final incumbent is not feasible.
ValidationSummary validate_final_model(const ProblemSpec& problem,
                                       const RunHistory& history,
                                       int repeats = 500, int M = 1000,
                                       int N = 1000, std::uint64_t seed = 20240);

void write_validation(const ValidationSummary& summary,
                      const std::filesystem::path& dir);

}  // namespace ccbo
