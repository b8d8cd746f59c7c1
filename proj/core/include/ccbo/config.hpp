#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccbo/driver.hpp"
#include "ccbo/problem.hpp"

namespace ccbo {

/// Either a registered problem name, or a custom problem given by
/// expressions and bounds.
struct ProblemDefinition {
  std::string name = "analytic-2x2";
  std::optional<std::string> objective;
  std::vector<std::string> constraints;
  std::vector<Interval> x_bounds;
  std::vector<Interval> u_bounds;
  std::optional<double> alpha;
  std::optional<Vec> reference;
};

struct ReferenceSettings {
  int grid_res = 30;
  int mc_size = 1 << 14;
  int refine_levels = 0;
};

struct ValidateSettings {
  int repeats = 500;
  int M = 1000;
  int N = 1000;
  std::uint64_t seed = 20240;
};

struct CampaignSettings {
  std::vector<Algorithm> algorithms{Algorithm::efisur, Algorithm::efirand,
                                    Algorithm::ceidevnum};
  int replications = 20;
  std::uint64_t base_seed = 0;
  std::filesystem::path output = "campaign";
  int workers = 0;  // 0: hardware concurrency
  // "builtin", "computed", or an explicit comma-separated point.
  std::string reference = "builtin";
};

/// Flat key = value document with [problem], [run], [campaign],
/// [reference], [validate] and per-algorithm [efisur] / [efirand] /
/// [ceidevnum] sections overriding [run]. See docs/config.md.
struct CliConfig {
  ProblemDefinition problem;
  RunConfig run;
  std::map<Algorithm, RunConfig> per_algorithm;
  CampaignSettings campaign;
  ReferenceSettings reference;
  ValidateSettings validate;

  RunConfig run_config_for(Algorithm algorithm) const;
};

// All parse errors are ConfigError.
CliConfig parse_config(std::istream& in);
CliConfig load_config(const std::filesystem::path& path);

// Throws ConfigError for unknown names or invalid custom definitions.
ProblemSpec build_problem(const ProblemDefinition& definition);

}  // namespace ccbo
