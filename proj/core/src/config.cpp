#include "ccbo/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "ccbo/errors.hpp"
#include "ccbo/expression.hpp"

namespace ccbo {

namespace {

using boost::property_tree::ptree;

std::string trimmed(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

std::vector<std::string> split(const std::string& text, const char* separators) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(separators));
  for (auto& p : parts) p = trimmed(p);
  parts.erase(std::remove(parts.begin(), parts.end(), std::string{}), parts.end());
  return parts;
}

double to_double(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  double value = 0.0;
  if (!(in >> value) || !(in >> std::ws).eof())
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  return value;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  return value;
}

int to_int(const std::string& key, const std::string& text) { return static_cast<int>(to_integer(key, text)); }

std::uint64_t to_seed(const std::string& key, const std::string& text) {
  const long long value = to_integer(key, text);
  if (value < 0) throw ConfigError(fmt::format("{}: seeds must be nonnegative", key));
  return static_cast<std::uint64_t>(value);
}

// "-5:5, -5:5" -> intervals
std::vector<Interval> to_intervals(const std::string& key, const std::string& text) {
  std::vector<Interval> out;
  for (const auto& part : split(text, ",")) {
    const auto ends = split(part, ":");
    if (ends.size() != 2) throw ConfigError(fmt::format("{}: expected lower:upper, got '{}'", key, part));
    out.push_back({to_double(key, ends[0]), to_double(key, ends[1])});
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: no intervals given", key));
  return out;
}

Vec to_point(const std::string& key, const std::string& text) {
  const auto parts = split(text, ",");
  Vec v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(key, parts[i]);
  return v;
}

void check_keys(const ptree& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section) {
    if (!allowed.count(key)) throw ConfigError(fmt::format("unknown key '{}' in [{}]", key, name));
  }
}

const std::set<std::string> kRunKeys{"algorithm",   "doe",        "iterations",          "seed",
                                     "M",           "N",          "K",                   "gp_restarts",
                                     "evaluations_per_dim", "acquisition_starts", "sampling_starts"};

void apply_run(const ptree& section, const std::string& name, RunConfig& run) {
  check_keys(section, name, kRunKeys);
  for (const auto& [key, node] : section) {
    const std::string value = trimmed(node.data());
    const std::string where = fmt::format("[{}] {}", name, key);
    if (key == "algorithm") run.algorithm = algorithm_from_string(value);
    else if (key == "doe") run.initial_doe_size = to_int(where, value);
    else if (key == "iterations") run.max_iterations = to_int(where, value);
    else if (key == "seed") run.seed = to_seed(where, value);
    else if (key == "M") run.M = to_int(where, value);
    else if (key == "N") run.N = to_int(where, value);
    else if (key == "K") run.K = to_int(where, value);
    else if (key == "gp_restarts") run.gp_restarts = to_int(where, value);
    else if (key == "evaluations_per_dim") run.budgets.evaluations_per_dim = to_int(where, value);
    else if (key == "acquisition_starts") run.budgets.acquisition_starts = to_int(where, value);
    else if (key == "sampling_starts") run.budgets.sampling_starts = to_int(where, value);
  }
}

void apply_problem(const ptree& section, ProblemDefinition& def) {
  check_keys(section, "problem", {"name", "objective", "constraints", "x_bounds", "u_bounds", "alpha", "reference"});
  for (const auto& [key, node] : section) {
    const std::string value = trimmed(node.data());
    const std::string where = fmt::format("[problem] {}", key);
    if (key == "name") def.name = value;
    else if (key == "objective") def.objective = value;
    else if (key == "constraints") def.constraints = split(value, ";");
    else if (key == "x_bounds") def.x_bounds = to_intervals(where, value);
    else if (key == "u_bounds") def.u_bounds = to_intervals(where, value);
    else if (key == "alpha") def.alpha = to_double(where, value);
    else if (key == "reference") def.reference = to_point(where, value);
  }
}

void apply_campaign(const ptree& section, CampaignSettings& c) {
  check_keys(section, "campaign", {"algorithms", "replications", "base_seed", "output", "workers", "reference"});
  for (const auto& [key, node] : section) {
    const std::string value = trimmed(node.data());
    const std::string where = fmt::format("[campaign] {}", key);
    if (key == "algorithms") {
      c.algorithms.clear();
      for (const auto& name : split(value, ",")) c.algorithms.push_back(algorithm_from_string(name));
    } else if (key == "replications") c.replications = to_int(where, value);
    else if (key == "base_seed") c.base_seed = to_seed(where, value);
    else if (key == "output") c.output = value;
    else if (key == "workers") c.workers = to_int(where, value);
    else if (key == "reference") c.reference = value;
  }
  if (c.replications < 1) throw ConfigError("[campaign] replications must be at least 1");
  if (c.workers < 0) throw ConfigError("[campaign] workers must be nonnegative");
}

void apply_reference(const ptree& section, ReferenceSettings& r) {
  check_keys(section, "reference", {"grid_res", "mc_size", "refine_levels"});
  for (const auto& [key, node] : section) {
    const std::string value = trimmed(node.data());
    const std::string where = fmt::format("[reference] {}", key);
    if (key == "grid_res") r.grid_res = to_int(where, value);
    else if (key == "mc_size") r.mc_size = to_int(where, value);
    else if (key == "refine_levels") r.refine_levels = to_int(where, value);
  }
  if (r.grid_res < 2 || r.mc_size < 1 || r.refine_levels < 0) throw ConfigError("[reference] values out of range");
}

void apply_validate(const ptree& section, ValidateSettings& v) {
  check_keys(section, "validate", {"repeats", "M", "N", "seed"});
  for (const auto& [key, node] : section) {
    const std::string value = trimmed(node.data());
    const std::string where = fmt::format("[validate] {}", key);
    if (key == "repeats") v.repeats = to_int(where, value);
    else if (key == "M") v.M = to_int(where, value);
    else if (key == "N") v.N = to_int(where, value);
    else if (key == "seed") v.seed = to_seed(where, value);
  }
  if (v.repeats < 1 || v.M < 1 || v.N < 1) throw ConfigError("[validate] values must be positive");
}

}  // namespace

RunConfig CliConfig::run_config_for(Algorithm algorithm) const {
  RunConfig config = run;
  if (auto it = per_algorithm.find(algorithm); it != per_algorithm.end()) config = it->second;
  config.algorithm = algorithm;
  return config;
}

CliConfig parse_config(std::istream& in) {
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }

  CliConfig config;
  // [run] first: per-algorithm sections start from it.
  if (auto run = tree.get_child_optional("run")) apply_run(*run, "run", config.run);
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty())
      throw ConfigError(fmt::format("key '{}' outside of any section", name));
    if (name == "run") continue;
    if (name == "problem") apply_problem(section, config.problem);
    else if (name == "campaign") apply_campaign(section, config.campaign);
    else if (name == "reference") apply_reference(section, config.reference);
    else if (name == "validate") apply_validate(section, config.validate);
    else if (name == "efisur" || name == "efirand" || name == "ceidevnum") {
      RunConfig specific = config.run;
      apply_run(section, name, specific);
      specific.algorithm = algorithm_from_string(name);
      config.per_algorithm[specific.algorithm] = specific;
    } else {
      throw ConfigError(fmt::format("unknown section [{}]", name));
    }
  }
  return config;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  return parse_config(in);
}

ProblemSpec build_problem(const ProblemDefinition& def) {
  if (!def.objective) {
    if (!def.constraints.empty() || !def.x_bounds.empty() || !def.u_bounds.empty())
      throw ConfigError("a custom problem needs an objective expression");
    ProblemSpec base = problem_by_name(def.name);
    if (!def.alpha && !def.reference) return base;
    std::vector<Evaluator> constraints;
    for (int i = 0; i < base.num_constraints(); ++i) constraints.push_back(base.constraint(i));
    try {
      ProblemSpec tuned(base.name(), base.bounds_x(), base.dist_u_ptr(), def.alpha.value_or(base.alpha()),
                        base.objective(), std::move(constraints));
      if (def.reference) tuned.set_reference_x(*def.reference);
      else if (base.reference_x() && !def.alpha) tuned.set_reference_x(*base.reference_x());
      return tuned;
    } catch (const PreconditionError& e) {
      throw ConfigError(e.what());
    }
  }

  if (def.x_bounds.empty() || def.u_bounds.empty()) throw ConfigError("a custom problem needs x_bounds and u_bounds");
  if (def.constraints.empty()) throw ConfigError("a custom problem needs at least one constraint");
  const int d = static_cast<int>(def.x_bounds.size());
  const int m = static_cast<int>(def.u_bounds.size());
  auto as_evaluator = [&](const std::string& text) -> Evaluator {
    auto expr = std::make_shared<const Expression>(Expression::parse(text, d, m));
    return [expr](const Vec& x, const Vec& u) { return (*expr)(x, u); };
  };
  std::vector<Evaluator> constraints;
  for (const auto& text : def.constraints) constraints.push_back(as_evaluator(text));
  try {
    ProblemSpec problem(def.name == "analytic-2x2" ? "custom" : def.name, def.x_bounds,
                        std::make_shared<IndependentUniform>(def.u_bounds), def.alpha.value_or(0.05),
                        as_evaluator(*def.objective), std::move(constraints));
    if (def.reference) {
      if (def.reference->size() != d) throw ConfigError("reference point dimension differs from x_bounds");
      problem.set_reference_x(*def.reference);
    }
    return problem;
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace ccbo
