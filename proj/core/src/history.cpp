#include "ccbo/history.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ccbo/errors.hpp"

namespace ccbo {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "ccbo-history/1";

json vec_json(const Vec& v) { return std::vector<double>(v.begin(), v.end()); }

Vec json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Non-finite doubles are stored as null.
double json_double(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json evaluation_json(const Evaluation& e) {
  return {{"x", vec_json(e.x)}, {"u", vec_json(e.u)}, {"f", e.f}, {"g", vec_json(e.g)}};
}

Evaluation json_evaluation(const json& j) {
  return {json_vec(j.at("x")), json_vec(j.at("u")), json_double(j.at("f")), json_vec(j.at("g"))};
}

json incumbent_json(const IncumbentRecord& r) {
  return {{"x", vec_json(r.x)}, {"z_min_feas", r.z_min_feas}, {"feasible", r.feasible}};
}

IncumbentRecord json_incumbent(const json& j) {
  return {json_vec(j.at("x")), json_double(j.at("z_min_feas")), j.at("feasible").get<bool>()};
}

json config_json(const RunConfig& c) {
  return {{"algorithm", to_string(c.algorithm)},
          {"initial_doe_size", c.initial_doe_size},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed},
          {"M", c.M},
          {"N", c.N},
          {"K", c.K},
          {"gp_restarts", c.gp_restarts},
          {"evaluations_per_dim", c.budgets.evaluations_per_dim},
          {"acquisition_starts", c.budgets.acquisition_starts},
          {"sampling_starts", c.budgets.sampling_starts}};
}

RunConfig json_config(const json& j) {
  RunConfig c;
  c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  c.initial_doe_size = j.at("initial_doe_size").get<int>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.M = j.at("M").get<int>();
  c.N = j.at("N").get<int>();
  c.K = j.at("K").get<int>();
  c.gp_restarts = j.at("gp_restarts").get<int>();
  c.budgets.evaluations_per_dim = j.at("evaluations_per_dim").get<int>();
  c.budgets.acquisition_starts = j.at("acquisition_starts").get<int>();
  c.budgets.sampling_starts = j.at("sampling_starts").get<int>();
  return c;
}

}  // namespace

void write_history(const RunHistory& history, std::ostream& out) {
  const auto& evaluations = history.final_design.evaluations();
  const std::size_t doe_size = evaluations.size() - history.records.size();

  json doe = json::array();
  for (std::size_t k = 0; k < doe_size; ++k) doe.push_back(evaluation_json(evaluations[k]));
  json header = {{"type", "header"},  {"format", kFormat}, {"problem", history.problem},
                 {"config", config_json(history.config)}, {"doe", std::move(doe)}};
  if (!history.incumbents.empty()) header["incumbent"] = incumbent_json(history.incumbents.front());
  out << header.dump() << '\n';

  for (std::size_t k = 0; k < history.records.size(); ++k) {
    const IterationRecord& r = history.records[k];
    json line = {{"type", "iteration"},
                 {"t", r.t},
                 {"x_targ", vec_json(r.x_targ)},
                 {"u_next", vec_json(r.u_next)},
                 {"evaluation", evaluation_json(r.evaluation)},
                 {"z_min_feas", r.z_min_feas},
                 {"x_at_incumbent", vec_json(r.x_at_incumbent)},
                 {"incumbent_feasible", r.incumbent_feasible},
                 {"efi", r.efi_value},
                 {"criterion", r.criterion_value},
                 {"solver_status", r.solver_status}};
    if (k + 1 < history.incumbents.size()) line["incumbent_after"] = incumbent_json(history.incumbents[k + 1]);
    out << line.dump() << '\n';
  }

  json last = {{"type", "final"},
               {"iterations", history.records.size()},
               {"design_size", evaluations.size()}};
  if (!history.incumbents.empty()) last["incumbent"] = incumbent_json(history.incumbents.back());
  out << last.dump() << '\n';
}

void write_history(const RunHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  write_history(history, out);
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

RunHistory read_history(std::istream& in) {
  RunHistory history;
  std::vector<Evaluation> evaluations;
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  bool seen_final = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (j.at("format").get<std::string>() != kFormat) throw ConfigError("unsupported history format");
        history.problem = j.at("problem").get<std::string>();
        history.config = json_config(j.at("config"));
        for (const auto& e : j.at("doe")) evaluations.push_back(json_evaluation(e));
        if (j.contains("incumbent")) history.incumbents.push_back(json_incumbent(j.at("incumbent")));
        seen_header = true;
      } else if (type == "iteration") {
        if (!seen_header) throw ConfigError("iteration before header");
        IterationRecord r;
        r.t = j.at("t").get<int>();
        r.x_targ = json_vec(j.at("x_targ"));
        r.u_next = json_vec(j.at("u_next"));
        r.evaluation = json_evaluation(j.at("evaluation"));
        r.z_min_feas = json_double(j.at("z_min_feas"));
        r.x_at_incumbent = json_vec(j.at("x_at_incumbent"));
        r.incumbent_feasible = j.at("incumbent_feasible").get<bool>();
        r.efi_value = json_double(j.at("efi"));
        r.criterion_value = json_double(j.at("criterion"));
        r.solver_status = j.at("solver_status").get<std::string>();
        if (j.contains("incumbent_after")) history.incumbents.push_back(json_incumbent(j.at("incumbent_after")));
        evaluations.push_back(r.evaluation);
        history.records.push_back(std::move(r));
      } else if (type == "final") {
        seen_final = true;
      } else {
        throw ConfigError(fmt::format("unknown record type '{}'", type));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed history at line {}: {}", line_no, e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("malformed history at line {}: {}", line_no, e.what()));
  }
  if (!seen_header || !seen_final) throw ConfigError("history is truncated");
  history.final_design = JointDesign::restore(std::move(evaluations));
  return history;
}

RunHistory read_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  return read_history(in);
}

void write_timing_csv(const RunHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << "iteration,wall_time_s\n";
  for (const auto& r : history.records) out << fmt::format("{},{:.6f}\n", r.t, r.wall_time.count());
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace ccbo
