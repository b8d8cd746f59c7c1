#include "ccbo/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "ccbo/errors.hpp"
#include "ccbo/history.hpp"
#include "ccbo/stats.hpp"

namespace ccbo {

namespace fs = std::filesystem;

RunConfig CampaignConfig::run_config(Algorithm algorithm, int replicate) const {
  RunConfig config = run_template;
  if (auto it = per_algorithm.find(algorithm); it != per_algorithm.end()) config = it->second;
  config.algorithm = algorithm;
  config.seed = base_seed + static_cast<std::uint64_t>(replicate);
  return config;
}

const ConvergenceRow* ConvergenceTable::find(const std::string& algorithm, int iteration) const {
  for (const auto& row : rows)
    if (row.algorithm == algorithm && row.iteration == iteration) return &row;
  return nullptr;
}

std::vector<double> incumbent_distances(const RunHistory& history, const Vec& reference_x) {
  std::vector<double> out;
  out.reserve(history.incumbents.size());
  for (const auto& inc : history.incumbents) out.push_back((inc.x - reference_x).norm());
  return out;
}

ConvergenceTable convergence_table(const std::map<std::string, std::vector<RunHistory>>& histories,
                                   const Vec& reference_x) {
  ConvergenceTable table;
  for (const auto& [algorithm, runs] : histories) {
    if (runs.empty()) continue;
    std::vector<std::vector<double>> distances;
    std::size_t length = std::numeric_limits<std::size_t>::max();
    for (const auto& h : runs) {
      distances.push_back(incumbent_distances(h, reference_x));
      length = std::min(length, distances.back().size());
    }
    for (std::size_t it = 0; it < length; ++it) {
      std::vector<double> column;
      for (const auto& d : distances) column.push_back(d[it]);
      table.rows.push_back({algorithm, static_cast<int>(it), stats::mean(column), stats::median(column),
                            stats::quantile(column, 0.25), stats::quantile(column, 0.75)});
    }
  }
  return table;
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

constexpr int kBoxplotIterations[] = {10, 20, 30};

}  // namespace

void write_plot_data(const std::map<std::string, std::vector<RunHistory>>& histories, const Vec& reference_x,
                     const fs::path& dir) {
  make_dirs(dir);
  for (const auto& [algorithm, runs] : histories) {
    const fs::path path = dir / fmt::format("distance_{}.csv", algorithm);
    auto out = open_output(path);
    out << "iteration,replicate,seed,distance\n";
    for (const auto& h : runs) {
      const auto d = incumbent_distances(h, reference_x);
      for (std::size_t it = 0; it < d.size(); ++it)
        out << fmt::format("{},{},{},{:.17g}\n", it, &h - runs.data(), h.config.seed, d[it]);
    }
    finish(out, path);
  }
  for (int iteration : kBoxplotIterations) {
    const fs::path path = dir / fmt::format("boxplot_iter{}.csv", iteration);
    auto out = open_output(path);
    out << "algorithm,replicate,seed,distance\n";
    for (const auto& [algorithm, runs] : histories) {
      for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto d = incumbent_distances(runs[r], reference_x);
        if (static_cast<std::size_t>(iteration) < d.size())
          out << fmt::format("{},{},{},{:.17g}\n", algorithm, r, runs[r].config.seed, d[iteration]);
      }
    }
    finish(out, path);
  }
}

void emit_report(const ConvergenceTable& table, ReportFormat format, const fs::path& path) {
  if (table.empty()) throw PreconditionError("convergence table is empty");
  auto out = open_output(path);
  if (format == ReportFormat::csv) {
    out << "algorithm,iteration,mean_dist,median_dist,q25,q75\n";
    for (const auto& r : table.rows)
      out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.algorithm, r.iteration, r.mean_dist,
                         r.median_dist, r.q25, r.q75);
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows)
      rows.push_back({{"algorithm", r.algorithm},
                      {"iteration", r.iteration},
                      {"mean_dist", r.mean_dist},
                      {"median_dist", r.median_dist},
                      {"q25", r.q25},
                      {"q75", r.q75}});
    out << nlohmann::json{{"format", "ccbo-convergence/1"}, {"rows", std::move(rows)}}.dump(2) << '\n';
  }
  finish(out, path);
}

ConvergenceTable parse_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "algorithm,iteration,mean_dist,median_dist,q25,q75")
    throw ConfigError(fmt::format("{}: unexpected CSV header", path.string()));
  ConvergenceTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw ConfigError(fmt::format("{}: malformed row '{}'", path.string(), line));
    try {
      table.rows.push_back({cells[0], std::stoi(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                            std::stod(cells[4]), std::stod(cells[5])});
    } catch (const std::logic_error&) {
      throw ConfigError(fmt::format("{}: malformed row '{}'", path.string(), line));
    }
  }
  return table;
}

std::map<std::string, std::vector<RunHistory>> load_histories(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("{} is not a directory", dir.string()));
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, std::vector<RunHistory>> out;
  for (const auto& file : files) {
    RunHistory h = read_history(file);
    out[to_string(h.config.algorithm)].push_back(std::move(h));
  }
  for (auto& [name, runs] : out)
    std::stable_sort(runs.begin(), runs.end(),
                     [](const RunHistory& a, const RunHistory& b) { return a.config.seed < b.config.seed; });
  return out;
}

CampaignResult run_campaign(const ProblemSpec& problem, const CampaignConfig& config) {
  if (config.algorithms.empty()) throw PreconditionError("campaign needs at least one algorithm");
  if (config.replications < 1) throw PreconditionError("campaign needs at least one replication");
  if (!problem.reference_x()) throw PreconditionError("campaign needs a reference solution");

  struct Task {
    Algorithm algorithm;
    int replicate;
    std::optional<RunHistory> history;
    std::string error;
  };
  std::vector<Task> tasks;
  for (Algorithm a : config.algorithms)
    for (int r = 0; r < config.replications; ++r) tasks.push_back({a, r, std::nullopt, {}});

  for (const auto& task : tasks) config.run_config(task.algorithm, task.replicate).validate(problem);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      Task& task = tasks[k];
      try {
        task.history = run(problem, config.run_config(task.algorithm, task.replicate));
      } catch (const std::exception& e) {
        task.error = e.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::size_t>(config.workers > 0 ? static_cast<unsigned>(config.workers) : hw);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, tasks.size()); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CampaignResult result;
  for (Algorithm a : config.algorithms) result.histories[to_string(a)];
  for (auto& task : tasks) {
    const std::string name = to_string(task.algorithm);
    if (task.history) {
      result.histories[name].push_back(std::move(*task.history));
    } else {
      result.failures.push_back({name, task.replicate, task.error});
    }
  }

  make_dirs(config.output_dir);
  for (const auto& [name, runs] : result.histories) {
    make_dirs(config.output_dir / name);
    for (const auto& h : runs) {
      const auto replicate = static_cast<std::uint64_t>(h.config.seed - config.base_seed);
      write_history(h, config.output_dir / name / fmt::format("rep_{}.jsonl", replicate));
    }
  }
  if (!result.failures.empty()) {
    const fs::path path = config.output_dir / "failures.csv";
    auto out = open_output(path);
    out << "algorithm,replicate,message\n";
    for (const auto& f : result.failures) {
      std::string message = f.message;
      std::replace(message.begin(), message.end(), ',', ';');
      out << fmt::format("{},{},{}\n", f.algorithm, f.replicate, message);
    }
    finish(out, path);
  }

  std::map<std::string, std::vector<RunHistory>> succeeded;
  for (const auto& [name, runs] : result.histories)
    if (!runs.empty()) succeeded[name] = runs;
  for (const auto& [name, runs] : result.histories)
    if (runs.empty()) throw RunError(fmt::format("every replication of {} failed", name));

  result.table = convergence_table(succeeded, *problem.reference_x());
  emit_report(result.table, ReportFormat::csv, config.output_dir / "convergence.csv");
  emit_report(result.table, ReportFormat::json, config.output_dir / "convergence.json");
  write_plot_data(succeeded, *problem.reference_x(), config.output_dir);
  return result;
}

ValidationSummary validate_at(const ProblemSpec& problem,
                              const std::vector<std::shared_ptr<const GpPosterior>>& constraint_gps,
                              const Vec& x, int repeats, int M, int N, std::uint64_t seed) {
  if (repeats < 1) throw PreconditionError("validation needs at least one repeat");
  if (static_cast<int>(constraint_gps.size()) != problem.num_constraints())
    throw PreconditionError("one GP per constraint is required");
  const Vec x_unit = problem.normalize_x(x);

  ValidationSummary s;
  s.x = x;
  s.target = 1.0 - problem.alpha();
  for (int r = 0; r < repeats; ++r) {
    const CrnSet crn = make_random_crn(problem, M, N, seed + static_cast<std::uint64_t>(r));
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> ok =
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(N, M, true);
    for (int i = 0; i < problem.num_constraints(); ++i) {
      const SliceModel model(constraint_gps[static_cast<std::size_t>(i)], crn.u_unit());
      ok = ok && (model.simulate(model.at(x_unit), crn.normal_block(i)).values.array() <= 0.0);
    }
    s.estimates.push_back(static_cast<double>(ok.count()) / (static_cast<double>(N) * M));
  }
  s.min = *std::min_element(s.estimates.begin(), s.estimates.end());
  s.max = *std::max_element(s.estimates.begin(), s.estimates.end());
  s.q25 = stats::quantile(s.estimates, 0.25);
  s.median = stats::median(s.estimates);
  s.q75 = stats::quantile(s.estimates, 0.75);
  s.mean = stats::mean(s.estimates);
  s.sd = stats::stddev(s.estimates);
  return s;
}

ValidationSummary validate_final_model(const ProblemSpec& problem, const RunHistory& history, int repeats, int M,
                                       int N, std::uint64_t seed) {
  const RunConfig& c = history.config;
  auto crn = std::make_shared<const CrnSet>(make_crn(problem, c.M, c.N, c.seed));
  const ModelState state = build_models(problem, history.final_design, crn, c.gp_restarts);
  if (!state.incumbent.feasible) throw PreconditionError("the final incumbent is not feasible in expectation");
  return validate_at(problem, state.constraints, problem.denormalize_x(state.incumbent.x), repeats, M, N, seed);
}

void write_validation(const ValidationSummary& summary, const fs::path& dir) {
  make_dirs(dir);
  {
    const fs::path path = dir / "validation_estimates.csv";
    auto out = open_output(path);
    out << "repeat,estimate\n";
    for (std::size_t r = 0; r < summary.estimates.size(); ++r)
      out << fmt::format("{},{:.17g}\n", r, summary.estimates[r]);
    finish(out, path);
  }
  const fs::path path = dir / "validation_summary.json";
  auto out = open_output(path);
  const nlohmann::json doc = {{"x", std::vector<double>(summary.x.begin(), summary.x.end())},
                              {"repeats", summary.estimates.size()},
                              {"min", summary.min},
                              {"q25", summary.q25},
                              {"median", summary.median},
                              {"q75", summary.q75},
                              {"max", summary.max},
                              {"mean", summary.mean},
                              {"sd", summary.sd},
                              {"alpha_line", summary.target}};
  out << doc.dump(2) << '\n';
  finish(out, path);
}

}  // namespace ccbo
