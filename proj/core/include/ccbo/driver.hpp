#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccbo/acquisition.hpp"
#include "ccbo/gp.hpp"
#include "ccbo/problem.hpp"
#include "ccbo/quasirandom.hpp"
#include "ccbo/sampling.hpp"

namespace ccbo {

enum class Algorithm { efisur, efirand, ceidevnum };

std::string to_string(Algorithm algorithm);
// Throws ConfigError for unknown names.
Algorithm algorithm_from_string(std::string_view name);

struct SolverBudgets {
  int evaluations_per_dim = 100;
  int acquisition_starts = 5;
  int sampling_starts = 3;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::efisur;
  int initial_doe_size = 8;
  int max_iterations = 56;
  std::uint64_t seed = 0;
  int M = kDefaultCrnM;
  int N = kDefaultCrnN;
  int K = kDefaultQuantizerSize;
  int gp_restarts = 5;
  SolverBudgets budgets;

  // Throws ConfigError.
  void validate(const ProblemSpec& problem) const;
};

struct IterationRecord {
  int t = 0;
  Vec x_targ;
  Vec u_next;
  Evaluation evaluation;
  double z_min_feas = 0.0;
  Vec x_at_incumbent;
  bool incumbent_feasible = false;
  double efi_value = 0.0;
  double criterion_value = 0.0;
  std::string solver_status;
  std::chrono::duration<double> wall_time{0.0};
};

struct IncumbentRecord {
  Vec x;  // raw design coordinates
  double z_min_feas = 0.0;
  bool feasible = false;
};

struct RunHistory {
  std::string problem;
  RunConfig config;
  std::vector<IterationRecord> records;
  JointDesign final_design;
  // incumbents[k] is computed from the models fitted on the DoE plus the
  // first k iterations; size = iterations + 1.
  std::vector<IncumbentRecord> incumbents;

  int iterations() const { return static_cast<int>(records.size()); }
};

/// GPs and acquisition context fitted on one design.
struct ModelState {
  std::shared_ptr<const CrnSet> crn;
  std::shared_ptr<const GpPosterior> objective;
  std::vector<std::shared_ptr<const GpPosterior>> constraints;
  std::shared_ptr<const ZProcess> z;
  std::shared_ptr<AcquisitionContext> acquisition;
  Incumbent incumbent;  // normalized coordinates
};

/// Fits the objective and constraint GPs on the design (falling back to the
/// previous kernels when a fit fails), builds Z and sets z_min_feas from the
/// observed designs. Throws RunError if the data cannot be conditioned.
ModelState build_models(const ProblemSpec& problem, const JointDesign& design,
                        std::shared_ptr<const CrnSet> crn, int gp_restarts,
                        const ModelState* previous = nullptr);

/// Selection steps plugged into the common outer loop.
struct StepChoice {
  Vec x_unit;
  double acquisition_value = 0.0;
  std::string solver_status;
};
using DesignSelector =
    std::function<StepChoice(const ProblemSpec&, const ModelState&, int t)>;
using UncertaintySelector = std::function<std::pair<Vec, double>(
    const ProblemSpec&, const ModelState&, const Vec& x_unit, int t)>;

/// Generic robust BO loop: initial Latin hypercube in the joint space, then
/// per iteration refit, pick x, pick u, evaluate once and augment the design.
RunHistory run_loop(const ProblemSpec& problem, const RunConfig& config,
                    const DesignSelector& select_x,
                    const UncertaintySelector& select_u);

/// x = argmax EFI, u = argmin S at x.
RunHistory run_efisur(const ProblemSpec& problem, const RunConfig& config);
/// x = argmax EFI, u ~ rho_U from a seeded stream independent of the CRN.
RunHistory run_efirand(const ProblemSpec& problem, const RunConfig& config);
/// x = argmax EI s.t. empirical quantiles <= 0, u = argmin DN_c.
RunHistory run_ceidevnum(const ProblemSpec& problem, const RunConfig& config);

RunHistory run(const ProblemSpec& problem, const RunConfig& config);

// Building blocks of the three algorithms, exposed for tests.
StepChoice select_x_by_efi(const ProblemSpec& problem, const ModelState& state,
                           const RunConfig& config, int t);
StepChoice select_x_by_constrained_ei(const ProblemSpec& problem,
                                      const ModelState& state,
                                      const RunConfig& config, int t);
std::pair<Vec, double> select_u_by_deviation_number(const ProblemSpec& problem,
                                                    const ModelState& state,
                                                    const Vec& x_unit,
                                                    const RunConfig& config, int t);

}  // namespace ccbo
