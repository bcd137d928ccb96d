#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msbasis/coefficient.hpp"
#include "msbasis/expression.hpp"
#include "msbasis/galerkin.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis {

/// One experiment: a coefficient, a right-hand side, and the sweep lists.
/// Loaded from a JSON config file; CLI flags override individual fields.
struct ExperimentConfig {
  CoeffFamily coeff_family = CoeffFamily::multiscale_trig;
  std::uint64_t seed = 1;
  double contrast = 1024.0;
  RhsSpec rhs;
  std::vector<int> nc_list{32};
  int nf = 1024;
  std::vector<int> m_list{2};
  std::vector<int> variants{1};
  std::string output_dir = ".";
  std::string store_path;
  int parallelism = 0;  // 0 = use MSBASIS_THREADS / hardware concurrency
};

/// Parses a config from JSON text. Unknown keys and wrong value types are
/// rejected with ConfigError so that typos never silently fall back to
/// defaults.
ExperimentConfig parse_config_json(const std::string& text);

/// Reads and parses a config file; ConfigError when unreadable.
ExperimentConfig load_config(const std::string& path);

/// Checks mesh nesting, sweep lists and coefficient parameters; resolves the
/// rhs descriptor once to surface expression errors early. Throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

/// Canonical JSON rendering of a config (sorted keys, two-space indent).
/// Embedded into reports and hashed for provenance.
std::string config_json(const ExperimentConfig& cfg);

/// Builds the coefficient field the config describes on the given grid.
CoefficientField build_field(const GridHierarchy& g, const ExperimentConfig& cfg);

/// Short config-file spelling of a family ("trig", "random", ...).
std::string family_config_name(CoeffFamily family);

/// Inverse of family_config_name; also accepts the long enum spellings.
CoeffFamily family_from_config_name(const std::string& name);

/// One solved (nc, m, variant) combination of a sweep.
struct RunRecord {
  int nc = 0;
  int m = 0;
  int variant = 0;
  double e_energy = 0.0;
  double e_l2 = 0.0;
  SolveTimings timings;
  bool store_reused = false;
  int pruned = 0;
};

/// Offline stage: builds the per-edge bases for every nc in the sweep to the
/// depth max(m_list) and stores them under store_path/nc_<nc>. Returns the
/// number of stores written. Requires store_path to be set.
int cli_offline(const ExperimentConfig& cfg);

/// Online stage: for each nc loads the matching store when present (else
/// builds the basis in memory), solves every (m, variant) combination and
/// writes one JSON report per run into output_dir. Returns the records in
/// nc-major, then m, then variant order.
std::vector<RunRecord> cli_solve(const ExperimentConfig& cfg);

/// Runs the same sweep as cli_solve and additionally emits sweep_H.csv
/// (nc,m,variant,e_E,e_L2 over the full sweep) and sweep_m.csv
/// (m,variant,e_E,e_L2 for the first nc) into output_dir.
std::vector<RunRecord> cli_convergence(const ExperimentConfig& cfg);

struct PropertyResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyResult> entries;
  bool all_passed() const;
};

/// Exercises every module invariant on small grids with all coefficient
/// families. Never throws; failures (including exceptions) become entries.
/// Designed to finish in well under a minute.
PropertyReport run_property_suite();

}  // namespace msbasis
