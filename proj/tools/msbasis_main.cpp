#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "msbasis/errors.hpp"
#include "msbasis/harness.hpp"

namespace {

using msbasis::ExperimentConfig;

struct CliOverrides {
  std::string config_path;
  std::string coeff;
  std::uint64_t seed = 0;
  double contrast = 0.0;
  std::string rhs;
  std::vector<int> variants;
  std::vector<int> m;
  std::vector<int> nc;
  int nf = 0;
  std::string out;
  std::string store;
  int threads = 0;
  bool desk = false;

  CLI::Option* coeff_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* contrast_opt = nullptr;
  CLI::Option* rhs_opt = nullptr;
  CLI::Option* variants_opt = nullptr;
  CLI::Option* m_opt = nullptr;
  CLI::Option* nc_opt = nullptr;
  CLI::Option* nf_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* store_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void register_options(CLI::App* sub, CliOverrides& o) {
  sub->add_option("--config", o.config_path, "Experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  o.coeff_opt = sub->add_option("--coeff", o.coeff,
                                "Coefficient family: trig, random, contrast or unit");
  o.seed_opt = sub->add_option("--seed", o.seed, "Seed for the random family");
  o.contrast_opt =
      sub->add_option("--contrast", o.contrast, "Contrast M for the contrast family");
  o.rhs_opt = sub->add_option(
      "--rhs", o.rhs,
      "Right-hand side: const_minus_one, poly_x1p4_x2p3 or expression:<text>");
  o.variants_opt =
      sub->add_option("--variant", o.variants, "Solver variants to run (1, 2 or 3)");
  o.m_opt = sub->add_option("--m", o.m, "Enrichment depths to run");
  o.nc_opt = sub->add_option("--nc", o.nc, "Coarse mesh sizes to run");
  o.nf_opt = sub->add_option("--nf", o.nf, "Fine mesh size");
  o.out_opt = sub->add_option("--out", o.out, "Output directory for reports and CSVs");
  o.store_opt = sub->add_option("--store", o.store, "Offline store directory");
  o.threads_opt = sub->add_option("--threads", o.threads,
                                  "Worker threads (0 = MSBASIS_THREADS or all cores)");
  sub->add_flag("--desk", o.desk,
                "Desk preset: nf=256, nc=16, m=1..4 for fast local runs");
}

msbasis::RhsSpec parse_rhs_flag(const std::string& text) {
  msbasis::RhsSpec spec;
  const std::string prefix = "expression:";
  if (text.rfind(prefix, 0) == 0) {
    spec.kind = "expression";
    spec.expression = text.substr(prefix.size());
  } else {
    spec.kind = text;
  }
  return spec;
}

ExperimentConfig make_config(const CliOverrides& o) {
  ExperimentConfig cfg = msbasis::load_config(o.config_path);
  if (o.desk) {
    cfg.nf = 256;
    cfg.nc_list = {16};
    cfg.m_list = {1, 2, 3, 4};
  }
  if (o.coeff_opt->count()) cfg.coeff_family = msbasis::family_from_config_name(o.coeff);
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (o.contrast_opt->count()) cfg.contrast = o.contrast;
  if (o.rhs_opt->count()) cfg.rhs = parse_rhs_flag(o.rhs);
  if (o.variants_opt->count()) cfg.variants = o.variants;
  if (o.m_opt->count()) cfg.m_list = o.m;
  if (o.nc_opt->count()) cfg.nc_list = o.nc;
  if (o.nf_opt->count()) cfg.nf = o.nf;
  if (o.out_opt->count()) cfg.output_dir = o.out;
  if (o.store_opt->count()) cfg.store_path = o.store;
  if (o.threads_opt->count()) cfg.parallelism = o.threads;
  return cfg;
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const msbasis::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const msbasis::ProvenanceMismatch& e) {
    std::fprintf(stderr, "provenance mismatch: %s\n", e.what());
    return 1;
  } catch (const msbasis::NonNestedMesh& e) {
    std::fprintf(stderr, "mesh error: %s\n", e.what());
    return 1;
  } catch (const msbasis::DegenerateMesh& e) {
    std::fprintf(stderr, "mesh error: %s\n", e.what());
    return 1;
  } catch (const msbasis::NonPositiveCoefficient& e) {
    std::fprintf(stderr, "coefficient error: %s\n", e.what());
    return 1;
  } catch (const msbasis::Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
}

void print_records(const std::vector<msbasis::RunRecord>& records) {
  for (const msbasis::RunRecord& rec : records)
    std::printf("nc=%d m=%d k=%d e_E=%.6e e_L2=%.6e store=%s\n", rec.nc, rec.m,
                rec.variant, rec.e_energy, rec.e_l2,
                rec.store_reused ? "reused" : "built");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale edge-basis solver for elliptic problems with rough coefficients"};
  app.require_subcommand(1);

  CliOverrides off_opts, solve_opts, conv_opts;
  CLI::App* offline =
      app.add_subcommand("offline", "Build the per-edge bases and write the store");
  register_options(offline, off_opts);
  CLI::App* solve =
      app.add_subcommand("solve", "Run the online stage and write JSON reports");
  register_options(solve, solve_opts);
  CLI::App* convergence =
      app.add_subcommand("convergence", "Run a sweep and write CSV tables");
  register_options(convergence, conv_opts);
  CLI::App* check = app.add_subcommand("check", "Run the property suite");

  CLI11_PARSE(app, argc, argv);

  if (offline->parsed())
    return guarded([&] {
      const ExperimentConfig cfg = make_config(off_opts);
      const int written = msbasis::cli_offline(cfg);
      std::printf("wrote %d store(s) under %s\n", written, cfg.store_path.c_str());
    });
  if (solve->parsed())
    return guarded([&] {
      const ExperimentConfig cfg = make_config(solve_opts);
      print_records(msbasis::cli_solve(cfg));
      std::printf("reports written to %s\n", cfg.output_dir.c_str());
    });
  if (convergence->parsed())
    return guarded([&] {
      const ExperimentConfig cfg = make_config(conv_opts);
      print_records(msbasis::cli_convergence(cfg));
      std::printf("tables written to %s/sweep_H.csv and %s/sweep_m.csv\n",
                  cfg.output_dir.c_str(), cfg.output_dir.c_str());
    });
  if (check->parsed()) {
    const msbasis::PropertyReport report = msbasis::run_property_suite();
    for (const msbasis::PropertyResult& r : report.entries)
      std::printf("[%s] %s (measured %.3e) %s\n", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.measured, r.detail.c_str());
    std::printf("%zu checks, %s\n", report.entries.size(),
                report.all_passed() ? "all passed" : "FAILURES present");
    return report.all_passed() ? 0 : 1;
  }
  return 0;
}
