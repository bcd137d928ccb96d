#include "msbasis/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "msbasis/edge_basis.hpp"
#include "msbasis/errors.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/parallel.hpp"
#include "msbasis/store.hpp"

namespace msbasis {

namespace {

using nlohmann::json;

std::uint64_t fnv1a_bytes(std::uint64_t state, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    state ^= p[i];
    state *= 1099511628211ull;
  }
  return state;
}

std::uint64_t fnv1a_u64(std::uint64_t state, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  return fnv1a_bytes(state, bytes, 8);
}

std::uint64_t fnv1a_double(std::uint64_t state, double v) {
  return fnv1a_u64(state, std::bit_cast<std::uint64_t>(v));
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> int_list(const json& v, const std::string& key) {
  std::vector<int> out;
  if (v.is_number_integer()) {
    out.push_back(v.get<int>());
    return out;
  }
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer())
        throw ConfigError("config key '" + key + "' entries must be integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  throw ConfigError("config key '" + key + "' must be an integer or an array of integers");
}

int int_scalar(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::string string_scalar(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool found = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        found = true;
        break;
      }
    if (!found) throw ConfigError("unknown config key '" + it.key() + "' in " + where);
  }
}

std::string store_dir(const ExperimentConfig& cfg, int nc) {
  return cfg.store_path + "/nc_" + std::to_string(nc);
}

int offline_depth(const ExperimentConfig& cfg) {
  int depth = 1;
  for (int m : cfg.m_list) depth = std::max(depth, m);
  return depth;
}

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::uint64_t basis_content_hash(const EdgeBasisSet& basis) {
  std::uint64_t state = 1469598103934665603ull;
  state = fnv1a_u64(state, static_cast<std::uint64_t>(basis.nc));
  state = fnv1a_u64(state, static_cast<std::uint64_t>(basis.nf));
  state = fnv1a_u64(state, basis.coeff_hash);
  state = fnv1a_u64(state, basis.edges.size());
  for (const auto& rec : basis.edges) {
    state = fnv1a_u64(state, static_cast<std::uint64_t>(rec.rank_capped));
    state = fnv1a_u64(state, static_cast<std::uint64_t>(rec.lambda.size()));
    for (Eigen::Index i = 0; i < rec.lambda.size(); ++i)
      state = fnv1a_double(state, rec.lambda[i]);
    state = fnv1a_u64(state, rec.functions.size());
    for (const auto& fn : rec.functions)
      for (double v : fn.values) state = fnv1a_double(state, v);
  }
  return state;
}

json config_object(const ExperimentConfig& cfg) {
  json j;
  j["coefficient"] = {{"family", family_config_name(cfg.coeff_family)},
                      {"seed", cfg.seed},
                      {"contrast", cfg.contrast}};
  json rhs;
  rhs["kind"] = cfg.rhs.kind;
  if (cfg.rhs.kind == "expression") rhs["expression"] = cfg.rhs.expression;
  j["rhs"] = rhs;
  j["nc"] = cfg.nc_list;
  j["nf"] = cfg.nf;
  j["m"] = cfg.m_list;
  j["variants"] = cfg.variants;
  j["output_dir"] = cfg.output_dir;
  j["store_path"] = cfg.store_path;
  j["parallelism"] = cfg.parallelism;
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

void write_report(const ExperimentConfig& cfg, const GridHierarchy& g,
                  const CoefficientField& field, const SolutionReport& rep, int m,
                  int num_dofs, std::uint64_t store_hash, bool store_reused,
                  const std::string& store) {
  json j;
  j["variant"] = rep.variant;
  j["nc"] = g.nc;
  j["nf"] = g.nf;
  j["m"] = m;
  j["coefficient"] = {{"family", family_config_name(field.family)},
                      {"seed", field.params.seed},
                      {"contrast", field.params.contrast},
                      {"hash", field.hash()}};
  if (!field.warning.empty()) j["coefficient"]["warning"] = field.warning;
  json rhs;
  rhs["kind"] = cfg.rhs.kind;
  if (cfg.rhs.kind == "expression") rhs["expression"] = cfg.rhs.expression;
  j["rhs"] = rhs;
  j["e_energy"] = rep.e_energy;
  j["e_l2"] = rep.e_l2;
  j["ref_energy_norm"] = rep.ref_energy_norm;
  j["ref_l2_norm"] = rep.ref_l2_norm;
  j["num_dofs"] = num_dofs;
  j["pruned_dofs"] = rep.pruned_dofs;
  j["epsilon_e"] = rep.epsilon_e;
  j["timings"] = {{"space_seconds", rep.timings.space_seconds},
                  {"assemble_seconds", rep.timings.assemble_seconds},
                  {"solve_seconds", rep.timings.solve_seconds},
                  {"bubble_seconds", rep.timings.bubble_seconds}};
  j["store"] = {{"path", store}, {"reused", store_reused}, {"hash", store_hash}};
  const std::string cfg_text = config_json(cfg);
  j["config_hash"] = fnv1a_bytes(1469598103934665603ull, cfg_text.data(), cfg_text.size());
  j["config"] = config_object(cfg);
  const std::string name = cfg.output_dir + "/report_nc" + std::to_string(g.nc) + "_m" +
                           std::to_string(m) + "_k" + std::to_string(rep.variant) + ".json";
  write_text_file(name, j.dump(2) + "\n");
}

std::vector<RunRecord> run_all(const ExperimentConfig& cfg, bool write_reports) {
  validate_config(cfg);
  set_worker_cap(cfg.parallelism);
  std::vector<RunRecord> records;
  if (cfg.m_list.empty()) return records;
  std::filesystem::create_directories(cfg.output_dir);
  const RhsEvaluator f = make_rhs(cfg.rhs);
  const bool need_osb = contains(cfg.variants, 3);
  bool need_bubble = false;
  for (int k : cfg.variants) need_bubble = need_bubble || k >= 2;
  const int depth = offline_depth(cfg);
  for (int nc : cfg.nc_list) {
    const GridHierarchy g = build_hierarchy(nc, cfg.nf);
    const CoefficientField field = build_field(g, cfg);
    EdgeBasisSet basis;
    bool store_reused = false;
    std::string dir;
    if (!cfg.store_path.empty()) dir = store_dir(cfg, nc);
    if (!dir.empty() && edge_basis_store_exists(dir)) {
      basis = load_edge_basis(dir, g, field);
      store_reused = true;
      if (need_osb) attach_os_bubbles(g, field, basis, f);
    } else {
      basis = build_edge_basis(g, field, depth, need_osb ? &f : nullptr);
    }
    const std::uint64_t store_hash = basis_content_hash(basis);
    const FineFunction u_ref = reference_solve(g, field, f);
    FineFunction bubble;
    if (need_bubble) bubble = elementwise_bubble(g, field, f);
    for (int m : cfg.m_list) {
      set_uniform_truncation(basis, m);
      const GalerkinSpace space = build_space(g, field, basis, need_osb);
      for (int k : cfg.variants) {
        SolutionReport rep = solve_variant(g, field, space, f, k,
                                           k >= 2 ? &bubble : nullptr);
        attach_errors(rep, g, field, u_ref);
        if (write_reports)
          write_report(cfg, g, field, rep, m, space.num_dofs(), store_hash, store_reused,
                       dir);
        RunRecord rec;
        rec.nc = nc;
        rec.m = m;
        rec.variant = k;
        rec.e_energy = rep.e_energy;
        rec.e_l2 = rep.e_l2;
        rec.timings = rep.timings;
        rec.store_reused = store_reused;
        rec.pruned = static_cast<int>(rep.pruned_dofs.size());
        records.push_back(rec);
      }
    }
  }
  return records;
}

}  // namespace

std::string family_config_name(CoeffFamily family) {
  switch (family) {
    case CoeffFamily::unit: return "unit";
    case CoeffFamily::multiscale_trig: return "trig";
    case CoeffFamily::random_field: return "random";
    case CoeffFamily::high_contrast: return "contrast";
    case CoeffFamily::custom: break;
  }
  throw ConfigError("coefficient family has no config spelling");
}

CoeffFamily family_from_config_name(const std::string& name) {
  if (name == "unit") return CoeffFamily::unit;
  if (name == "trig" || name == "multiscale_trig") return CoeffFamily::multiscale_trig;
  if (name == "random" || name == "random_field") return CoeffFamily::random_field;
  if (name == "contrast" || name == "high_contrast") return CoeffFamily::high_contrast;
  throw ConfigError("unknown coefficient family '" + name + "'");
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "the config root",
             {"coefficient", "rhs", "nc", "nf", "m", "variants", "output_dir",
              "store_path", "parallelism"});
  ExperimentConfig cfg;
  if (j.contains("coefficient")) {
    const json& c = j["coefficient"];
    if (!c.is_object()) throw ConfigError("config key 'coefficient' must be an object");
    check_keys(c, "'coefficient'", {"family", "seed", "contrast"});
    if (c.contains("family"))
      cfg.coeff_family = family_from_config_name(string_scalar(c["family"], "family"));
    if (c.contains("seed")) {
      const json& s = c["seed"];
      if (s.is_number_unsigned())
        cfg.seed = s.get<std::uint64_t>();
      else if (s.is_number_integer() && s.get<std::int64_t>() >= 0)
        cfg.seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
      else
        throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    if (c.contains("contrast")) {
      if (!c["contrast"].is_number())
        throw ConfigError("config key 'contrast' must be a number");
      cfg.contrast = c["contrast"].get<double>();
    }
  }
  if (j.contains("rhs")) {
    const json& r = j["rhs"];
    if (!r.is_object()) throw ConfigError("config key 'rhs' must be an object");
    check_keys(r, "'rhs'", {"kind", "expression"});
    if (r.contains("kind")) cfg.rhs.kind = string_scalar(r["kind"], "kind");
    if (r.contains("expression"))
      cfg.rhs.expression = string_scalar(r["expression"], "expression");
  }
  if (j.contains("nc")) cfg.nc_list = int_list(j["nc"], "nc");
  if (j.contains("nf")) cfg.nf = int_scalar(j["nf"], "nf");
  if (j.contains("m")) cfg.m_list = int_list(j["m"], "m");
  if (j.contains("variants")) cfg.variants = int_list(j["variants"], "variants");
  if (j.contains("output_dir")) cfg.output_dir = string_scalar(j["output_dir"], "output_dir");
  if (j.contains("store_path")) cfg.store_path = string_scalar(j["store_path"], "store_path");
  if (j.contains("parallelism")) cfg.parallelism = int_scalar(j["parallelism"], "parallelism");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.coeff_family == CoeffFamily::custom)
    throw ConfigError("custom coefficient fields cannot be configured");
  if (cfg.nf < 4) throw ConfigError("nf must be at least 4");
  if (cfg.nc_list.empty()) throw ConfigError("nc list must not be empty");
  for (int nc : cfg.nc_list) {
    if (nc < 2) throw ConfigError("nc must be at least 2, got " + std::to_string(nc));
    if (cfg.nf % nc != 0)
      throw ConfigError("nc=" + std::to_string(nc) + " does not divide nf=" +
                        std::to_string(cfg.nf));
    if (cfg.nf / nc < 2)
      throw ConfigError("nf/nc must be at least 2, got nc=" + std::to_string(nc));
  }
  for (int m : cfg.m_list)
    if (m < 0) throw ConfigError("m must be non-negative, got " + std::to_string(m));
  if (cfg.variants.empty()) throw ConfigError("variants list must not be empty");
  for (int k : cfg.variants)
    if (k < 1 || k > 3)
      throw ConfigError("variants must lie in {1,2,3}, got " + std::to_string(k));
  if (!(cfg.contrast > 0.0) || !std::isfinite(cfg.contrast))
    throw ConfigError("contrast must be positive and finite");
  if (cfg.parallelism < 0) throw ConfigError("parallelism must be non-negative");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  make_rhs(cfg.rhs);
}

std::string config_json(const ExperimentConfig& cfg) {
  return config_object(cfg).dump(2);
}

CoefficientField build_field(const GridHierarchy& g, const ExperimentConfig& cfg) {
  switch (cfg.coeff_family) {
    case CoeffFamily::unit: return build_unit_field(g);
    case CoeffFamily::multiscale_trig: return build_multiscale_trig(g);
    case CoeffFamily::random_field: return build_random_field(g, cfg.seed);
    case CoeffFamily::high_contrast: return build_high_contrast(g, cfg.contrast);
    case CoeffFamily::custom: break;
  }
  throw ConfigError("custom coefficient fields cannot be configured");
}

int cli_offline(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.store_path.empty())
    throw ConfigError("offline stage requires store_path");
  set_worker_cap(cfg.parallelism);
  const int depth = offline_depth(cfg);
  int written = 0;
  for (int nc : cfg.nc_list) {
    const GridHierarchy g = build_hierarchy(nc, cfg.nf);
    const CoefficientField field = build_field(g, cfg);
    const EdgeBasisSet basis = build_edge_basis(g, field, depth, nullptr);
    save_edge_basis(basis, store_dir(cfg, nc));
    ++written;
  }
  return written;
}

std::vector<RunRecord> cli_solve(const ExperimentConfig& cfg) {
  return run_all(cfg, true);
}

std::vector<RunRecord> cli_convergence(const ExperimentConfig& cfg) {
  const std::vector<RunRecord> records = run_all(cfg, false);
  std::filesystem::create_directories(cfg.output_dir);
  std::string sweep_h = "nc,m,variant,e_E,e_L2\n";
  std::string sweep_m = "m,variant,e_E,e_L2\n";
  const int first_nc = cfg.nc_list.empty() ? -1 : cfg.nc_list.front();
  for (const RunRecord& rec : records) {
    sweep_h += std::to_string(rec.nc) + "," + std::to_string(rec.m) + "," +
               std::to_string(rec.variant) + "," + g17(rec.e_energy) + "," +
               g17(rec.e_l2) + "\n";
    if (rec.nc == first_nc)
      sweep_m += std::to_string(rec.m) + "," + std::to_string(rec.variant) + "," +
                 g17(rec.e_energy) + "," + g17(rec.e_l2) + "\n";
  }
  write_text_file(cfg.output_dir + "/sweep_H.csv", sweep_h);
  write_text_file(cfg.output_dir + "/sweep_m.csv", sweep_m);
  return records;
}

}  // namespace msbasis
