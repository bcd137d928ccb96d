#include "msbasis/store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <vector>

#include "msbasis/errors.hpp"

namespace msbasis {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void append_le(std::vector<char>& out, double v) {
  char raw[sizeof(double)];
  std::memcpy(raw, &v, sizeof(double));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(raw), std::end(raw));
  out.insert(out.end(), std::begin(raw), std::end(raw));
}

double read_le(const char* p) {
  char raw[sizeof(double)];
  std::memcpy(raw, p, sizeof(double));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(raw), std::end(raw));
  double v;
  std::memcpy(&v, raw, sizeof(double));
  return v;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

void save_edge_basis(const EdgeBasisSet& basis, const std::string& dir) {
  const int nb = basis.nc > 0 ? basis.nf / basis.nc : 0;
  if (nb < 2) throw ConfigError("basis carries an invalid grid descriptor");
  fs::create_directories(dir);

  std::vector<char> payload;
  json edges = json::array();
  for (size_t e = 0; e < basis.edges.size(); ++e) {
    const EdgeRecord& rec = basis.edges[e];
    json entry;
    entry["id"] = e;
    entry["offset"] = payload.size();
    entry["stored"] = rec.functions.size();
    entry["m_e"] = rec.m_e;
    entry["rank_capped"] = rec.rank_capped;
    entry["lambda"] = std::vector<double>(rec.lambda.data(),
                                          rec.lambda.data() + rec.lambda.size());
    edges.push_back(std::move(entry));
    for (const EdgeFunction& fn : rec.functions) {
      if (fn.values.size() != nb + 1)
        throw DimensionMismatch("edge function length does not match the grid");
      for (Eigen::Index j = 0; j < fn.values.size(); ++j)
        append_le(payload, fn.values[j]);
    }
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["nc"] = basis.nc;
  manifest["nf"] = basis.nf;
  manifest["coefficient"] = {
      {"family", family_name(basis.family)},
      {"hash", basis.coeff_hash},
      {"params", {{"seed", basis.params.seed}, {"contrast", basis.params.contrast}}}};
  manifest["edges"] = std::move(edges);

  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
  write_file(fs::path(dir) / "payload.bin", std::string(payload.begin(), payload.end()));
}

EdgeBasisSet load_edge_basis(const std::string& dir, const GridHierarchy& g,
                             const CoefficientField& field) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  if (!fs::exists(manifest_path))
    throw ConfigError("no offline store at " + dir);

  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed store manifest: ") + e.what());
  }

  try {
    if (manifest.at("format_version").get<int>() != 1)
      throw ConfigError("unsupported store format version");
    EdgeBasisSet basis;
    basis.nc = manifest.at("nc").get<int>();
    basis.nf = manifest.at("nf").get<int>();
    const auto& coeff = manifest.at("coefficient");
    basis.coeff_hash = coeff.at("hash").get<std::uint64_t>();
    basis.params.seed = coeff.at("params").at("seed").get<std::uint64_t>();
    basis.params.contrast = coeff.at("params").at("contrast").get<double>();
    const std::string fam = coeff.at("family").get<std::string>();
    for (CoeffFamily f : {CoeffFamily::unit, CoeffFamily::multiscale_trig,
                          CoeffFamily::random_field, CoeffFamily::high_contrast,
                          CoeffFamily::custom})
      if (family_name(f) == fam) basis.family = f;

    if (basis.nc != g.nc || basis.nf != g.nf)
      throw ProvenanceMismatch("store was built for a different grid");
    if (basis.coeff_hash != field.hash())
      throw ProvenanceMismatch("store was built for a different coefficient");

    const std::string payload = read_file(fs::path(dir) / "payload.bin");
    const int stride = (g.nb + 1) * static_cast<int>(sizeof(double));

    const auto& edges = manifest.at("edges");
    if (edges.size() != static_cast<size_t>(g.num_edges()))
      throw ProvenanceMismatch("store edge count does not match the grid");
    basis.edges.resize(edges.size());
    for (const auto& entry : edges) {
      const size_t id = entry.at("id").get<size_t>();
      if (id >= basis.edges.size()) throw ConfigError("store edge id out of range");
      EdgeRecord& rec = basis.edges[id];
      const size_t offset = entry.at("offset").get<size_t>();
      const int stored = entry.at("stored").get<int>();
      rec.m_e = entry.at("m_e").get<int>();
      rec.rank_capped = entry.at("rank_capped").get<bool>();
      const std::vector<double> lam = entry.at("lambda").get<std::vector<double>>();
      rec.lambda = Eigen::Map<const Eigen::VectorXd>(lam.data(), lam.size());
      if (rec.m_e < 0 || rec.m_e > stored)
        throw ConfigError("store depth entry is inconsistent");
      if (offset + static_cast<size_t>(stored) * stride > payload.size())
        throw ConfigError("store payload is truncated");
      rec.functions.resize(stored);
      for (int k = 0; k < stored; ++k) {
        EdgeFunction& fn = rec.functions[k];
        fn.edge = static_cast<int>(id);
        fn.values.resize(g.nb + 1);
        const char* base = payload.data() + offset + static_cast<size_t>(k) * stride;
        for (int j = 0; j <= g.nb; ++j)
          fn.values[j] = read_le(base + j * sizeof(double));
      }
    }
    return basis;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed store manifest: ") + e.what());
  }
}

bool edge_basis_store_exists(const std::string& dir) {
  return std::filesystem::exists(std::filesystem::path(dir) / "manifest.json") &&
         std::filesystem::exists(std::filesystem::path(dir) / "payload.bin");
}

}  // namespace msbasis
