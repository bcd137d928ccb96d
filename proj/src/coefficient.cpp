#include "msbasis/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

namespace msbasis {

namespace {

constexpr double kEps[5] = {1.0 / 5.0, 1.0 / 13.0, 1.0 / 17.0, 1.0 / 31.0,
                            1.0 / 65.0};

std::uint64_t fnv1a(std::uint64_t state, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state ^= p[i];
    state *= 1099511628211ull;
  }
  return state;
}

std::uint64_t fnv1a_u64(std::uint64_t state, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  return fnv1a(state, bytes, 8);
}

std::uint64_t fnv1a_double(std::uint64_t state, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  return fnv1a_u64(state, bits);
}

}  // namespace

std::string family_name(CoeffFamily family) {
  switch (family) {
    case CoeffFamily::unit: return "unit";
    case CoeffFamily::multiscale_trig: return "multiscale_trig";
    case CoeffFamily::random_field: return "random_field";
    case CoeffFamily::high_contrast: return "high_contrast";
    case CoeffFamily::custom: return "custom";
  }
  return "custom";
}

std::uint64_t CoefficientField::hash() const {
  std::uint64_t state = 1469598103934665603ull;
  state = fnv1a_u64(state, static_cast<std::uint64_t>(family));
  state = fnv1a_u64(state, static_cast<std::uint64_t>(nf));
  state = fnv1a_u64(state, params.seed);
  state = fnv1a_double(state, params.contrast);
  for (double v : values) state = fnv1a_double(state, v);
  return state;
}

double multiscale_trig_fraction(int k, double x1, double x2) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double e = kEps[k - 1];
  switch (k) {
    case 1:
      return (1.1 + std::sin(two_pi * x1 / e)) / (1.1 + std::sin(two_pi * x2 / e));
    case 2:
      return (1.1 + std::sin(two_pi * x2 / e)) / (1.1 + std::cos(two_pi * x1 / e));
    case 3:
      return (1.1 + std::cos(two_pi * x1 / e)) / (1.1 + std::sin(two_pi * x2 / e));
    case 4:
      return (1.1 + std::sin(two_pi * x2 / e)) / (1.1 + std::cos(two_pi * x1 / e));
    case 5:
      return (1.1 + std::cos(two_pi * x1 / e)) / (1.1 + std::sin(two_pi * x2 / e));
    default:
      throw DimensionMismatch("fraction index must be in 1..5");
  }
}

double eval_multiscale_trig(double x1, double x2) {
  double sum = 0.0;
  for (int k = 1; k <= 5; ++k) sum += multiscale_trig_fraction(k, x1, x2);
  sum += std::sin(4.0 * x1 * x1 * x2 * x2) + 1.0;
  return sum / 6.0;
}

double NormalStream::next() {
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = ((eng_() >> 11) + 1.0) * scale;   // in (0, 1]
  const double u2 = (eng_() >> 11) * scale;           // in [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

CoefficientField sample_to_cells(const GridHierarchy& g,
                                 const std::function<double(double, double)>& eval,
                                 CoeffFamily family, CoeffParams params) {
  CoefficientField field;
  field.family = family;
  field.nf = g.nf;
  field.params = params;
  field.values.resize(g.num_fine_cells());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int cy = 0; cy < g.nf; ++cy)
    for (int cx = 0; cx < g.nf; ++cx) {
      const double v = eval((cx + 0.5) * g.h, (cy + 0.5) * g.h);
      if (!(v > 0.0))
        throw NonPositiveCoefficient(
            "coefficient value " + std::to_string(v) + " at cell center (" +
            std::to_string((cx + 0.5) * g.h) + ", " +
            std::to_string((cy + 0.5) * g.h) + ")");
      field.values[g.fine_cell(cx, cy)] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  field.a_min = lo;
  field.a_max = hi;
  return field;
}

CoefficientField build_unit_field(const GridHierarchy& g) {
  return sample_to_cells(
      g, [](double, double) { return 1.0; }, CoeffFamily::unit);
}

CoefficientField build_multiscale_trig(const GridHierarchy& g) {
  return sample_to_cells(g, eval_multiscale_trig, CoeffFamily::multiscale_trig);
}

CoefficientField build_random_field(const GridHierarchy& g, std::uint64_t seed) {
  constexpr int kLattice = 128;  // lattice nodes 0..128 per side
  std::vector<double> xi((kLattice + 1) * (kLattice + 1));
  NormalStream stream(seed);
  for (int j = 0; j <= kLattice; ++j)
    for (int i = 0; i <= kLattice; ++i) xi[j * (kLattice + 1) + i] = stream.next();

  auto interp = [&](double x1, double x2) {
    int i = std::min(static_cast<int>(x1 * kLattice), kLattice - 1);
    int j = std::min(static_cast<int>(x2 * kLattice), kLattice - 1);
    const double tx = x1 * kLattice - i;
    const double ty = x2 * kLattice - j;
    const double v00 = xi[j * (kLattice + 1) + i];
    const double v10 = xi[j * (kLattice + 1) + i + 1];
    const double v01 = xi[(j + 1) * (kLattice + 1) + i];
    const double v11 = xi[(j + 1) * (kLattice + 1) + i + 1];
    return (1.0 - tx) * (1.0 - ty) * v00 + tx * (1.0 - ty) * v10 +
           (1.0 - tx) * ty * v01 + tx * ty * v11;
  };

  CoeffParams params;
  params.seed = seed;
  auto field = sample_to_cells(
      g, [&](double x1, double x2) { return std::abs(interp(x1, x2)) + 0.5; },
      CoeffFamily::random_field, params);
  if (g.nf < kLattice)
    field.warning = "random field under-resolved: nf = " + std::to_string(g.nf) +
                    " is below the lattice resolution 128";
  return field;
}

CoefficientField build_high_contrast(const GridHierarchy& g, double contrast) {
  if (!(contrast > 1.0))
    throw ConfigError("contrast must exceed 1, got " + std::to_string(contrast));
  auto nearest_lattice = [](double x) {
    const double snapped = 0.2 + 0.1 * std::round((x - 0.2) / 0.1);
    return std::clamp(snapped, 0.2, 0.8);
  };
  CoeffParams params;
  params.contrast = contrast;
  return sample_to_cells(
      g,
      [&](double x1, double x2) {
        const double d1 = x1 - nearest_lattice(x1);
        const double d2 = x2 - nearest_lattice(x2);
        return std::sqrt(d1 * d1 + d2 * d2) < 0.025 ? contrast : 1.0;
      },
      CoeffFamily::high_contrast, params);
}

void write_field(const CoefficientField& field, const std::string& path_prefix) {
  std::ofstream bin(path_prefix + ".bin", std::ios::binary);
  for (double v : field.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i)
      bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    bin.write(reinterpret_cast<const char*>(bytes), 8);
  }
  bin.close();

  nlohmann::json sidecar;
  sidecar["family"] = family_name(field.family);
  sidecar["nf"] = field.nf;
  sidecar["a_min"] = field.a_min;
  sidecar["a_max"] = field.a_max;
  sidecar["params"] = {{"seed", field.params.seed},
                       {"contrast", field.params.contrast}};
  if (!field.warning.empty()) sidecar["warning"] = field.warning;
  std::ofstream json_out(path_prefix + ".json");
  json_out << sidecar.dump(2) << "\n";
}

}  // namespace msbasis
