#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msbasis/mesh.hpp"

namespace msbasis {

enum class CoeffFamily { unit, multiscale_trig, random_field, high_contrast, custom };

std::string family_name(CoeffFamily family);

struct CoeffParams {
  std::uint64_t seed = 0;
  double contrast = 1.0;
};

/// Scalar coefficient a(x), piecewise constant per fine cell, sampled at
/// cell centers. Immutable after construction.
struct CoefficientField {
  CoeffFamily family = CoeffFamily::custom;
  int nf = 0;
  std::vector<double> values;  // one per fine cell, row-major
  CoeffParams params;
  double a_min = 0.0;
  double a_max = 0.0;
  std::string warning;  // non-empty when the field is under-resolved

  double at_cell(int cell) const { return values[cell]; }
  double at_cell(int cx, int cy) const { return values[static_cast<size_t>(cy) * nf + cx]; }

  /// Content hash over family, parameters and all cell values. Used for
  /// provenance checks between stored bases and live fields.
  std::uint64_t hash() const;
};

/// One fraction term (k in 1..5) of the five-scale trigonometric family.
double multiscale_trig_fraction(int k, double x1, double x2);

/// Five-scale trigonometric coefficient: the average of five sin/cos
/// fraction terms, sin(4 x1^2 x2^2) and 1.
double eval_multiscale_trig(double x1, double x2);

/// Deterministic standard normal stream: mt19937_64 with the raw seed,
/// 53-bit uniforms u = (x >> 11) * 2^-53, Box-Muller with the cosine branch,
/// two engine draws per normal. Fixed here so that seeded fields are
/// bit-identical across platforms.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : eng_(seed) {}
  double next();

 private:
  std::mt19937_64 eng_;
};

/// Sample an evaluator at fine-cell centers. Throws NonPositiveCoefficient
/// if any sampled value is <= 0.
CoefficientField sample_to_cells(const GridHierarchy& g,
                                 const std::function<double(double, double)>& eval,
                                 CoeffFamily family = CoeffFamily::custom,
                                 CoeffParams params = {});

CoefficientField build_unit_field(const GridHierarchy& g);

CoefficientField build_multiscale_trig(const GridHierarchy& g);

/// a = |xi| + 0.5 where xi interpolates i.i.d. standard normals on the
/// 129x129 lattice bilinearly. Lattice filled row by row (x2 index outer,
/// x1 index inner), one normal per lattice node. Sets a resolution warning
/// when nf < 128.
CoefficientField build_random_field(const GridHierarchy& g, std::uint64_t seed);

/// a = M inside the union of 49 disks of radius 0.025 centered on the
/// lattice {0.2,0.3,...,0.8}^2, and 1 elsewhere.
CoefficientField build_high_contrast(const GridHierarchy& g, double contrast);

/// Raw little-endian value dump (path.bin) plus a JSON sidecar (path.json).
void write_field(const CoefficientField& field, const std::string& path_prefix);

}  // namespace msbasis
