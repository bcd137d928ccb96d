#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "msbasis/coefficient.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis {

enum class BasisKind { tent, svd_enrichment, os_bubble };

struct BasisClassification {
  BasisKind kind = BasisKind::tent;
  int node = -1;   // interior coarse node id, tents only
  int edge = -1;   // edge id, enrichments and os bubbles
  int index = 0;   // 1-based enrichment rank within the edge
};

/// Basis functions with support on one coarse element, stored as fine-node
/// value arrays over the element's (nb+1)^2 nodes in local scan order.
struct ElementBlock {
  std::vector<int> dofs;
  Eigen::MatrixXd values;  // (nb+1)^2 rows, one column per entry of dofs
};

/// Global multiscale space. DOF order: tents by interior node id, then
/// per-edge enrichments in edge-id order, then one os-bubble DOF per edge
/// when included. Every function is continuous, zero on the domain boundary
/// and discrete-a-harmonic inside each element of its support.
struct GalerkinSpace {
  int nc = 0;
  int nf = 0;
  std::uint64_t coeff_hash = 0;
  bool has_os_bubble = false;
  int num_tents = 0;
  int num_enrichments = 0;
  std::vector<BasisClassification> classification;
  std::vector<ElementBlock> elements;
  std::vector<double> next_lambda;  // per edge lambda_{m_e+1}, 0 past depth
  double build_seconds = 0.0;

  int num_dofs() const { return static_cast<int>(classification.size()); }
};

struct SolveTimings {
  double space_seconds = 0.0;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
  double bubble_seconds = 0.0;
};

struct SolutionReport {
  int variant = 1;
  FineFunction solution;
  double e_energy = -1.0;  // attached once a reference is available
  double e_l2 = -1.0;
  double ref_energy_norm = 0.0;
  double ref_l2_norm = 0.0;
  std::vector<double> epsilon_e;  // per-edge diagnostic indicators
  std::vector<int> pruned_dofs;   // DOFs removed by the pivot threshold
  SolveTimings timings;
  int nc = 0;
  int nf = 0;
  std::uint64_t coeff_hash = 0;
};

/// Extends tents and the selected per-edge functions a-harmonically into
/// their support elements. Honors the per-edge m_e recorded in the basis;
/// with include_os_bubble every edge must carry its bubble trace.
GalerkinSpace build_space(const GridHierarchy& g, const CoefficientField& field,
                          const EdgeBasisSet& basis, bool include_os_bubble);

/// Global sum of the per-element zero-trace solves of f; depends only on
/// (field, f), so callers may share it across variants and depths.
FineFunction elementwise_bubble(const GridHierarchy& g, const CoefficientField& field,
                                const RhsEvaluator& f);

/// Coarse Galerkin solve. k=1 uses tents+enrichments; k=2 adds the
/// elementwise bubble to the reconstruction; k=3 additionally activates the
/// os-bubble columns (space must provide them, built from the same f).
/// A precomputed elementwise_bubble may be passed to avoid recomputation.
SolutionReport solve_variant(const GridHierarchy& g, const CoefficientField& field,
                             const GalerkinSpace& space, const RhsEvaluator& f, int k,
                             const FineFunction* precomputed_bubble = nullptr);

struct ErrorPair {
  double e_energy = 0.0;
  double e_l2 = 0.0;
  double ref_energy_norm = 0.0;
  double ref_l2_norm = 0.0;
};

/// Relative errors of a candidate against the fine-grid reference in the
/// coefficient energy norm and in L2.
ErrorPair error_report(const GridHierarchy& g, const CoefficientField& field,
                       const FineFunction& u, const FineFunction& u_ref);

/// Convenience: computes error_report for report.solution and stores the
/// results in the report.
void attach_errors(SolutionReport& report, const GridHierarchy& g,
                   const CoefficientField& field, const FineFunction& u_ref);

/// Max over active basis functions phi of |(f,phi) - a(u,phi)| normalized by
/// ref_energy_norm * ||phi||_a. Requires attach_errors to have run.
double residual_orthogonality_check(const GridHierarchy& g, const CoefficientField& field,
                                    const GalerkinSpace& space,
                                    const SolutionReport& report,
                                    const RhsEvaluator& f);

}  // namespace msbasis
