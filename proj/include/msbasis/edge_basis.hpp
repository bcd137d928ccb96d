#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "msbasis/coefficient.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis {

/// Values along one coarse edge, ordered by the edge axis (x for horizontal
/// edges, y for vertical ones), nb+1 entries including both endpoints.
/// Enrichment-class functions carry exact zeros at the endpoints.
struct EdgeFunction {
  int edge = -1;
  Eigen::VectorXd values;
};

/// Piecewise-linear trace of one interior coarse node on its adjacent edges.
struct TentFunction {
  int node = -1;
  std::vector<int> edges;
  std::vector<Eigen::VectorXd> traces;  // parallel to edges, nb+1 values each
};

/// One tent per interior coarse node; traces are 1 at the node, 0 at the far
/// endpoint, linear in between.
std::vector<TentFunction> tent_functions(const GridHierarchy& g);

/// Edgewise trace of the tent interpolant of coarse nodal values (indexed by
/// interior_node_id, implicitly zero at domain-boundary nodes). One value
/// vector per edge, in edge-id order.
std::vector<Eigen::VectorXd> interpolate(const GridHierarchy& g,
                                         const Eigen::VectorXd& coarse_values);

/// Gram matrix of the edge energy inner product over the nb-1 interior edge
/// DOFs: energy of the a-harmonic extension of zero-extended edge data into
/// the two adjacent elements. Symmetric positive definite.
Eigen::MatrixXd h_half_gram(const GridHierarchy& g, const CoefficientField& field,
                            const CoarseEdge& e);

/// Quadrature of the squared H^{1/2}_00 edge norm: nodal L2 term, Gagliardo
/// double sum over distinct fine-node pairs, and the endpoint-distance term.
double h00_half_norm_sq(const GridHierarchy& g, const EdgeFunction& psi);
double h00_half_norm(const GridHierarchy& g, const EdgeFunction& psi);

/// Dense matrix of the restriction operator for edge e: free boundary data
/// on the oversampling patch (patch boundary order, domain-boundary nodes
/// dropped) to the interpolation residue on the edge interior.
Eigen::MatrixXd build_restriction_operator(const GridHierarchy& g,
                                           const CoefficientField& field,
                                           const CoarseEdge& e);

struct EdgeSvdResult {
  Eigen::VectorXd lambda;               // full computed spectrum, descending
  std::vector<EdgeFunction> functions;  // leading left singular vectors
  bool rank_capped = false;  // requested depth exceeded the positive spectrum
};

/// Singular pairs of the restriction operator: eigenvalues of the pencil
/// (R^T G_image R) x = lambda^2 G_domain x, with G_image the edge energy
/// Gram and G_domain the boundary energy Gram of the oversampling patch.
/// Left singular vectors are returned G_image-orthonormal, sign-fixed so the
/// first nonnegligible entry is positive.
EdgeSvdResult edge_svd(const GridHierarchy& g, const CoefficientField& field,
                       const CoarseEdge& e, int m);

/// Interpolation residue on e of the local Dirichlet solve of f on the
/// oversampling patch.
EdgeFunction oversampling_bubble_edge(const GridHierarchy& g,
                                      const CoefficientField& field,
                                      const CoarseEdge& e, const RhsEvaluator& f);

struct EdgeRecord {
  Eigen::VectorXd lambda;
  std::vector<EdgeFunction> functions;
  std::optional<EdgeFunction> os_bubble;
  int m_e = 0;  // enrichment count selected for this edge
  bool rank_capped = false;
};

struct EdgeBasisSet {
  int nc = 0;
  int nf = 0;
  std::uint64_t coeff_hash = 0;
  CoeffFamily family = CoeffFamily::custom;
  CoeffParams params;
  std::vector<EdgeRecord> edges;  // in edge-id order
};

/// Offline pass: SVD bases for every edge to depth max_m (m_e initialized to
/// the stored count). When f is given, the per-edge oversampling bubbles are
/// computed in the same pass while the patch factorizations are available.
/// Parallel over elements and edges, results independent of worker count.
EdgeBasisSet build_edge_basis(const GridHierarchy& g, const CoefficientField& field,
                              int max_m, const RhsEvaluator* f = nullptr);

struct TruncationResult {
  std::vector<int> m_e;       // per edge
  std::vector<bool> capped;   // true where the threshold was never reached
};

/// Smallest m_e with lambda_{e,m_e} < tau per edge, capped at the available
/// spectrum depth.
TruncationResult adaptive_truncation(const EdgeBasisSet& basis, double tau);

/// Sets every edge's m_e to m. Edges whose available rank fell short of the
/// build depth keep their full rank; beyond that, asking for more than the
/// stored depth throws ConfigError, as does a negative m.
void set_uniform_truncation(EdgeBasisSet& basis, int m);

/// Copies the per-edge counts of a truncation result into the basis.
void apply_truncation(EdgeBasisSet& basis, const TruncationResult& trunc);

/// Online half of the offline/online split: computes the f-dependent
/// oversampling bubbles for every edge of an already built (or loaded)
/// basis. Parallel over edges, deterministic.
void attach_os_bubbles(const GridHierarchy& g, const CoefficientField& field,
                       EdgeBasisSet& basis, const RhsEvaluator& f);

namespace detail {
/// Flips a vector so its first entry exceeding 1e-12 of the max magnitude is
/// positive; fixes the eigensolver sign ambiguity deterministically.
void canonical_sign(Eigen::VectorXd& v);
}  // namespace detail

}  // namespace msbasis
