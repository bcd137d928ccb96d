#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <vector>

#include "msbasis/coefficient.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis {

using SparseMat = Eigen::SparseMatrix<double>;
using RhsEvaluator = std::function<double(double, double)>;

/// Exact Q1 stiffness of one h-by-h cell with constant coefficient a_cell.
/// Corner ordering (0,0), (1,0), (1,1), (0,1). Independent of h in 2D.
Eigen::Matrix4d cell_stiffness(double a_cell, double h);

/// Q1 mass matrix of one h-by-h cell, same corner ordering.
Eigen::Matrix4d cell_mass(double h);

/// Global fine-node ids of a cell's corners in the stiffness ordering.
std::array<int, 4> cell_corner_nodes(const GridHierarchy& g, int cx, int cy);

/// Values at all fine nodes; members of the zero-trace space carry exact
/// zeros on the domain boundary.
struct FineFunction {
  int nf = 0;
  Eigen::VectorXd values;
  std::optional<PatchFootprint> support;  // set when the function lives on a patch
};

FineFunction zero_fine_function(const GridHierarchy& g);

/// A coarse element or oversampling domain with its fine-node partition and
/// a factorization of the interior stiffness block, reusable across
/// right-hand sides. Boundary nodes are the patch-rectangle boundary; the
/// portion on the domain boundary carries forced zeros.
class LocalPatch {
 public:
  LocalPatch(const GridHierarchy& g, const CoefficientField& field,
             PatchFootprint fp);

  const PatchFootprint& footprint() const { return fp_; }
  int cells_x() const { return nx_; }
  int cells_y() const { return ny_; }
  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int local_node(int lx, int ly) const { return ly * (nx_ + 1) + lx; }
  int global_node(int local) const;
  int origin_x() const { return gx0_; }
  int origin_y() const { return gy0_; }
  int local_from_fine(int gx, int gy) const { return local_node(gx - gx0_, gy - gy0_); }
  bool touches_domain_boundary() const { return touches_domain_boundary_; }

  const std::vector<int>& interior() const { return interior_; }
  const std::vector<int>& boundary() const { return boundary_; }
  /// Parallel to boundary(): true where the node lies on the domain boundary.
  const std::vector<bool>& boundary_on_domain() const { return boundary_on_domain_; }

  /// Index of a local node within interior() / boundary(), or -1.
  int interior_index(int local) const { return interior_index_[local]; }
  int boundary_index(int local) const { return boundary_index_[local]; }

  /// Discrete a-harmonic extension of Dirichlet data given per boundary()
  /// entry (domain-boundary entries must be zero). Returns all patch nodes.
  Eigen::VectorXd extend(const Eigen::VectorXd& boundary_values) const;
  Eigen::MatrixXd extend_batch(const Eigen::MatrixXd& boundary_values) const;

  /// Zero-trace solve against a load vector over interior() entries.
  Eigen::VectorXd solve_zero_trace(const Eigen::VectorXd& interior_load) const;

  /// Raw interior-block solves A_II X = rhs, one column per right-hand side.
  Eigen::MatrixXd solve_interior(const Eigen::MatrixXd& rhs) const;

  /// Load vector over interior() entries for an rhs (2x2 Gauss per cell).
  Eigen::VectorXd interior_load(const RhsEvaluator& f) const;

  /// Energy quadratic form of a full patch-node vector.
  double patch_energy(const Eigen::VectorXd& patch_values) const;
  double patch_energy_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

  Eigen::VectorXd gather_global(const Eigen::VectorXd& global_values) const;
  Eigen::VectorXd boundary_values_from(const Eigen::VectorXd& global_values) const;
  void scatter_to_global(const Eigen::VectorXd& patch_values,
                         Eigen::VectorXd& global_values) const;

  const SparseMat& interior_matrix() const { return a_ii_; }
  const SparseMat& coupling_matrix() const { return a_ib_; }
  const SparseMat& boundary_matrix() const { return a_bb_; }

 private:
  const GridHierarchy* g_;
  PatchFootprint fp_;
  int nx_, ny_;       // fine cells per side of the patch
  int gx0_, gy0_;     // fine coordinates of the patch origin
  bool touches_domain_boundary_;
  std::vector<int> interior_, boundary_;
  std::vector<int> interior_index_, boundary_index_;
  std::vector<bool> boundary_on_domain_;
  SparseMat a_ii_, a_ib_, a_bb_;
  Eigen::SimplicialLDLT<SparseMat> fact_;
};

LocalPatch assemble_patch(const GridHierarchy& g, const CoefficientField& field,
                          const PatchFootprint& fp);

/// Spec-level wrapper returning a full fine-grid function supported on the
/// patch. boundary_values indexes patch.boundary().
FineFunction harmonic_extension(const GridHierarchy& g, const LocalPatch& patch,
                                const Eigen::VectorXd& boundary_values);

/// Local Dirichlet solve of the rhs with zero trace on the patch boundary.
FineFunction bubble_solve(const GridHierarchy& g, const CoefficientField& field,
                          const LocalPatch& patch, const RhsEvaluator& f);

double energy_inner(const GridHierarchy& g, const CoefficientField& field,
                    const FineFunction& u, const FineFunction& v);
double energy_norm(const GridHierarchy& g, const CoefficientField& field,
                   const FineFunction& u);
double l2_inner(const GridHierarchy& g, const FineFunction& u,
                const FineFunction& v);
double l2_norm(const GridHierarchy& g, const FineFunction& u);

/// Global stiffness over interior fine nodes (domain boundary eliminated),
/// node id (iy-1)*(nf-1) + (ix-1).
SparseMat assemble_interior_stiffness(const GridHierarchy& g,
                                      const CoefficientField& field);

/// Global load vector over all fine nodes (zero on the domain boundary).
Eigen::VectorXd assemble_global_load(const GridHierarchy& g, const RhsEvaluator& f);

/// Fine-grid Dirichlet solve; ground truth for all error reports.
FineFunction reference_solve(const GridHierarchy& g, const CoefficientField& field,
                             const RhsEvaluator& f);

/// Element helpers used by the coarse-space assembly.
std::vector<int> element_node_ids(const GridHierarchy& g, int element);
Eigen::VectorXd element_load(const GridHierarchy& g, const RhsEvaluator& f,
                             int element);
/// Applies the element stiffness (all (nb+1)^2 nodes, no boundary
/// conditions) to a local value array.
Eigen::VectorXd element_stiffness_apply(const GridHierarchy& g,
                                        const CoefficientField& field, int element,
                                        const Eigen::VectorXd& local_values);

}  // namespace msbasis
