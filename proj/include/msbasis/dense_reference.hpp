#pragma once

#include <Eigen/Dense>

#include "msbasis/coefficient.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/mesh.hpp"

namespace msbasis::dense {

/// Brute-force counterparts of the edge pipeline built on dense linear
/// algebra and explicit eliminations. Slow by design; they exist as oracles
/// for the sparse production path and are exercised by the test and
/// property suites on small grids.

/// Full patch stiffness over all patch nodes, no boundary conditions.
Eigen::MatrixXd patch_stiffness(const GridHierarchy& g, const CoefficientField& field,
                                const PatchFootprint& fp);

/// Boundary energy Gram (Schur complement) of the oversampling patch of e on
/// its free boundary nodes (patch boundary order, domain-boundary dropped).
Eigen::MatrixXd boundary_energy_gram(const GridHierarchy& g,
                                     const CoefficientField& field,
                                     const CoarseEdge& e);

/// Restriction matrix by explicit dense extension of each unit data vector.
Eigen::MatrixXd restriction_matrix(const GridHierarchy& g,
                                   const CoefficientField& field,
                                   const CoarseEdge& e);

/// Edge energy Gram via dense element Schur complements.
Eigen::MatrixXd edge_energy_gram(const GridHierarchy& g, const CoefficientField& field,
                                 const CoarseEdge& e);

/// Full-spectrum solve of the restriction pencil with explicit constant
/// deflation on interior patches.
EdgeSvdResult edge_svd(const GridHierarchy& g, const CoefficientField& field,
                       const CoarseEdge& e, int m);

}  // namespace msbasis::dense
