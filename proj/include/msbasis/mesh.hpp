#pragma once

#include <array>
#include <vector>

#include "msbasis/errors.hpp"

namespace msbasis {

enum class EdgeOrientation { horizontal, vertical };

/// Membership of a fine node in the two-level grid decomposition.
/// Every fine node belongs to exactly one class.
enum class FineNodeClass {
  domain_boundary,
  coarse_node,       // interior coarse lattice node
  edge_interior,     // interior fine node of a coarse edge
  element_interior,
};

/// A coarse edge of the skeleton. Edges fully contained in the domain
/// boundary are excluded. Keyed by the coarse lattice coordinates of its
/// left (horizontal) or bottom (vertical) endpoint.
struct CoarseEdge {
  int id = -1;
  EdgeOrientation orientation = EdgeOrientation::horizontal;
  int ix = 0;
  int iy = 0;
  bool boundary_connected = false;       // an endpoint lies on the boundary
  std::array<int, 2> elements{-1, -1};   // adjacent coarse elements, ascending
  std::array<int, 2> endpoint_nodes{-1, -1};  // interior node ids, -1 on boundary
};

/// Inclusive coarse-cell rectangle (used for elements and oversampling domains).
struct PatchFootprint {
  int cx0 = 0;
  int cy0 = 0;
  int cx1 = 0;
  int cy1 = 0;
  int cells_x() const { return cx1 - cx0 + 1; }
  int cells_y() const { return cy1 - cy0 + 1; }
  int num_elements() const { return cells_x() * cells_y(); }
};

/// Nested two-level uniform quadrilateral grid on [0,1]^2.
/// All indexing is row-major by position and fixed at construction.
struct GridHierarchy {
  int nc = 0;  // coarse cells per side, H = 1/nc
  int nf = 0;  // fine cells per side, h = 1/nf
  int nb = 0;  // fine cells per coarse cell, nf/nc
  double H = 0.0;
  double h = 0.0;

  std::vector<CoarseEdge> edges;

  int num_interior_nodes() const { return (nc - 1) * (nc - 1); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_elements() const { return nc * nc; }
  int num_fine_nodes() const { return (nf + 1) * (nf + 1); }
  int num_fine_cells() const { return nf * nf; }

  int fine_node(int ix, int iy) const { return iy * (nf + 1) + ix; }
  int fine_cell(int cx, int cy) const { return cy * nf + cx; }
  int element_id(int cx, int cy) const { return cy * nc + cx; }

  /// Interior coarse node id from lattice coordinates in [1, nc-1]^2.
  int interior_node_id(int ix, int iy) const {
    return (iy - 1) * (nc - 1) + (ix - 1);
  }
  std::array<int, 2> interior_node_coords(int node) const {
    return {node % (nc - 1) + 1, node / (nc - 1) + 1};
  }
  std::array<double, 2> interior_node_position(int node) const {
    auto c = interior_node_coords(node);
    return {c[0] * H, c[1] * H};
  }
  std::array<double, 2> fine_node_position(int id) const {
    return {(id % (nf + 1)) * h, (id / (nf + 1)) * h};
  }
  std::array<double, 2> fine_node_position(int ix, int iy) const {
    return {ix * h, iy * h};
  }

  /// Edge id from orientation and lattice key, or -1 if not a skeleton edge.
  int edge_at(EdgeOrientation orientation, int ix, int iy) const;

  /// Global fine-node ids along an edge, endpoint to endpoint (nb+1 entries).
  std::vector<int> edge_fine_nodes(int edge) const;

  std::vector<int> edges_of_node(int node) const;
  std::array<int, 2> elements_of_edge(int edge) const;
  std::vector<int> elements_of_node(int node) const;
  /// Edges carrying the tent of an interior node, i.e. edges meeting the node.
  std::vector<int> support_of_tent(int node) const { return edges_of_node(node); }
  /// Skeleton edges on the boundary of an element (up to 4).
  std::vector<int> edges_of_element(int element) const;

  std::array<int, 2> element_cell_origin(int element) const {
    return {(element % nc) * nb, (element / nc) * nb};
  }
  std::vector<int> element_interior_fine_nodes(int element) const;

  FineNodeClass classify_fine_node(int id) const;
};

/// Build the hierarchy. Requires nc >= 2, nf divisible by nc, nf/nc >= 2.
GridHierarchy build_hierarchy(int nc, int nf);

/// Coarse elements whose closure meets the edge: a 3x2 block for interior
/// edges, clipped to 2x2 when the edge reaches the domain boundary.
PatchFootprint oversampling_domain(const GridHierarchy& g, int edge);

inline PatchFootprint oversampling_domain(const GridHierarchy& g,
                                          const CoarseEdge& e) {
  return oversampling_domain(g, e.id);
}

PatchFootprint element_footprint(const GridHierarchy& g, int element);

std::vector<int> patch_elements(const GridHierarchy& g, const PatchFootprint& fp);

bool patch_touches_domain_boundary(const GridHierarchy& g, const PatchFootprint& fp);

}  // namespace msbasis
