#include "msbasis/mesh.hpp"

#include <string>

namespace msbasis {

int GridHierarchy::edge_at(EdgeOrientation orientation, int ix, int iy) const {
  if (orientation == EdgeOrientation::horizontal) {
    if (iy < 1 || iy > nc - 1 || ix < 0 || ix > nc - 1) return -1;
    return (iy - 1) * nc + ix;
  }
  if (ix < 1 || ix > nc - 1 || iy < 0 || iy > nc - 1) return -1;
  return nc * (nc - 1) + iy * (nc - 1) + (ix - 1);
}

std::vector<int> GridHierarchy::edge_fine_nodes(int edge) const {
  const CoarseEdge& e = edges.at(edge);
  std::vector<int> out(nb + 1);
  const int fx = e.ix * nb;
  const int fy = e.iy * nb;
  for (int t = 0; t <= nb; ++t) {
    if (e.orientation == EdgeOrientation::horizontal)
      out[t] = fine_node(fx + t, fy);
    else
      out[t] = fine_node(fx, fy + t);
  }
  return out;
}

std::vector<int> GridHierarchy::edges_of_node(int node) const {
  auto c = interior_node_coords(node);
  const int ix = c[0], iy = c[1];
  return {edge_at(EdgeOrientation::horizontal, ix - 1, iy),
          edge_at(EdgeOrientation::horizontal, ix, iy),
          edge_at(EdgeOrientation::vertical, ix, iy - 1),
          edge_at(EdgeOrientation::vertical, ix, iy)};
}

std::array<int, 2> GridHierarchy::elements_of_edge(int edge) const {
  return edges.at(edge).elements;
}

std::vector<int> GridHierarchy::elements_of_node(int node) const {
  auto c = interior_node_coords(node);
  const int ix = c[0], iy = c[1];
  return {element_id(ix - 1, iy - 1), element_id(ix, iy - 1),
          element_id(ix - 1, iy), element_id(ix, iy)};
}

std::vector<int> GridHierarchy::edges_of_element(int element) const {
  const int cx = element % nc;
  const int cy = element / nc;
  std::vector<int> out;
  for (int id : {edge_at(EdgeOrientation::horizontal, cx, cy),
                 edge_at(EdgeOrientation::horizontal, cx, cy + 1),
                 edge_at(EdgeOrientation::vertical, cx, cy),
                 edge_at(EdgeOrientation::vertical, cx + 1, cy)}) {
    if (id >= 0) out.push_back(id);
  }
  return out;
}

std::vector<int> GridHierarchy::element_interior_fine_nodes(int element) const {
  auto o = element_cell_origin(element);
  std::vector<int> out;
  out.reserve((nb - 1) * (nb - 1));
  for (int b = 1; b < nb; ++b)
    for (int a = 1; a < nb; ++a) out.push_back(fine_node(o[0] + a, o[1] + b));
  return out;
}

FineNodeClass GridHierarchy::classify_fine_node(int id) const {
  const int ix = id % (nf + 1);
  const int iy = id / (nf + 1);
  if (ix == 0 || ix == nf || iy == 0 || iy == nf)
    return FineNodeClass::domain_boundary;
  const bool on_x = ix % nb == 0;
  const bool on_y = iy % nb == 0;
  if (on_x && on_y) return FineNodeClass::coarse_node;
  if (on_x || on_y) return FineNodeClass::edge_interior;
  return FineNodeClass::element_interior;
}

GridHierarchy build_hierarchy(int nc, int nf) {
  if (nc < 2)
    throw DegenerateMesh("coarse resolution must be at least 2, got " +
                         std::to_string(nc));
  if (nf % nc != 0)
    throw NonNestedMesh("fine resolution " + std::to_string(nf) +
                        " is not a multiple of coarse resolution " +
                        std::to_string(nc));
  if (nf / nc < 2)
    throw DegenerateMesh("need at least 2 fine cells per coarse cell, got " +
                         std::to_string(nf / nc));

  GridHierarchy g;
  g.nc = nc;
  g.nf = nf;
  g.nb = nf / nc;
  g.H = 1.0 / nc;
  g.h = 1.0 / nf;

  g.edges.reserve(2 * nc * (nc - 1));
  auto interior_or_minus1 = [&](int ix, int iy) {
    if (ix < 1 || ix > nc - 1 || iy < 1 || iy > nc - 1) return -1;
    return g.interior_node_id(ix, iy);
  };
  for (int iy = 1; iy <= nc - 1; ++iy)
    for (int ix = 0; ix <= nc - 1; ++ix) {
      CoarseEdge e;
      e.id = static_cast<int>(g.edges.size());
      e.orientation = EdgeOrientation::horizontal;
      e.ix = ix;
      e.iy = iy;
      e.boundary_connected = (ix == 0 || ix == nc - 1);
      e.elements = {g.element_id(ix, iy - 1), g.element_id(ix, iy)};
      e.endpoint_nodes = {interior_or_minus1(ix, iy),
                          interior_or_minus1(ix + 1, iy)};
      g.edges.push_back(e);
    }
  for (int iy = 0; iy <= nc - 1; ++iy)
    for (int ix = 1; ix <= nc - 1; ++ix) {
      CoarseEdge e;
      e.id = static_cast<int>(g.edges.size());
      e.orientation = EdgeOrientation::vertical;
      e.ix = ix;
      e.iy = iy;
      e.boundary_connected = (iy == 0 || iy == nc - 1);
      e.elements = {g.element_id(ix - 1, iy), g.element_id(ix, iy)};
      e.endpoint_nodes = {interior_or_minus1(ix, iy),
                          interior_or_minus1(ix, iy + 1)};
      g.edges.push_back(e);
    }
  return g;
}

PatchFootprint oversampling_domain(const GridHierarchy& g, int edge) {
  const CoarseEdge& e = g.edges.at(edge);
  PatchFootprint fp;
  if (e.orientation == EdgeOrientation::horizontal) {
    fp.cx0 = std::max(e.ix - 1, 0);
    fp.cx1 = std::min(e.ix + 1, g.nc - 1);
    fp.cy0 = e.iy - 1;
    fp.cy1 = e.iy;
  } else {
    fp.cx0 = e.ix - 1;
    fp.cx1 = e.ix;
    fp.cy0 = std::max(e.iy - 1, 0);
    fp.cy1 = std::min(e.iy + 1, g.nc - 1);
  }
  return fp;
}

PatchFootprint element_footprint(const GridHierarchy& g, int element) {
  const int cx = element % g.nc;
  const int cy = element / g.nc;
  return {cx, cy, cx, cy};
}

std::vector<int> patch_elements(const GridHierarchy& g, const PatchFootprint& fp) {
  std::vector<int> out;
  out.reserve(fp.num_elements());
  for (int cy = fp.cy0; cy <= fp.cy1; ++cy)
    for (int cx = fp.cx0; cx <= fp.cx1; ++cx) out.push_back(g.element_id(cx, cy));
  return out;
}

bool patch_touches_domain_boundary(const GridHierarchy& g,
                                   const PatchFootprint& fp) {
  return fp.cx0 == 0 || fp.cy0 == 0 || fp.cx1 == g.nc - 1 || fp.cy1 == g.nc - 1;
}

}  // namespace msbasis
