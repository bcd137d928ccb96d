#include "msbasis/edge_basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "msbasis/errors.hpp"
#include "msbasis/parallel.hpp"

namespace msbasis {

namespace {

struct EdgeGeometry {
  std::vector<int> gx, gy;  // fine coordinates of the nb+1 edge nodes
};

EdgeGeometry edge_geometry(const GridHierarchy& g, const CoarseEdge& e) {
  EdgeGeometry geo;
  geo.gx.resize(g.nb + 1);
  geo.gy.resize(g.nb + 1);
  for (int j = 0; j <= g.nb; ++j) {
    if (e.orientation == EdgeOrientation::horizontal) {
      geo.gx[j] = e.ix * g.nb + j;
      geo.gy[j] = e.iy * g.nb;
    } else {
      geo.gx[j] = e.ix * g.nb;
      geo.gy[j] = e.iy * g.nb + j;
    }
  }
  return geo;
}

/// Interpolation residue of a full patch vector on the edge: value minus the
/// linear interpolant of the endpoint values. Exact zeros at the endpoints.
Eigen::VectorXd residue_on_edge(const GridHierarchy& g, const CoarseEdge& e,
                                const LocalPatch& patch,
                                const Eigen::VectorXd& patch_values) {
  const EdgeGeometry geo = edge_geometry(g, e);
  const double v0 = patch_values[patch.local_from_fine(geo.gx[0], geo.gy[0])];
  const double v1 = patch_values[patch.local_from_fine(geo.gx[g.nb], geo.gy[g.nb])];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.nb + 1);
  for (int j = 1; j < g.nb; ++j) {
    const double t = static_cast<double>(j) / g.nb;
    out[j] = patch_values[patch.local_from_fine(geo.gx[j], geo.gy[j])] -
             ((1.0 - t) * v0 + t * v1);
  }
  return out;
}

/// Contribution of one adjacent element to the edge energy Gram: the element
/// boundary Schur complement restricted to the edge-interior nodes.
Eigen::MatrixXd element_gram_block(const GridHierarchy& g, const LocalPatch& patch,
                                   const CoarseEdge& e) {
  const int m = g.nb - 1;
  const EdgeGeometry geo = edge_geometry(g, e);
  std::vector<int> bidx(m);
  for (int j = 1; j < g.nb; ++j) {
    const int local = patch.local_from_fine(geo.gx[j], geo.gy[j]);
    bidx[j - 1] = patch.boundary_index(local);
    if (bidx[j - 1] < 0)
      throw DimensionMismatch("edge does not lie on the element boundary");
  }
  const SparseMat& aib = patch.coupling_matrix();
  const SparseMat& abb = patch.boundary_matrix();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(aib.rows(), m);
  for (int j = 0; j < m; ++j)
    for (SparseMat::InnerIterator it(aib, bidx[j]); it; ++it)
      rhs(it.row(), j) = -it.value();
  const Eigen::MatrixXd xi = patch.solve_interior(rhs);
  const Eigen::MatrixXd w = aib.transpose() * xi;  // A_BI X_I
  Eigen::MatrixXd gram(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      gram(i, j) = abb.coeff(bidx[i], bidx[j]) + w(bidx[i], j);
  return 0.5 * (gram + gram.transpose());
}

/// Free-node system of the oversampling patch: every node except the domain
/// boundary; one extra node pinned on fully interior patches to fix the
/// constant mode (results are invariant because all loads and evaluation
/// functionals annihilate constants).
struct FreeSystem {
  std::vector<int> free_index;  // patch-local -> free id, -1 where pinned
  int n_free = 0;
  Eigen::SimplicialLDLT<SparseMat> fact;
};

void build_free_system(const LocalPatch& patch, FreeSystem& fs) {
  fs.free_index.assign(patch.num_nodes(), -1);
  for (int local : patch.interior()) fs.free_index[local] = fs.n_free++;
  int pinned = -1;
  if (!patch.touches_domain_boundary()) pinned = patch.boundary()[0];
  const auto& bnd = patch.boundary();
  const auto& on_domain = patch.boundary_on_domain();
  for (size_t k = 0; k < bnd.size(); ++k) {
    if (on_domain[k] || bnd[k] == pinned) continue;
    fs.free_index[bnd[k]] = fs.n_free++;
  }

  std::vector<Eigen::Triplet<double>> trip;
  const SparseMat& aii = patch.interior_matrix();
  const SparseMat& aib = patch.coupling_matrix();
  const SparseMat& abb = patch.boundary_matrix();
  const auto& interior = patch.interior();
  for (int col = 0; col < aii.outerSize(); ++col)
    for (SparseMat::InnerIterator it(aii, col); it; ++it)
      trip.emplace_back(fs.free_index[interior[it.row()]],
                        fs.free_index[interior[it.col()]], it.value());
  for (int col = 0; col < aib.outerSize(); ++col)
    for (SparseMat::InnerIterator it(aib, col); it; ++it) {
      const int fi = fs.free_index[interior[it.row()]];
      const int fb = fs.free_index[bnd[it.col()]];
      if (fb < 0) continue;
      trip.emplace_back(fi, fb, it.value());
      trip.emplace_back(fb, fi, it.value());
    }
  for (int col = 0; col < abb.outerSize(); ++col)
    for (SparseMat::InnerIterator it(abb, col); it; ++it) {
      const int fi = fs.free_index[bnd[it.row()]];
      const int fj = fs.free_index[bnd[it.col()]];
      if (fi < 0 || fj < 0) continue;
      trip.emplace_back(fi, fj, it.value());
    }
  SparseMat a(fs.n_free, fs.n_free);
  a.setFromTriplets(trip.begin(), trip.end());
  fs.fact.compute(a);
  if (fs.fact.info() != Eigen::Success || fs.fact.vectorD().minCoeff() <= 0.0)
    throw FactorizationFailure("oversampling patch system is not positive definite");
}

EdgeSvdResult pencil_solve(const GridHierarchy& g, const CoarseEdge& e,
                           const LocalPatch& patch, const FreeSystem& fs,
                           const Eigen::MatrixXd& gram, int m) {
  const int nm = g.nb - 1;
  const EdgeGeometry geo = edge_geometry(g, e);

  // Collocation functionals c_j: +1 at the edge-interior node, minus the
  // linear interpolation weights at the endpoints; all entries sit on
  // patch-interior nodes (domain-boundary endpoints drop out).
  std::vector<int> eint(nm);
  for (int j = 1; j < g.nb; ++j)
    eint[j - 1] = patch.interior_index(patch.local_from_fine(geo.gx[j], geo.gy[j]));
  const int p0_local = patch.local_from_fine(geo.gx[0], geo.gy[0]);
  const int pn_local = patch.local_from_fine(geo.gx[g.nb], geo.gy[g.nb]);
  const int p0 = patch.interior_index(p0_local);
  const int pn = patch.interior_index(pn_local);

  const int ni = static_cast<int>(patch.interior().size());
  Eigen::MatrixXd c_int = Eigen::MatrixXd::Zero(ni, nm);
  for (int j = 1; j < g.nb; ++j) {
    const double t = static_cast<double>(j) / g.nb;
    c_int(eint[j - 1], j - 1) = 1.0;
    if (p0 >= 0) c_int(p0, j - 1) -= 1.0 - t;
    if (pn >= 0) c_int(pn, j - 1) -= t;
  }

  Eigen::MatrixXd c_free = Eigen::MatrixXd::Zero(fs.n_free, nm);
  const auto& interior = patch.interior();
  for (int i = 0; i < ni; ++i) {
    const int fi = fs.free_index[interior[i]];
    c_free.row(fi) = c_int.row(i);
  }

  const Eigen::MatrixXd z = fs.fact.solve(c_free);
  const Eigen::MatrixXd d = patch.solve_interior(c_int);
  Eigen::MatrixXd v(ni, nm);
  for (int i = 0; i < ni; ++i) v.row(i) = z.row(fs.free_index[interior[i]]) - d.row(i);
  Eigen::MatrixXd t_mat = c_int.transpose() * v;
  t_mat = 0.5 * (t_mat + t_mat.transpose()).eval();

  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw FactorizationFailure("edge energy Gram is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd small = l.transpose() * t_mat * l;
  small = 0.5 * (small + small.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
  if (es.info() != Eigen::Success)
    throw FactorizationFailure("edge pencil eigensolve failed");

  EdgeSvdResult result;
  result.lambda.resize(nm);
  int positive = 0;
  for (int k = 0; k < nm; ++k) {
    const double mu = es.eigenvalues()[nm - 1 - k];
    result.lambda[k] = std::sqrt(std::max(0.0, mu));
    if (mu > 0.0) ++positive;
  }
  const int take = std::min(m, positive);
  result.rank_capped = m > positive;
  result.functions.reserve(take);
  for (int k = 0; k < take; ++k) {
    const Eigen::VectorXd p = es.eigenvectors().col(nm - 1 - k);
    Eigen::VectorXd vtil =
        l.transpose().triangularView<Eigen::Upper>().solve(p);
    detail::canonical_sign(vtil);
    EdgeFunction fn;
    fn.edge = e.id;
    fn.values = Eigen::VectorXd::Zero(g.nb + 1);
    fn.values.segment(1, nm) = vtil;
    result.functions.push_back(std::move(fn));
  }
  return result;
}

EdgeFunction bubble_residue(const GridHierarchy& g, const CoarseEdge& e,
                            const LocalPatch& patch, const RhsEvaluator& f) {
  const Eigen::VectorXd ub = patch.solve_zero_trace(patch.interior_load(f));
  EdgeFunction fn;
  fn.edge = e.id;
  fn.values = residue_on_edge(g, e, patch, ub);
  return fn;
}

}  // namespace

namespace detail {

void canonical_sign(Eigen::VectorXd& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace detail

std::vector<TentFunction> tent_functions(const GridHierarchy& g) {
  std::vector<TentFunction> tents;
  tents.reserve(g.num_interior_nodes());
  for (int iy = 1; iy < g.nc; ++iy)
    for (int ix = 1; ix < g.nc; ++ix) {
      TentFunction tent;
      tent.node = g.interior_node_id(ix, iy);
      for (int edge_id : g.edges_of_node(tent.node)) {
        const CoarseEdge& e = g.edges[edge_id];
        Eigen::VectorXd trace(g.nb + 1);
        const bool at_low_end = e.endpoint_nodes[0] == tent.node;
        for (int j = 0; j <= g.nb; ++j) {
          const double t = static_cast<double>(j) / g.nb;
          trace[j] = at_low_end ? 1.0 - t : t;
        }
        tent.edges.push_back(edge_id);
        tent.traces.push_back(std::move(trace));
      }
      tents.push_back(std::move(tent));
    }
  return tents;
}

std::vector<Eigen::VectorXd> interpolate(const GridHierarchy& g,
                                         const Eigen::VectorXd& coarse_values) {
  if (coarse_values.size() != g.num_interior_nodes())
    throw DimensionMismatch("coarse value vector does not match the grid");
  std::vector<Eigen::VectorXd> traces;
  traces.reserve(g.edges.size());
  for (const CoarseEdge& e : g.edges) {
    const double v0 = e.endpoint_nodes[0] >= 0 ? coarse_values[e.endpoint_nodes[0]] : 0.0;
    const double v1 = e.endpoint_nodes[1] >= 0 ? coarse_values[e.endpoint_nodes[1]] : 0.0;
    Eigen::VectorXd trace(g.nb + 1);
    for (int j = 0; j <= g.nb; ++j) {
      const double t = static_cast<double>(j) / g.nb;
      trace[j] = (1.0 - t) * v0 + t * v1;
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

Eigen::MatrixXd h_half_gram(const GridHierarchy& g, const CoefficientField& field,
                            const CoarseEdge& e) {
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(g.nb - 1, g.nb - 1);
  for (int element : g.elements_of_edge(e.id))
    gram += element_gram_block(g, LocalPatch(g, field, element_footprint(g, element)), e);
  return gram;
}

double h00_half_norm_sq(const GridHierarchy& g, const EdgeFunction& psi) {
  if (psi.values.size() != g.nb + 1)
    throw DimensionMismatch("edge function does not match the grid");
  const Eigen::VectorXd& v = psi.values;
  const int nb = g.nb;
  const auto w = [nb](int i) { return (i == 0 || i == nb) ? 0.5 : 1.0; };
  double term_l2 = 0.0, term_gagliardo = 0.0, term_endpoint = 0.0;
  for (int i = 0; i <= nb; ++i) term_l2 += w(i) * v[i] * v[i];
  term_l2 *= g.h;
  for (int i = 0; i <= nb; ++i)
    for (int j = 0; j <= nb; ++j) {
      if (i == j) continue;
      const double diff = v[i] - v[j];
      term_gagliardo += w(i) * w(j) * diff * diff / ((i - j) * (i - j));
    }
  for (int i = 1; i < nb; ++i)
    term_endpoint += v[i] * v[i] / std::min(i, nb - i);
  return term_l2 + term_gagliardo + term_endpoint;
}

double h00_half_norm(const GridHierarchy& g, const EdgeFunction& psi) {
  return std::sqrt(h00_half_norm_sq(g, psi));
}

Eigen::MatrixXd build_restriction_operator(const GridHierarchy& g,
                                           const CoefficientField& field,
                                           const CoarseEdge& e) {
  const LocalPatch patch(g, field, oversampling_domain(g, e));
  std::vector<int> cols;
  for (size_t k = 0; k < patch.boundary().size(); ++k)
    if (!patch.boundary_on_domain()[k]) cols.push_back(static_cast<int>(k));
  Eigen::MatrixXd data =
      Eigen::MatrixXd::Zero(patch.boundary().size(), cols.size());
  for (size_t c = 0; c < cols.size(); ++c) data(cols[c], c) = 1.0;
  const Eigen::MatrixXd ext = patch.extend_batch(data);
  Eigen::MatrixXd r(g.nb - 1, cols.size());
  for (size_t c = 0; c < cols.size(); ++c)
    r.col(c) = residue_on_edge(g, e, patch, ext.col(c)).segment(1, g.nb - 1);
  return r;
}

EdgeSvdResult edge_svd(const GridHierarchy& g, const CoefficientField& field,
                       const CoarseEdge& e, int m) {
  if (m < 1) throw DimensionMismatch("requested singular pair count must be positive");
  const LocalPatch patch(g, field, oversampling_domain(g, e));
  FreeSystem fs;
  build_free_system(patch, fs);
  return pencil_solve(g, e, patch, fs, h_half_gram(g, field, e), m);
}

EdgeFunction oversampling_bubble_edge(const GridHierarchy& g,
                                      const CoefficientField& field,
                                      const CoarseEdge& e, const RhsEvaluator& f) {
  const LocalPatch patch(g, field, oversampling_domain(g, e));
  return bubble_residue(g, e, patch, f);
}

EdgeBasisSet build_edge_basis(const GridHierarchy& g, const CoefficientField& field,
                              int max_m, const RhsEvaluator* f) {
  if (max_m < 1) throw DimensionMismatch("requested enrichment depth must be positive");
  EdgeBasisSet basis;
  basis.nc = g.nc;
  basis.nf = g.nf;
  basis.coeff_hash = field.hash();
  basis.family = field.family;
  basis.params = field.params;
  basis.edges.resize(g.edges.size());

  // Element pass: each element's interior factorization serves the Gram
  // blocks of its four edges.
  std::vector<std::array<Eigen::MatrixXd, 4>> blocks(g.num_elements());
  parallel_for(g.num_elements(), [&](int element) {
    const LocalPatch patch(g, field, element_footprint(g, element));
    const auto edges = g.edges_of_element(element);
    for (size_t s = 0; s < edges.size(); ++s)
      blocks[element][s] = element_gram_block(g, patch, g.edges[edges[s]]);
  });

  // Edge pass: assemble the Gram from the two adjacent blocks, then solve
  // the pencil on the oversampling patch.
  parallel_for(static_cast<int>(g.edges.size()), [&](int idx) {
    const CoarseEdge& e = g.edges[idx];
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(g.nb - 1, g.nb - 1);
    for (int element : g.elements_of_edge(e.id)) {
      const auto edges = g.edges_of_element(element);
      for (size_t s = 0; s < edges.size(); ++s)
        if (edges[s] == e.id) gram += blocks[element][s];
    }
    const LocalPatch patch(g, field, oversampling_domain(g, e));
    FreeSystem fs;
    build_free_system(patch, fs);
    EdgeSvdResult svd = pencil_solve(g, e, patch, fs, gram, max_m);
    EdgeRecord& rec = basis.edges[idx];
    rec.lambda = std::move(svd.lambda);
    rec.functions = std::move(svd.functions);
    rec.m_e = static_cast<int>(rec.functions.size());
    rec.rank_capped = svd.rank_capped;
    if (f) rec.os_bubble = bubble_residue(g, e, patch, *f);
  });
  return basis;
}

TruncationResult adaptive_truncation(const EdgeBasisSet& basis, double tau) {
  if (tau <= 0.0) throw DimensionMismatch("truncation threshold must be positive");
  TruncationResult result;
  result.m_e.reserve(basis.edges.size());
  result.capped.reserve(basis.edges.size());
  for (const EdgeRecord& rec : basis.edges) {
    int m = -1;
    for (Eigen::Index k = 0; k < rec.lambda.size(); ++k)
      if (rec.lambda[k] < tau) {
        m = static_cast<int>(k) + 1;
        break;
      }
    result.capped.push_back(m < 0);
    result.m_e.push_back(m < 0 ? static_cast<int>(rec.lambda.size()) : m);
  }
  return result;
}

void set_uniform_truncation(EdgeBasisSet& basis, int m) {
  if (m < 0) throw ConfigError("enrichment depth must be nonnegative");
  for (EdgeRecord& rec : basis.edges) {
    const int have = static_cast<int>(rec.functions.size());
    if (m > have && !rec.rank_capped)
      throw ConfigError("requested enrichment depth exceeds the stored basis");
    rec.m_e = std::min(m, have);
  }
}

void attach_os_bubbles(const GridHierarchy& g, const CoefficientField& field,
                       EdgeBasisSet& basis, const RhsEvaluator& f) {
  if (basis.nc != g.nc || basis.nf != g.nf)
    throw ProvenanceMismatch("basis was built for a different grid");
  if (basis.edges.size() != g.edges.size())
    throw ProvenanceMismatch("basis does not cover the edge set");
  parallel_for(g.num_edges(), [&](int e) {
    basis.edges[e].os_bubble = oversampling_bubble_edge(g, field, g.edges[e], f);
  });
}

void apply_truncation(EdgeBasisSet& basis, const TruncationResult& trunc) {
  if (trunc.m_e.size() != basis.edges.size())
    throw DimensionMismatch("truncation result does not match the edge count");
  for (size_t e = 0; e < basis.edges.size(); ++e) {
    if (trunc.m_e[e] > static_cast<int>(basis.edges[e].functions.size()))
      throw ConfigError("truncation depth exceeds the stored basis");
    basis.edges[e].m_e = trunc.m_e[e];
  }
}

}  // namespace msbasis
