#include "msbasis/dense_reference.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "msbasis/errors.hpp"
#include "msbasis/fem_core.hpp"

namespace msbasis::dense {

namespace {

struct DensePatch {
  int nx = 0, ny = 0;    // fine cells per side
  int gx0 = 0, gy0 = 0;  // fine origin
  std::vector<int> interior;  // strict inside, scan order
  std::vector<int> gamma;     // rectangle boundary off the domain boundary
  std::vector<int> interior_index, gamma_index;
  Eigen::MatrixXd a;  // full patch stiffness, no boundary conditions
  bool pinned = false;  // true when the domain boundary removes the constant

  int local(int lx, int ly) const { return ly * (nx + 1) + lx; }
  int local_of_fine(int gx, int gy) const { return local(gx - gx0, gy - gy0); }
};

DensePatch make_patch(const GridHierarchy& g, const CoefficientField& field,
                      const PatchFootprint& fp) {
  DensePatch p;
  p.nx = fp.cells_x() * g.nb;
  p.ny = fp.cells_y() * g.nb;
  p.gx0 = fp.cx0 * g.nb;
  p.gy0 = fp.cy0 * g.nb;
  const int n = (p.nx + 1) * (p.ny + 1);
  p.a = Eigen::MatrixXd::Zero(n, n);
  for (int cy = 0; cy < p.ny; ++cy)
    for (int cx = 0; cx < p.nx; ++cx) {
      const Eigen::Matrix4d k =
          cell_stiffness(field.at_cell(p.gx0 + cx, p.gy0 + cy), g.h);
      const int corner[4] = {p.local(cx, cy), p.local(cx + 1, cy),
                             p.local(cx + 1, cy + 1), p.local(cx, cy + 1)};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p.a(corner[i], corner[j]) += k(i, j);
    }
  p.interior_index.assign(n, -1);
  p.gamma_index.assign(n, -1);
  for (int ly = 0; ly <= p.ny; ++ly)
    for (int lx = 0; lx <= p.nx; ++lx) {
      const int local = p.local(lx, ly);
      const bool rect = lx == 0 || lx == p.nx || ly == 0 || ly == p.ny;
      const int gx = p.gx0 + lx, gy = p.gy0 + ly;
      const bool domain = gx == 0 || gx == g.nf || gy == 0 || gy == g.nf;
      if (!rect) {
        p.interior_index[local] = static_cast<int>(p.interior.size());
        p.interior.push_back(local);
      } else if (!domain) {
        p.gamma_index[local] = static_cast<int>(p.gamma.size());
        p.gamma.push_back(local);
      } else {
        p.pinned = true;
      }
    }
  return p;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& a, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
  return out;
}

Eigen::MatrixXd schur_on_gamma(const DensePatch& p) {
  const Eigen::MatrixXd aii = submatrix(p.a, p.interior, p.interior);
  const Eigen::MatrixXd aig = submatrix(p.a, p.interior, p.gamma);
  const Eigen::MatrixXd agg = submatrix(p.a, p.gamma, p.gamma);
  const Eigen::MatrixXd s = agg - aig.transpose() * aii.ldlt().solve(aig);
  return 0.5 * (s + s.transpose());
}

std::vector<std::pair<int, int>> edge_node_coords(const GridHierarchy& g,
                                                 const CoarseEdge& e) {
  std::vector<std::pair<int, int>> out(g.nb + 1);
  for (int j = 0; j <= g.nb; ++j)
    out[j] = e.orientation == EdgeOrientation::horizontal
                 ? std::make_pair(e.ix * g.nb + j, e.iy * g.nb)
                 : std::make_pair(e.ix * g.nb, e.iy * g.nb + j);
  return out;
}

Eigen::MatrixXd restriction_from_patch(const GridHierarchy& g, const CoarseEdge& e,
                                       const DensePatch& p) {
  const Eigen::MatrixXd aii = submatrix(p.a, p.interior, p.interior);
  const Eigen::MatrixXd aig = submatrix(p.a, p.interior, p.gamma);
  const Eigen::MatrixXd ext = -aii.ldlt().solve(aig);  // interior rows per unit datum

  const auto coords = edge_node_coords(g, e);
  const auto value_row = [&](int j) -> Eigen::RowVectorXd {
    const int local = p.local_of_fine(coords[j].first, coords[j].second);
    if (p.interior_index[local] >= 0) return ext.row(p.interior_index[local]);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p.gamma.size());
    if (p.gamma_index[local] >= 0) row[p.gamma_index[local]] = 1.0;
    return row;  // domain-boundary node: identically zero
  };
  const Eigen::RowVectorXd v0 = value_row(0);
  const Eigen::RowVectorXd v1 = value_row(g.nb);
  Eigen::MatrixXd r(g.nb - 1, p.gamma.size());
  for (int j = 1; j < g.nb; ++j) {
    const double t = static_cast<double>(j) / g.nb;
    r.row(j - 1) = value_row(j) - (1.0 - t) * v0 - t * v1;
  }
  return r;
}

}  // namespace

Eigen::MatrixXd patch_stiffness(const GridHierarchy& g, const CoefficientField& field,
                                const PatchFootprint& fp) {
  return make_patch(g, field, fp).a;
}

Eigen::MatrixXd boundary_energy_gram(const GridHierarchy& g,
                                     const CoefficientField& field,
                                     const CoarseEdge& e) {
  return schur_on_gamma(make_patch(g, field, oversampling_domain(g, e)));
}

Eigen::MatrixXd restriction_matrix(const GridHierarchy& g,
                                   const CoefficientField& field,
                                   const CoarseEdge& e) {
  const DensePatch p = make_patch(g, field, oversampling_domain(g, e));
  return restriction_from_patch(g, e, p);
}

Eigen::MatrixXd edge_energy_gram(const GridHierarchy& g, const CoefficientField& field,
                                 const CoarseEdge& e) {
  const auto coords = edge_node_coords(g, e);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(g.nb - 1, g.nb - 1);
  for (int element : g.elements_of_edge(e.id)) {
    const DensePatch p = make_patch(g, field, element_footprint(g, element));
    // element boundary = all rectangle nodes; Dirichlet data everywhere
    std::vector<int> boundary;
    std::vector<int> bindex(p.a.rows(), -1);
    for (int ly = 0; ly <= p.ny; ++ly)
      for (int lx = 0; lx <= p.nx; ++lx)
        if (lx == 0 || lx == p.nx || ly == 0 || ly == p.ny) {
          bindex[p.local(lx, ly)] = static_cast<int>(boundary.size());
          boundary.push_back(p.local(lx, ly));
        }
    const Eigen::MatrixXd aii = submatrix(p.a, p.interior, p.interior);
    const Eigen::MatrixXd aib = submatrix(p.a, p.interior, boundary);
    const Eigen::MatrixXd abb = submatrix(p.a, boundary, boundary);
    const Eigen::MatrixXd schur = abb - aib.transpose() * aii.ldlt().solve(aib);
    for (int i = 1; i < g.nb; ++i)
      for (int j = 1; j < g.nb; ++j) {
        const int bi = bindex[p.local_of_fine(coords[i].first, coords[i].second)];
        const int bj = bindex[p.local_of_fine(coords[j].first, coords[j].second)];
        gram(i - 1, j - 1) += schur(bi, bj);
      }
  }
  return 0.5 * (gram + gram.transpose());
}

EdgeSvdResult edge_svd(const GridHierarchy& g, const CoefficientField& field,
                       const CoarseEdge& e, int m) {
  const DensePatch p = make_patch(g, field, oversampling_domain(g, e));
  const Eigen::MatrixXd s = schur_on_gamma(p);
  const Eigen::MatrixXd r = restriction_from_patch(g, e, p);
  const Eigen::MatrixXd gram = edge_energy_gram(g, field, e);
  const int ng = static_cast<int>(p.gamma.size());

  Eigen::MatrixXd q;
  if (p.pinned) {
    q = Eigen::MatrixXd::Identity(ng, ng);
  } else {
    // explicit deflation of the constant mode: orthonormal basis of 1-perp
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(ng, 1);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
    const Eigen::MatrixXd qfull = qr.householderQ();
    q = qfull.rightCols(ng - 1);
  }
  Eigen::MatrixXd a_red = q.transpose() * s * q;
  Eigen::MatrixXd b_red = q.transpose() * (r.transpose() * gram * r) * q;
  a_red = 0.5 * (a_red + a_red.transpose()).eval();
  b_red = 0.5 * (b_red + b_red.transpose()).eval();

  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(b_red, a_red);
  if (ges.info() != Eigen::Success)
    throw FactorizationFailure("dense pencil eigensolve failed");

  const int dim = static_cast<int>(a_red.rows());
  const int report = std::min(dim, g.nb - 1);
  EdgeSvdResult result;
  result.lambda.resize(report);
  int positive = 0;
  for (int k = 0; k < dim; ++k)
    if (ges.eigenvalues()[k] > 0.0) ++positive;
  for (int k = 0; k < report; ++k)
    result.lambda[k] = std::sqrt(std::max(0.0, ges.eigenvalues()[dim - 1 - k]));
  const int take = std::min(m, positive);
  result.rank_capped = m > positive;
  for (int k = 0; k < take; ++k) {
    const Eigen::VectorXd y = ges.eigenvectors().col(dim - 1 - k);
    Eigen::VectorXd vtil = r * (q * y) / result.lambda[k];
    detail::canonical_sign(vtil);
    EdgeFunction fn;
    fn.edge = e.id;
    fn.values = Eigen::VectorXd::Zero(g.nb + 1);
    fn.values.segment(1, g.nb - 1) = vtil;
    result.functions.push_back(std::move(fn));
  }
  return result;
}

}  // namespace msbasis::dense
