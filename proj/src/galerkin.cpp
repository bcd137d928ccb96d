#include "msbasis/galerkin.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "msbasis/errors.hpp"
#include "msbasis/parallel.hpp"

namespace msbasis {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Coarse hat of the node at fine coordinates (nx, ny) evaluated at a fine
/// node, written branch-for-branch like the tent traces so shared-edge
/// values coincide bitwise.
double hat_value(const GridHierarchy& g, int nx, int ny, int gx, int gy) {
  const int dx = gx - nx;
  const int dy = gy - ny;
  if (dx < -g.nb || dx > g.nb || dy < -g.nb || dy > g.nb) return 0.0;
  const double wx = dx >= 0 ? 1.0 - static_cast<double>(dx) / g.nb
                            : static_cast<double>(dx + g.nb) / g.nb;
  const double wy = dy >= 0 ? 1.0 - static_cast<double>(dy) / g.nb
                            : static_cast<double>(dy + g.nb) / g.nb;
  return wx * wy;
}

/// Boundary indices of the nb+1 fine nodes of an edge within an element
/// patch; every edge node lies on the element boundary.
std::vector<int> edge_boundary_indices(const GridHierarchy& g, const LocalPatch& patch,
                                       int edge) {
  const auto nodes = g.edge_fine_nodes(edge);
  std::vector<int> bidx(nodes.size());
  for (size_t j = 0; j < nodes.size(); ++j) {
    const int gx = nodes[j] % (g.nf + 1);
    const int gy = nodes[j] / (g.nf + 1);
    const int b = patch.boundary_index(patch.local_from_fine(gx, gy));
    if (b < 0) throw DimensionMismatch("edge node is not on the element boundary");
    bidx[j] = b;
  }
  return bidx;
}

}  // namespace

GalerkinSpace build_space(const GridHierarchy& g, const CoefficientField& field,
                          const EdgeBasisSet& basis, bool include_os_bubble) {
  const auto t0 = std::chrono::steady_clock::now();
  if (basis.nc != g.nc || basis.nf != g.nf)
    throw ProvenanceMismatch("edge basis was built for a different grid");
  if (basis.coeff_hash != field.hash())
    throw ProvenanceMismatch("edge basis was built for a different coefficient");
  if (basis.edges.size() != g.edges.size())
    throw ProvenanceMismatch("edge basis does not cover the edge set");

  GalerkinSpace space;
  space.nc = g.nc;
  space.nf = g.nf;
  space.coeff_hash = basis.coeff_hash;
  space.has_os_bubble = include_os_bubble;
  space.num_tents = g.num_interior_nodes();

  std::vector<int> enrich_offset(g.edges.size() + 1, 0);
  for (size_t e = 0; e < basis.edges.size(); ++e) {
    const EdgeRecord& rec = basis.edges[e];
    if (rec.m_e < 0 || rec.m_e > static_cast<int>(rec.functions.size()))
      throw ProvenanceMismatch("per-edge depth exceeds the stored functions");
    if (include_os_bubble && !rec.os_bubble.has_value())
      throw ProvenanceMismatch("basis lacks os-bubble traces for this right-hand side");
    enrich_offset[e + 1] = enrich_offset[e] + rec.m_e;
  }
  space.num_enrichments = enrich_offset.back();
  const int osb_base = space.num_tents + space.num_enrichments;
  const int total = osb_base + (include_os_bubble ? g.num_edges() : 0);

  space.classification.resize(total);
  for (int n = 0; n < space.num_tents; ++n)
    space.classification[n] = {BasisKind::tent, n, -1, 0};
  for (int e = 0; e < g.num_edges(); ++e)
    for (int k = 0; k < basis.edges[e].m_e; ++k)
      space.classification[space.num_tents + enrich_offset[e] + k] = {
          BasisKind::svd_enrichment, -1, e, k + 1};
  if (include_os_bubble)
    for (int e = 0; e < g.num_edges(); ++e)
      space.classification[osb_base + e] = {BasisKind::os_bubble, -1, e, 0};

  space.next_lambda.resize(g.edges.size());
  for (size_t e = 0; e < basis.edges.size(); ++e) {
    const EdgeRecord& rec = basis.edges[e];
    space.next_lambda[e] =
        rec.m_e < static_cast<int>(rec.lambda.size()) ? rec.lambda[rec.m_e] : 0.0;
  }

  space.elements.resize(g.num_elements());
  parallel_for(g.num_elements(), [&](int element) {
    const LocalPatch patch(g, field, element_footprint(g, element));
    const int ex = element % g.nc;
    const int ey = element / g.nc;
    const auto& bnodes = patch.boundary();

    std::vector<int> dofs;
    std::vector<Eigen::VectorXd> cols;

    for (int ny = 0; ny <= 1; ++ny)
      for (int nx = 0; nx <= 1; ++nx) {
        const int cx = ex + nx;
        const int cy = ey + ny;
        if (cx < 1 || cx > g.nc - 1 || cy < 1 || cy > g.nc - 1) continue;
        Eigen::VectorXd data = Eigen::VectorXd::Zero(bnodes.size());
        for (size_t kb = 0; kb < bnodes.size(); ++kb) {
          const int lx = bnodes[kb] % (patch.cells_x() + 1);
          const int ly = bnodes[kb] / (patch.cells_x() + 1);
          data[kb] = hat_value(g, cx * g.nb, cy * g.nb, patch.origin_x() + lx,
                               patch.origin_y() + ly);
        }
        dofs.push_back(g.interior_node_id(cx, cy));
        cols.push_back(std::move(data));
      }

    const std::vector<int> elem_edges = g.edges_of_element(element);
    for (int eid : elem_edges) {
      const EdgeRecord& rec = basis.edges[eid];
      if (rec.m_e == 0) continue;
      const std::vector<int> bidx = edge_boundary_indices(g, patch, eid);
      for (int k = 0; k < rec.m_e; ++k) {
        Eigen::VectorXd data = Eigen::VectorXd::Zero(bnodes.size());
        for (int j = 1; j < g.nb; ++j) data[bidx[j]] = rec.functions[k].values[j];
        dofs.push_back(space.num_tents + enrich_offset[eid] + k);
        cols.push_back(std::move(data));
      }
    }
    if (include_os_bubble)
      for (int eid : elem_edges) {
        const std::vector<int> bidx = edge_boundary_indices(g, patch, eid);
        Eigen::VectorXd data = Eigen::VectorXd::Zero(bnodes.size());
        for (int j = 1; j < g.nb; ++j)
          data[bidx[j]] = basis.edges[eid].os_bubble->values[j];
        dofs.push_back(osb_base + eid);
        cols.push_back(std::move(data));
      }

    ElementBlock& block = space.elements[element];
    block.dofs = std::move(dofs);
    Eigen::MatrixXd data_mat(bnodes.size(), cols.size());
    for (size_t j = 0; j < cols.size(); ++j) data_mat.col(j) = cols[j];
    block.values = patch.extend_batch(data_mat);
  });

  space.build_seconds = seconds_since(t0);
  return space;
}

FineFunction elementwise_bubble(const GridHierarchy& g, const CoefficientField& field,
                                const RhsEvaluator& f) {
  FineFunction out = zero_fine_function(g);
  parallel_for(g.num_elements(), [&](int element) {
    const LocalPatch patch(g, field, element_footprint(g, element));
    const Eigen::VectorXd xi = patch.solve_zero_trace(patch.interior_load(f));
    for (int li : patch.interior()) out.values[patch.global_node(li)] = xi[li];
  });
  return out;
}

SolutionReport solve_variant(const GridHierarchy& g, const CoefficientField& field,
                             const GalerkinSpace& space, const RhsEvaluator& f, int k,
                             const FineFunction* precomputed_bubble) {
  if (k < 1 || k > 3) throw ConfigError("variant must be 1, 2 or 3");
  if (space.nc != g.nc || space.nf != g.nf)
    throw ProvenanceMismatch("space was built for a different grid");
  if (space.coeff_hash != field.hash())
    throw ProvenanceMismatch("space was built for a different coefficient");
  if (k == 3 && !space.has_os_bubble)
    throw ConfigError("variant 3 requires a space with os-bubble columns");

  SolutionReport report;
  report.variant = k;
  report.nc = g.nc;
  report.nf = g.nf;
  report.coeff_hash = space.coeff_hash;
  report.timings.space_seconds = space.build_seconds;

  const auto t_assemble = std::chrono::steady_clock::now();
  const int nd = space.num_dofs();
  std::vector<int> act(nd, -1);
  std::vector<int> act_dofs;
  for (int i = 0; i < nd; ++i) {
    if (space.classification[i].kind == BasisKind::os_bubble && k != 3) continue;
    act[i] = static_cast<int>(act_dofs.size());
    act_dofs.push_back(i);
  }
  const int na = static_cast<int>(act_dofs.size());
  if (na == 0) throw SingularCoarseSystem("space has no active basis functions");

  struct Contrib {
    std::vector<int> aidx;
    Eigen::MatrixXd gram;
    Eigen::VectorXd load;
  };
  std::vector<Contrib> contribs(g.num_elements());
  parallel_for(g.num_elements(), [&](int element) {
    const ElementBlock& block = space.elements[element];
    Contrib& c = contribs[element];
    std::vector<int> colsel;
    for (size_t j = 0; j < block.dofs.size(); ++j)
      if (act[block.dofs[j]] >= 0) {
        c.aidx.push_back(act[block.dofs[j]]);
        colsel.push_back(static_cast<int>(j));
      }
    if (c.aidx.empty()) return;
    const int m = static_cast<int>(colsel.size());
    Eigen::MatrixXd phi(block.values.rows(), m);
    Eigen::MatrixXd kphi(block.values.rows(), m);
    for (int j = 0; j < m; ++j) phi.col(j) = block.values.col(colsel[j]);
    for (int j = 0; j < m; ++j)
      kphi.col(j) = element_stiffness_apply(g, field, element, phi.col(j));
    c.gram = phi.transpose() * kphi;
    c.load = phi.transpose() * element_load(g, f, element);
  });

  std::vector<Eigen::Triplet<double>> trips;
  size_t nnz = 0;
  for (const Contrib& c : contribs) nnz += c.aidx.size() * c.aidx.size();
  trips.reserve(nnz);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(na);
  for (const Contrib& c : contribs)
    for (size_t i = 0; i < c.aidx.size(); ++i) {
      rhs[c.aidx[i]] += c.load[i];
      for (size_t j = 0; j < c.aidx.size(); ++j)
        trips.emplace_back(c.aidx[i], c.aidx[j], c.gram(i, j));
    }
  SparseMat gram(na, na);
  gram.setFromTriplets(trips.begin(), trips.end());
  trips.clear();
  trips.shrink_to_fit();
  report.timings.assemble_seconds = seconds_since(t_assemble);

  const auto t_solve = std::chrono::steady_clock::now();
  std::vector<char> keep(na, 1);
  std::vector<int> pruned_act;
  const Eigen::VectorXd diag = gram.diagonal();
  const double diag_max = diag.maxCoeff();
  if (!(diag_max > 0.0)) throw SingularCoarseSystem("coarse system carries no energy");
  for (int i = 0; i < na; ++i)
    if (diag[i] <= 1e-28 * diag_max) {
      keep[i] = 0;
      pruned_act.push_back(i);
    }

  Eigen::SimplicialLDLT<SparseMat> ldlt;
  std::vector<int> sub2act;
  for (int round = 0;; ++round) {
    if (round > na) throw SingularCoarseSystem("dependency pruning did not converge");
    sub2act.clear();
    std::vector<int> act2sub(na, -1);
    for (int i = 0; i < na; ++i)
      if (keep[i]) {
        act2sub[i] = static_cast<int>(sub2act.size());
        sub2act.push_back(i);
      }
    if (sub2act.empty()) throw SingularCoarseSystem("all coarse columns were pruned");
    const int ns = static_cast<int>(sub2act.size());

    std::vector<Eigen::Triplet<double>> st;
    st.reserve(gram.nonZeros());
    for (int outer = 0; outer < gram.outerSize(); ++outer)
      for (SparseMat::InnerIterator it(gram, outer); it; ++it)
        if (keep[it.row()] && keep[it.col()])
          st.emplace_back(act2sub[it.row()], act2sub[it.col()], it.value());
    SparseMat sub(ns, ns);
    sub.setFromTriplets(st.begin(), st.end());

    // an exactly singular pivot aborts the factorization early; a tiny
    // diagonal shift exposes the full pivot sequence so the culprit column
    // can still be located
    bool shifted = false;
    ldlt.setShift(0.0);
    ldlt.compute(sub);
    if (ldlt.info() != Eigen::Success) {
      shifted = true;
      ldlt.setShift(1e-14 * diag_max);
      ldlt.compute(sub);
      if (ldlt.info() != Eigen::Success)
        throw SingularCoarseSystem("coarse factorization failed");
    }
    const Eigen::VectorXd d = ldlt.vectorD();
    double dmax = 0.0;
    for (int i = 0; i < ns; ++i)
      if (std::isfinite(d[i])) dmax = std::max(dmax, std::abs(d[i]));
    if (!(dmax > 0.0)) throw SingularCoarseSystem("coarse pivots vanish");
    int first_bad = -1;
    for (int i = 0; i < ns; ++i)
      if (!std::isfinite(d[i]) || std::abs(d[i]) <= 1e-12 * dmax) {
        first_bad = i;
        break;
      }
    if (first_bad < 0) {
      if (shifted) throw SingularCoarseSystem("singular pivot could not be located");
      break;
    }
    // vectorD follows the permuted ordering, so position first_bad maps back
    // through the inverse permutation to the offending submatrix column
    const int target =
        sub2act[ldlt.permutationP().inverse().eval().indices()[first_bad]];
    keep[target] = 0;
    pruned_act.push_back(target);
  }

  Eigen::VectorXd rhs_sub(sub2act.size());
  for (size_t s = 0; s < sub2act.size(); ++s) rhs_sub[s] = rhs[sub2act[s]];
  const Eigen::VectorXd coeff_sub = ldlt.solve(rhs_sub);
  if (!coeff_sub.allFinite())
    throw SingularCoarseSystem("coarse solve produced non-finite values");
  report.timings.solve_seconds = seconds_since(t_solve);

  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(nd);
  for (size_t s = 0; s < sub2act.size(); ++s)
    coeff[act_dofs[sub2act[s]]] = coeff_sub[s];
  for (int a : pruned_act) report.pruned_dofs.push_back(act_dofs[a]);
  std::sort(report.pruned_dofs.begin(), report.pruned_dofs.end());

  FineFunction u = zero_fine_function(g);
  Eigen::VectorXd local_coeff, local_vals;
  for (int element = 0; element < g.num_elements(); ++element) {
    const ElementBlock& block = space.elements[element];
    if (block.dofs.empty()) continue;
    local_coeff.resize(block.dofs.size());
    for (size_t j = 0; j < block.dofs.size(); ++j) local_coeff[j] = coeff[block.dofs[j]];
    local_vals = block.values * local_coeff;
    const std::vector<int> nodes = element_node_ids(g, element);
    for (size_t i = 0; i < nodes.size(); ++i) u.values[nodes[i]] = local_vals[i];
  }

  if (k >= 2) {
    const auto t_bubble = std::chrono::steady_clock::now();
    if (precomputed_bubble != nullptr) {
      if (precomputed_bubble->values.size() != u.values.size())
        throw DimensionMismatch("precomputed bubble lives on a different grid");
      u.values += precomputed_bubble->values;
    } else {
      u.values += elementwise_bubble(g, field, f).values;
    }
    report.timings.bubble_seconds = seconds_since(t_bubble);
  }

  // per-edge indicators: next singular value times the local energy content
  Eigen::VectorXd cell_energy(g.num_fine_cells());
  const Eigen::Matrix4d kref = cell_stiffness(1.0, g.h);
  for (int cy = 0; cy < g.nf; ++cy)
    for (int cx = 0; cx < g.nf; ++cx) {
      const auto corners = cell_corner_nodes(g, cx, cy);
      Eigen::Vector4d v;
      for (int i = 0; i < 4; ++i) v[i] = u.values[corners[i]];
      cell_energy[g.fine_cell(cx, cy)] = field.at_cell(cx, cy) * v.dot(kref * v);
    }
  report.epsilon_e.resize(g.edges.size());
  for (const CoarseEdge& e : g.edges) {
    const PatchFootprint fp = oversampling_domain(g, e.id);
    double sum = 0.0;
    for (int cy = fp.cy0 * g.nb; cy < (fp.cy1 + 1) * g.nb; ++cy)
      for (int cx = fp.cx0 * g.nb; cx < (fp.cx1 + 1) * g.nb; ++cx)
        sum += cell_energy[g.fine_cell(cx, cy)];
    report.epsilon_e[e.id] = space.next_lambda[e.id] * std::sqrt(std::max(0.0, sum));
  }

  report.solution = std::move(u);
  return report;
}

ErrorPair error_report(const GridHierarchy& g, const CoefficientField& field,
                       const FineFunction& u, const FineFunction& u_ref) {
  if (u.values.size() != u_ref.values.size())
    throw DimensionMismatch("candidate and reference live on different grids");
  ErrorPair out;
  out.ref_energy_norm = energy_norm(g, field, u_ref);
  out.ref_l2_norm = l2_norm(g, u_ref);
  FineFunction diff;
  diff.nf = g.nf;
  diff.values = u_ref.values - u.values;
  const double de = energy_norm(g, field, diff);
  const double dl = l2_norm(g, diff);
  if (out.ref_energy_norm == 0.0 || out.ref_l2_norm == 0.0) {
    if (de > 0.0 || dl > 0.0)
      throw ZeroReference("relative error against a zero reference");
    return out;
  }
  out.e_energy = de / out.ref_energy_norm;
  out.e_l2 = dl / out.ref_l2_norm;
  return out;
}

void attach_errors(SolutionReport& report, const GridHierarchy& g,
                   const CoefficientField& field, const FineFunction& u_ref) {
  const ErrorPair pair = error_report(g, field, report.solution, u_ref);
  report.e_energy = pair.e_energy;
  report.e_l2 = pair.e_l2;
  report.ref_energy_norm = pair.ref_energy_norm;
  report.ref_l2_norm = pair.ref_l2_norm;
}

double residual_orthogonality_check(const GridHierarchy& g, const CoefficientField& field,
                                    const GalerkinSpace& space,
                                    const SolutionReport& report,
                                    const RhsEvaluator& f) {
  if (report.ref_energy_norm <= 0.0)
    throw ConfigError("attach_errors must run before the orthogonality check");
  if (report.solution.values.size() != g.num_fine_nodes())
    throw DimensionMismatch("report solution does not match the grid");

  const int nd = space.num_dofs();
  std::vector<char> active(nd, 1);
  for (int i = 0; i < nd; ++i)
    if (space.classification[i].kind == BasisKind::os_bubble && report.variant != 3)
      active[i] = 0;
  for (int dof : report.pruned_dofs) active[dof] = 0;

  Eigen::VectorXd defect = Eigen::VectorXd::Zero(nd);
  Eigen::VectorXd norm2 = Eigen::VectorXd::Zero(nd);
  for (int element = 0; element < g.num_elements(); ++element) {
    const ElementBlock& block = space.elements[element];
    if (block.dofs.empty()) continue;
    const std::vector<int> nodes = element_node_ids(g, element);
    Eigen::VectorXd u_local(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) u_local[i] = report.solution.values[nodes[i]];
    const Eigen::VectorXd load = element_load(g, f, element);
    for (size_t j = 0; j < block.dofs.size(); ++j) {
      if (!active[block.dofs[j]]) continue;
      const Eigen::VectorXd kcol =
          element_stiffness_apply(g, field, element, block.values.col(j));
      defect[block.dofs[j]] += load.dot(block.values.col(j)) - kcol.dot(u_local);
      norm2[block.dofs[j]] += kcol.dot(block.values.col(j));
    }
  }

  double worst = 0.0;
  for (int i = 0; i < nd; ++i) {
    if (!active[i] || norm2[i] <= 0.0) continue;
    worst = std::max(worst,
                     std::abs(defect[i]) / (report.ref_energy_norm * std::sqrt(norm2[i])));
  }
  return worst;
}

}  // namespace msbasis
