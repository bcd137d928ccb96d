#include "msbasis/fem_core.hpp"

#include <cmath>
#include <stdexcept>

#include "msbasis/errors.hpp"

namespace msbasis {

namespace {

const Eigen::Matrix4d& reference_stiffness() {
  static const Eigen::Matrix4d k = [] {
    Eigen::Matrix4d m;
    m << 4, -1, -2, -1,
        -1, 4, -1, -2,
        -2, -1, 4, -1,
        -1, -2, -1, 4;
    return Eigen::Matrix4d(m / 6.0);
  }();
  return k;
}

const Eigen::Matrix4d& reference_mass() {
  static const Eigen::Matrix4d m = [] {
    Eigen::Matrix4d r;
    r << 4, 2, 1, 2,
        2, 4, 2, 1,
        1, 2, 4, 2,
        2, 1, 2, 4;
    return Eigen::Matrix4d(r / 36.0);
  }();
  return m;
}

struct GaussPoint {
  double xi, eta;
};

// 2x2 tensor Gauss rule on the reference square [0,1]^2, weight 1/4 each.
const std::array<GaussPoint, 4>& gauss_points() {
  static const std::array<GaussPoint, 4> pts = [] {
    const double lo = 0.5 - 0.5 / std::sqrt(3.0);
    const double hi = 0.5 + 0.5 / std::sqrt(3.0);
    return std::array<GaussPoint, 4>{
        GaussPoint{lo, lo}, GaussPoint{hi, lo}, GaussPoint{hi, hi}, GaussPoint{lo, hi}};
  }();
  return pts;
}

std::array<double, 4> shape_values(double xi, double eta) {
  return {(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta};
}

void accumulate_cell_load(const RhsEvaluator& f, double h, double x0, double y0,
                          double* out4) {
  const double w = 0.25 * h * h;
  for (const auto& gp : gauss_points()) {
    const double fx = f(x0 + gp.xi * h, y0 + gp.eta * h);
    const auto n = shape_values(gp.xi, gp.eta);
    for (int k = 0; k < 4; ++k) out4[k] += w * fx * n[k];
  }
}

void check_same_grid(const GridHierarchy& g, const FineFunction& u) {
  const auto n = (g.nf + 1) * (g.nf + 1);
  if (u.nf != g.nf || u.values.size() != n)
    throw DimensionMismatch("fine function does not match the grid");
}

}  // namespace

Eigen::Matrix4d cell_stiffness(double a_cell, double h) {
  (void)h;  // the Q1 stiffness is scale invariant in 2D
  return a_cell * reference_stiffness();
}

Eigen::Matrix4d cell_mass(double h) { return (h * h) * reference_mass(); }

std::array<int, 4> cell_corner_nodes(const GridHierarchy& g, int cx, int cy) {
  return {g.fine_node(cx, cy), g.fine_node(cx + 1, cy), g.fine_node(cx + 1, cy + 1),
          g.fine_node(cx, cy + 1)};
}

FineFunction zero_fine_function(const GridHierarchy& g) {
  FineFunction u;
  u.nf = g.nf;
  u.values = Eigen::VectorXd::Zero((g.nf + 1) * (g.nf + 1));
  return u;
}

LocalPatch::LocalPatch(const GridHierarchy& g, const CoefficientField& field,
                       PatchFootprint fp)
    : g_(&g), fp_(fp) {
  if (field.nf != g.nf) throw DimensionMismatch("coefficient does not match the grid");
  nx_ = fp.cells_x() * g.nb;
  ny_ = fp.cells_y() * g.nb;
  gx0_ = fp.cx0 * g.nb;
  gy0_ = fp.cy0 * g.nb;

  const int n = num_nodes();
  interior_index_.assign(n, -1);
  boundary_index_.assign(n, -1);
  for (int ly = 0; ly <= ny_; ++ly)
    for (int lx = 0; lx <= nx_; ++lx) {
      const int local = local_node(lx, ly);
      if (lx == 0 || lx == nx_ || ly == 0 || ly == ny_) {
        boundary_index_[local] = static_cast<int>(boundary_.size());
        boundary_.push_back(local);
        const int gx = gx0_ + lx, gy = gy0_ + ly;
        boundary_on_domain_.push_back(gx == 0 || gx == g.nf || gy == 0 || gy == g.nf);
      } else {
        interior_index_[local] = static_cast<int>(interior_.size());
        interior_.push_back(local);
      }
    }
  touches_domain_boundary_ = false;
  for (bool b : boundary_on_domain_) touches_domain_boundary_ |= b;

  std::vector<Eigen::Triplet<double>> tii, tib, tbb;
  tii.reserve(static_cast<size_t>(nx_) * ny_ * 16);
  for (int lcy = 0; lcy < ny_; ++lcy)
    for (int lcx = 0; lcx < nx_; ++lcx) {
      const double a = field.at_cell(gx0_ + lcx, gy0_ + lcy);
      const std::array<int, 4> corner = {
          local_node(lcx, lcy), local_node(lcx + 1, lcy), local_node(lcx + 1, lcy + 1),
          local_node(lcx, lcy + 1)};
      const Eigen::Matrix4d& k = reference_stiffness();
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const double v = a * k(i, j);
          const int li = corner[i], lj = corner[j];
          if (interior_index_[li] >= 0 && interior_index_[lj] >= 0)
            tii.emplace_back(interior_index_[li], interior_index_[lj], v);
          else if (interior_index_[li] >= 0)
            tib.emplace_back(interior_index_[li], boundary_index_[lj], v);
          else if (interior_index_[lj] < 0)
            tbb.emplace_back(boundary_index_[li], boundary_index_[lj], v);
        }
    }
  const int ni = static_cast<int>(interior_.size());
  const int nb = static_cast<int>(boundary_.size());
  a_ii_.resize(ni, ni);
  a_ii_.setFromTriplets(tii.begin(), tii.end());
  a_ib_.resize(ni, nb);
  a_ib_.setFromTriplets(tib.begin(), tib.end());
  a_bb_.resize(nb, nb);
  a_bb_.setFromTriplets(tbb.begin(), tbb.end());

  fact_.compute(a_ii_);
  if (fact_.info() != Eigen::Success || fact_.vectorD().minCoeff() <= 0.0)
    throw FactorizationFailure("patch interior stiffness is not positive definite");
}

int LocalPatch::global_node(int local) const {
  const int lx = local % (nx_ + 1), ly = local / (nx_ + 1);
  return g_->fine_node(gx0_ + lx, gy0_ + ly);
}

Eigen::VectorXd LocalPatch::extend(const Eigen::VectorXd& boundary_values) const {
  return extend_batch(boundary_values).col(0);
}

Eigen::MatrixXd LocalPatch::extend_batch(const Eigen::MatrixXd& boundary_values) const {
  if (boundary_values.rows() != static_cast<Eigen::Index>(boundary_.size()))
    throw DimensionMismatch("boundary data size does not match the patch");
  for (size_t k = 0; k < boundary_.size(); ++k)
    if (boundary_on_domain_[k] && boundary_values.row(k).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("Dirichlet data must vanish on the domain boundary");
  const Eigen::MatrixXd xi = fact_.solve(-(a_ib_ * boundary_values));
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(num_nodes(), boundary_values.cols());
  for (size_t k = 0; k < interior_.size(); ++k)
    full.row(interior_[k]) = xi.row(static_cast<Eigen::Index>(k));
  for (size_t k = 0; k < boundary_.size(); ++k)
    full.row(boundary_[k]) = boundary_values.row(static_cast<Eigen::Index>(k));
  return full;
}

Eigen::VectorXd LocalPatch::solve_zero_trace(const Eigen::VectorXd& interior_load) const {
  if (interior_load.size() != static_cast<Eigen::Index>(interior_.size()))
    throw DimensionMismatch("interior load size does not match the patch");
  const Eigen::VectorXd xi = fact_.solve(interior_load);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(num_nodes());
  for (size_t k = 0; k < interior_.size(); ++k) full[interior_[k]] = xi[k];
  return full;
}

Eigen::MatrixXd LocalPatch::solve_interior(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != static_cast<Eigen::Index>(interior_.size()))
    throw DimensionMismatch("interior right-hand side does not match the patch");
  return fact_.solve(rhs);
}

Eigen::VectorXd LocalPatch::interior_load(const RhsEvaluator& f) const {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(interior_.size()));
  const double h = g_->h;
  for (int lcy = 0; lcy < ny_; ++lcy)
    for (int lcx = 0; lcx < nx_; ++lcx) {
      double cell[4] = {0, 0, 0, 0};
      accumulate_cell_load(f, h, (gx0_ + lcx) * h, (gy0_ + lcy) * h, cell);
      const std::array<int, 4> corner = {
          local_node(lcx, lcy), local_node(lcx + 1, lcy), local_node(lcx + 1, lcy + 1),
          local_node(lcx, lcy + 1)};
      for (int k = 0; k < 4; ++k) {
        const int idx = interior_index_[corner[k]];
        if (idx >= 0) load[idx] += cell[k];
      }
    }
  return load;
}

double LocalPatch::patch_energy(const Eigen::VectorXd& patch_values) const {
  return patch_energy_inner(patch_values, patch_values);
}

double LocalPatch::patch_energy_inner(const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& v) const {
  if (u.size() != num_nodes() || v.size() != num_nodes())
    throw DimensionMismatch("patch vector size does not match the patch");
  Eigen::VectorXd ui(interior_.size()), ub(boundary_.size());
  Eigen::VectorXd vi(interior_.size()), vb(boundary_.size());
  for (size_t k = 0; k < interior_.size(); ++k) {
    ui[k] = u[interior_[k]];
    vi[k] = v[interior_[k]];
  }
  for (size_t k = 0; k < boundary_.size(); ++k) {
    ub[k] = u[boundary_[k]];
    vb[k] = v[boundary_[k]];
  }
  return ui.dot(a_ii_ * vi) + ui.dot(a_ib_ * vb) + vi.dot(a_ib_ * ub) +
         ub.dot(a_bb_ * vb);
}

Eigen::VectorXd LocalPatch::gather_global(const Eigen::VectorXd& global_values) const {
  Eigen::VectorXd out(num_nodes());
  for (int local = 0; local < num_nodes(); ++local)
    out[local] = global_values[global_node(local)];
  return out;
}

Eigen::VectorXd LocalPatch::boundary_values_from(
    const Eigen::VectorXd& global_values) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(boundary_.size()));
  for (size_t k = 0; k < boundary_.size(); ++k)
    out[k] = global_values[global_node(boundary_[k])];
  return out;
}

void LocalPatch::scatter_to_global(const Eigen::VectorXd& patch_values,
                                   Eigen::VectorXd& global_values) const {
  if (patch_values.size() != num_nodes())
    throw DimensionMismatch("patch vector size does not match the patch");
  for (int local = 0; local < num_nodes(); ++local)
    global_values[global_node(local)] = patch_values[local];
}

LocalPatch assemble_patch(const GridHierarchy& g, const CoefficientField& field,
                          const PatchFootprint& fp) {
  return LocalPatch(g, field, fp);
}

FineFunction harmonic_extension(const GridHierarchy& g, const LocalPatch& patch,
                                const Eigen::VectorXd& boundary_values) {
  FineFunction u = zero_fine_function(g);
  patch.scatter_to_global(patch.extend(boundary_values), u.values);
  u.support = patch.footprint();
  return u;
}

FineFunction bubble_solve(const GridHierarchy& g, const CoefficientField& field,
                          const LocalPatch& patch, const RhsEvaluator& f) {
  (void)field;  // the patch already carries the assembled operator
  FineFunction u = zero_fine_function(g);
  patch.scatter_to_global(patch.solve_zero_trace(patch.interior_load(f)), u.values);
  u.support = patch.footprint();
  return u;
}

double energy_inner(const GridHierarchy& g, const CoefficientField& field,
                    const FineFunction& u, const FineFunction& v) {
  check_same_grid(g, u);
  check_same_grid(g, v);
  if (field.nf != g.nf) throw DimensionMismatch("coefficient does not match the grid");
  const Eigen::Matrix4d& k = reference_stiffness();
  double acc = 0.0;
  Eigen::Vector4d uc, vc;
  for (int cy = 0; cy < g.nf; ++cy)
    for (int cx = 0; cx < g.nf; ++cx) {
      const auto corner = cell_corner_nodes(g, cx, cy);
      for (int i = 0; i < 4; ++i) {
        uc[i] = u.values[corner[i]];
        vc[i] = v.values[corner[i]];
      }
      acc += field.at_cell(cx, cy) * uc.dot(k * vc);
    }
  return acc;
}

double energy_norm(const GridHierarchy& g, const CoefficientField& field,
                   const FineFunction& u) {
  return std::sqrt(std::max(0.0, energy_inner(g, field, u, u)));
}

double l2_inner(const GridHierarchy& g, const FineFunction& u, const FineFunction& v) {
  check_same_grid(g, u);
  check_same_grid(g, v);
  const Eigen::Matrix4d m = cell_mass(g.h);
  double acc = 0.0;
  Eigen::Vector4d uc, vc;
  for (int cy = 0; cy < g.nf; ++cy)
    for (int cx = 0; cx < g.nf; ++cx) {
      const auto corner = cell_corner_nodes(g, cx, cy);
      for (int i = 0; i < 4; ++i) {
        uc[i] = u.values[corner[i]];
        vc[i] = v.values[corner[i]];
      }
      acc += uc.dot(m * vc);
    }
  return acc;
}

double l2_norm(const GridHierarchy& g, const FineFunction& u) {
  return std::sqrt(std::max(0.0, l2_inner(g, u, u)));
}

SparseMat assemble_interior_stiffness(const GridHierarchy& g,
                                      const CoefficientField& field) {
  if (field.nf != g.nf) throw DimensionMismatch("coefficient does not match the grid");
  const int n1 = g.nf - 1;
  const int n = n1 * n1;
  const Eigen::Matrix4d& k = reference_stiffness();
  // Local corner index of node (ix,iy) within cell (cx,cy): depends on the
  // offset (ix-cx, iy-cy) in {0,1}^2.
  const auto corner_of = [](int ox, int oy) { return oy == 0 ? ox : 3 - ox; };

  SparseMat a(n, n);
  a.reserve(Eigen::VectorXi::Constant(n, 9));
  for (int iy = 1; iy < g.nf; ++iy)
    for (int ix = 1; ix < g.nf; ++ix) {
      const int col = (iy - 1) * n1 + (ix - 1);
      double stencil[3][3] = {};
      for (int oy = 0; oy <= 1; ++oy)
        for (int ox = 0; ox <= 1; ++ox) {
          const int cx = ix - ox, cy = iy - oy;
          if (cx < 0 || cy < 0 || cx >= g.nf || cy >= g.nf) continue;
          const double ac = field.at_cell(cx, cy);
          const int me = corner_of(ox, oy);
          for (int pc = 0; pc < 4; ++pc) {
            // corner pc sits at offset (px,py) from the cell origin
            const int px = (pc == 1 || pc == 2) ? 1 : 0;
            const int py = (pc == 2 || pc == 3) ? 1 : 0;
            const int dx = (cx + px) - ix, dy = (cy + py) - iy;
            stencil[dy + 1][dx + 1] += ac * k(me, pc);
          }
        }
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = ix + dx, jy = iy + dy;
          if (jx < 1 || jx > n1 || jy < 1 || jy > n1) continue;
          a.insert((jy - 1) * n1 + (jx - 1), col) = stencil[dy + 1][dx + 1];
        }
    }
  a.makeCompressed();
  return a;
}

Eigen::VectorXd assemble_global_load(const GridHierarchy& g, const RhsEvaluator& f) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero((g.nf + 1) * (g.nf + 1));
  const double h = g.h;
  for (int cy = 0; cy < g.nf; ++cy)
    for (int cx = 0; cx < g.nf; ++cx) {
      double cell[4] = {0, 0, 0, 0};
      accumulate_cell_load(f, h, cx * h, cy * h, cell);
      const auto corner = cell_corner_nodes(g, cx, cy);
      for (int k = 0; k < 4; ++k) load[corner[k]] += cell[k];
    }
  for (int ix = 0; ix <= g.nf; ++ix) {
    load[g.fine_node(ix, 0)] = 0.0;
    load[g.fine_node(ix, g.nf)] = 0.0;
    load[g.fine_node(0, ix)] = 0.0;
    load[g.fine_node(g.nf, ix)] = 0.0;
  }
  return load;
}

FineFunction reference_solve(const GridHierarchy& g, const CoefficientField& field,
                             const RhsEvaluator& f) {
  const SparseMat a = assemble_interior_stiffness(g, field);
  Eigen::SimplicialLDLT<SparseMat> fact(a);
  if (fact.info() != Eigen::Success || fact.vectorD().minCoeff() <= 0.0)
    throw FactorizationFailure("fine-grid stiffness is not positive definite");
  const Eigen::VectorXd full_load = assemble_global_load(g, f);
  const int n1 = g.nf - 1;
  Eigen::VectorXd rhs(n1 * n1);
  for (int iy = 1; iy < g.nf; ++iy)
    for (int ix = 1; ix < g.nf; ++ix)
      rhs[(iy - 1) * n1 + (ix - 1)] = full_load[g.fine_node(ix, iy)];
  const Eigen::VectorXd x = fact.solve(rhs);
  FineFunction u = zero_fine_function(g);
  for (int iy = 1; iy < g.nf; ++iy)
    for (int ix = 1; ix < g.nf; ++ix)
      u.values[g.fine_node(ix, iy)] = x[(iy - 1) * n1 + (ix - 1)];
  return u;
}

std::vector<int> element_node_ids(const GridHierarchy& g, int element) {
  const auto [ox, oy] = g.element_cell_origin(element);
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(g.nb + 1) * (g.nb + 1));
  for (int ly = 0; ly <= g.nb; ++ly)
    for (int lx = 0; lx <= g.nb; ++lx) ids.push_back(g.fine_node(ox + lx, oy + ly));
  return ids;
}

Eigen::VectorXd element_load(const GridHierarchy& g, const RhsEvaluator& f,
                             int element) {
  const auto [ox, oy] = g.element_cell_origin(element);
  const int side = g.nb + 1;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(side * side);
  const double h = g.h;
  for (int lcy = 0; lcy < g.nb; ++lcy)
    for (int lcx = 0; lcx < g.nb; ++lcx) {
      double cell[4] = {0, 0, 0, 0};
      accumulate_cell_load(f, h, (ox + lcx) * h, (oy + lcy) * h, cell);
      const std::array<int, 4> corner = {lcy * side + lcx, lcy * side + lcx + 1,
                                         (lcy + 1) * side + lcx + 1,
                                         (lcy + 1) * side + lcx};
      for (int k = 0; k < 4; ++k) load[corner[k]] += cell[k];
    }
  return load;
}

Eigen::VectorXd element_stiffness_apply(const GridHierarchy& g,
                                        const CoefficientField& field, int element,
                                        const Eigen::VectorXd& local_values) {
  const auto [ox, oy] = g.element_cell_origin(element);
  const int side = g.nb + 1;
  if (local_values.size() != side * side)
    throw DimensionMismatch("element vector size does not match the grid");
  const Eigen::Matrix4d& k = reference_stiffness();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(side * side);
  Eigen::Vector4d xc;
  for (int lcy = 0; lcy < g.nb; ++lcy)
    for (int lcx = 0; lcx < g.nb; ++lcx) {
      const double a = field.at_cell(ox + lcx, oy + lcy);
      const std::array<int, 4> corner = {lcy * side + lcx, lcy * side + lcx + 1,
                                         (lcy + 1) * side + lcx + 1,
                                         (lcy + 1) * side + lcx};
      for (int i = 0; i < 4; ++i) xc[i] = local_values[corner[i]];
      const Eigen::Vector4d yc = a * (k * xc);
      for (int i = 0; i < 4; ++i) out[corner[i]] += yc[i];
    }
  return out;
}

}  // namespace msbasis
