#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "msbasis/coefficient.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/errors.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/galerkin.hpp"
#include "msbasis/mesh.hpp"

using namespace msbasis;

namespace {

const RhsEvaluator kMinusOne = [](double, double) { return -1.0; };

int column_of(const ElementBlock& block, int dof) {
  const auto it = std::find(block.dofs.begin(), block.dofs.end(), dof);
  return it == block.dofs.end() ? -1 : static_cast<int>(it - block.dofs.begin());
}

/// Global values of one basis function, assembled from its element blocks.
Eigen::VectorXd global_basis_values(const GridHierarchy& g, const GalerkinSpace& space,
                                    int dof) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.num_fine_nodes());
  for (int element = 0; element < g.num_elements(); ++element) {
    const int col = column_of(space.elements[element], dof);
    if (col < 0) continue;
    const std::vector<int> nodes = element_node_ids(g, element);
    for (size_t i = 0; i < nodes.size(); ++i)
      out[nodes[i]] = space.elements[element].values(i, col);
  }
  return out;
}

}  // namespace

TEST_CASE("basis counting matches the known-good lattice formulas") {
  {
    const GridHierarchy g = build_hierarchy(32, 128);
    const CoefficientField a = build_multiscale_trig(g);
    EdgeBasisSet basis = build_edge_basis(g, a, 2);
    set_uniform_truncation(basis, 2);
    const GalerkinSpace space = build_space(g, a, basis, false);
    CHECK(space.num_dofs() == 4929);
    CHECK(space.num_tents == 961);
    CHECK(space.num_enrichments == 2 * 1984);
  }
  {
    const GridHierarchy g = build_hierarchy(2, 8);
    const CoefficientField a = build_unit_field(g);
    EdgeBasisSet basis = build_edge_basis(g, a, 1);
    set_uniform_truncation(basis, 0);
    const GalerkinSpace space = build_space(g, a, basis, false);
    REQUIRE(space.num_dofs() == 1);
    CHECK(space.classification[0].kind == BasisKind::tent);
  }
}

TEST_CASE("unit-coefficient tents coincide with the bilinear hat") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField one = build_unit_field(g);
  EdgeBasisSet basis = build_edge_basis(g, one, 1);
  set_uniform_truncation(basis, 0);
  const GalerkinSpace space = build_space(g, one, basis, false);

  const int node = g.interior_node_id(2, 2);
  const Eigen::VectorXd tent = global_basis_values(g, space, node);
  for (int iy = 0; iy <= g.nf; ++iy)
    for (int ix = 0; ix <= g.nf; ++ix) {
      const double dx = std::abs(ix * g.h - 0.5) / g.H;
      const double dy = std::abs(iy * g.h - 0.5) / g.H;
      const double hat =
          dx >= 1.0 || dy >= 1.0 ? 0.0 : (1.0 - dx) * (1.0 - dy);
      CHECK(tent[g.fine_node(ix, iy)] == doctest::Approx(hat).epsilon(1e-10));
    }
}

TEST_CASE("space functions are continuous, zero on the boundary and a-harmonic") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  EdgeBasisSet basis = build_edge_basis(g, a, 2, &kMinusOne);
  const GalerkinSpace space = build_space(g, a, basis, true);

  // traces agree across the shared edge of each adjacent element pair
  for (const CoarseEdge& e : g.edges) {
    const auto elems = g.elements_of_edge(e.id);
    const auto shared = g.edge_fine_nodes(e.id);
    const ElementBlock& left = space.elements[elems[0]];
    const ElementBlock& right = space.elements[elems[1]];
    const std::vector<int> ln = element_node_ids(g, elems[0]);
    const std::vector<int> rn = element_node_ids(g, elems[1]);
    for (int dof : left.dofs) {
      const int cl = column_of(left, dof);
      const int cr = column_of(right, dof);
      if (cr < 0) continue;
      for (int gn : shared) {
        const int il = static_cast<int>(std::find(ln.begin(), ln.end(), gn) - ln.begin());
        const int ir = static_cast<int>(std::find(rn.begin(), rn.end(), gn) - rn.begin());
        CHECK(std::abs(left.values(il, cl) - right.values(ir, cr)) < 1e-12);
      }
    }
  }

  for (int element = 0; element < g.num_elements(); ++element) {
    const ElementBlock& block = space.elements[element];
    const std::vector<int> nodes = element_node_ids(g, element);
    for (size_t j = 0; j < block.dofs.size(); ++j) {
      // exact zeros on the domain boundary
      for (size_t i = 0; i < nodes.size(); ++i)
        if (g.classify_fine_node(nodes[i]) == FineNodeClass::domain_boundary)
          CHECK(block.values(i, j) == 0.0);
      // stiffness residual vanishes at element-interior nodes
      const Eigen::VectorXd r =
          element_stiffness_apply(g, a, element, block.values.col(j));
      for (int ly = 1; ly < g.nb; ++ly)
        for (int lx = 1; lx < g.nb; ++lx)
          CHECK(std::abs(r[ly * (g.nb + 1) + lx]) < 1e-9);
    }
  }
}

TEST_CASE("zero right-hand side produces zero solutions for every variant") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  const RhsEvaluator zero = [](double, double) { return 0.0; };
  EdgeBasisSet basis = build_edge_basis(g, a, 2, &zero);
  const GalerkinSpace space = build_space(g, a, basis, true);
  const FineFunction u_ref = reference_solve(g, a, zero);
  for (int k = 1; k <= 3; ++k) {
    SolutionReport report = solve_variant(g, a, space, zero, k);
    CHECK(report.solution.values.cwiseAbs().maxCoeff() < 1e-13);
    attach_errors(report, g, a, u_ref);
    CHECK(report.e_energy == 0.0);
    CHECK(report.e_l2 == 0.0);
  }
}

TEST_CASE("solves are Galerkin-orthogonal and sensitive to perturbations") {
  const GridHierarchy g = build_hierarchy(4, 32);
  const CoefficientField a = build_multiscale_trig(g);
  EdgeBasisSet basis = build_edge_basis(g, a, 2, &kMinusOne);
  const GalerkinSpace space = build_space(g, a, basis, true);
  const FineFunction u_ref = reference_solve(g, a, kMinusOne);

  for (int k = 1; k <= 3; ++k) {
    SolutionReport report = solve_variant(g, a, space, kMinusOne, k);
    CHECK(report.pruned_dofs.empty());
    attach_errors(report, g, a, u_ref);
    CHECK(report.e_energy >= 0.0);
    CHECK(report.e_l2 >= 0.0);
    CHECK(residual_orthogonality_check(g, a, space, report, kMinusOne) <= 1e-8);

    SolutionReport bumped = report;
    bumped.solution.values += 1e-3 * global_basis_values(g, space, 0);
    CHECK(residual_orthogonality_check(g, a, space, bumped, kMinusOne) > 1e-6);
  }
}

TEST_CASE("errors decrease with depth and follow the variant ordering") {
  const GridHierarchy g = build_hierarchy(4, 32);
  const CoefficientField a = build_multiscale_trig(g);
  EdgeBasisSet basis = build_edge_basis(g, a, 3, &kMinusOne);
  const FineFunction u_ref = reference_solve(g, a, kMinusOne);
  const FineFunction bubble = elementwise_bubble(g, a, kMinusOne);

  double prev_e1 = -1.0;
  for (int m = 1; m <= 3; ++m) {
    set_uniform_truncation(basis, m);
    const GalerkinSpace space = build_space(g, a, basis, true);
    SolutionReport r1 = solve_variant(g, a, space, kMinusOne, 1, &bubble);
    SolutionReport r2 = solve_variant(g, a, space, kMinusOne, 2, &bubble);
    SolutionReport r3 = solve_variant(g, a, space, kMinusOne, 3, &bubble);
    attach_errors(r1, g, a, u_ref);
    attach_errors(r2, g, a, u_ref);
    attach_errors(r3, g, a, u_ref);

    CHECK(r2.e_energy <= r1.e_energy + 1e-14);
    CHECK(r3.e_energy <= r2.e_energy * (1.0 + 1e-10) + 1e-14);

    // energy splitting: bubble energy accounts exactly for the k=1/k=2 gap
    const double gap = r1.e_energy * r1.e_energy - r2.e_energy * r2.e_energy;
    const double bubble_share = std::pow(energy_norm(g, a, bubble), 2) /
                                std::pow(r1.ref_energy_norm, 2);
    CHECK(gap == doctest::Approx(bubble_share).epsilon(1e-8));

    if (prev_e1 >= 0.0) CHECK(r1.e_energy <= prev_e1 * (1.0 + 1e-12));
    prev_e1 = r1.e_energy;

    REQUIRE(r1.epsilon_e.size() == g.edges.size());
    for (double eps : r1.epsilon_e) CHECK(eps >= 0.0);
  }
}

TEST_CASE("duplicated columns are pruned and reported") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  EdgeBasisSet clean = build_edge_basis(g, a, 2);
  EdgeBasisSet tampered = clean;
  EdgeRecord& rec = tampered.edges[g.edge_at(EdgeOrientation::horizontal, 2, 2)];
  rec.functions[1] = rec.functions[0];
  rec.lambda[1] = rec.lambda[0];

  const GalerkinSpace space = build_space(g, a, tampered, false);
  SolutionReport report = solve_variant(g, a, space, kMinusOne, 1);
  REQUIRE(report.pruned_dofs.size() == 1);
  const BasisClassification& cls = space.classification[report.pruned_dofs[0]];
  CHECK(cls.kind == BasisKind::svd_enrichment);
  CHECK(cls.edge == g.edge_at(EdgeOrientation::horizontal, 2, 2));

  const FineFunction u_ref = reference_solve(g, a, kMinusOne);
  attach_errors(report, g, a, u_ref);
  CHECK(residual_orthogonality_check(g, a, space, report, kMinusOne) <= 1e-8);

  // pruning the duplicate reproduces the solve with the duplicate absent
  EdgeBasisSet reduced = clean;
  reduced.edges[rec.functions[0].edge].m_e = 1;
  SolutionReport base = solve_variant(g, a, build_space(g, a, reduced, false),
                                      kMinusOne, 1);
  attach_errors(base, g, a, u_ref);
  CHECK(report.e_energy == doctest::Approx(base.e_energy).epsilon(1e-9));
}

TEST_CASE("elementwise bubble is local and energy-orthogonal to the space") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  const FineFunction bubble = elementwise_bubble(g, a, kMinusOne);

  for (int id = 0; id < g.num_fine_nodes(); ++id) {
    const FineNodeClass cls = g.classify_fine_node(id);
    if (cls != FineNodeClass::element_interior) CHECK(bubble.values[id] == 0.0);
  }

  const LocalPatch patch(g, a, element_footprint(g, 5));
  const FineFunction direct = bubble_solve(g, a, patch, kMinusOne);
  for (int li : patch.interior()) {
    const int gn = patch.global_node(li);
    CHECK(bubble.values[gn] == doctest::Approx(direct.values[gn]).epsilon(1e-14));
  }

  EdgeBasisSet basis = build_edge_basis(g, a, 2);
  const GalerkinSpace space = build_space(g, a, basis, false);
  FineFunction tent;
  tent.nf = g.nf;
  tent.values = global_basis_values(g, space, 0);
  CHECK(std::abs(energy_inner(g, a, bubble, tent)) < 1e-10);
}

TEST_CASE("error report handles degenerate references") {
  const GridHierarchy g = build_hierarchy(2, 8);
  const CoefficientField a = build_unit_field(g);
  const FineFunction u_ref = reference_solve(g, a, kMinusOne);

  const ErrorPair same = error_report(g, a, u_ref, u_ref);
  CHECK(same.e_energy == 0.0);
  CHECK(same.e_l2 == 0.0);

  const FineFunction zero = zero_fine_function(g);
  const ErrorPair from_zero = error_report(g, a, zero, u_ref);
  CHECK(from_zero.e_energy == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(from_zero.e_l2 == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS((void)error_report(g, a, u_ref, zero), ZeroReference);
  const ErrorPair both_zero = error_report(g, a, zero, zero);
  CHECK(both_zero.e_energy == 0.0);
}

TEST_CASE("misuse is rejected with the dedicated exceptions") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  EdgeBasisSet basis = build_edge_basis(g, a, 1);

  const CoefficientField other = build_unit_field(g);
  CHECK_THROWS_AS((void)build_space(g, other, basis, false), ProvenanceMismatch);
  CHECK_THROWS_AS((void)build_space(g, a, basis, true), ProvenanceMismatch);

  const GalerkinSpace space = build_space(g, a, basis, false);
  CHECK_THROWS_AS((void)solve_variant(g, a, space, kMinusOne, 0), ConfigError);
  CHECK_THROWS_AS((void)solve_variant(g, a, space, kMinusOne, 4), ConfigError);
  CHECK_THROWS_AS((void)solve_variant(g, a, space, kMinusOne, 3), ConfigError);

  CHECK_THROWS_AS(set_uniform_truncation(basis, 5), ConfigError);
  CHECK_THROWS_AS(set_uniform_truncation(basis, -1), ConfigError);
}

TEST_CASE("repeated solves are bitwise identical") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_random_field(g, 11);
  EdgeBasisSet basis = build_edge_basis(g, a, 2, &kMinusOne);
  const GalerkinSpace space = build_space(g, a, basis, true);
  const SolutionReport r1 = solve_variant(g, a, space, kMinusOne, 3);
  const SolutionReport r2 = solve_variant(g, a, space, kMinusOne, 3);
  CHECK((r1.solution.values - r2.solution.values).cwiseAbs().maxCoeff() == 0.0);
}
