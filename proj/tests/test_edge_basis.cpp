#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "msbasis/coefficient.hpp"
#include "msbasis/dense_reference.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/errors.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/mesh.hpp"

using namespace msbasis;

namespace {

int edge_id(const GridHierarchy& g, EdgeOrientation o, int ix, int iy) {
  const int id = g.edge_at(o, ix, iy);
  REQUIRE(id >= 0);
  return id;
}

EdgeFunction random_enrichment(const GridHierarchy& g, int edge, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  EdgeFunction psi;
  psi.edge = edge;
  psi.values = Eigen::VectorXd::Zero(g.nb + 1);
  for (int j = 1; j < g.nb; ++j) psi.values[j] = dist(rng);
  return psi;
}

/// Zero-extension of edge data a-harmonically extended into the two
/// adjacent elements, as a global fine function.
FineFunction two_sided_extension(const GridHierarchy& g, const CoefficientField& field,
                                 const CoarseEdge& e, const Eigen::VectorXd& values) {
  FineFunction out = zero_fine_function(g);
  const auto nodes = g.edge_fine_nodes(e.id);
  for (int element : g.elements_of_edge(e.id)) {
    const LocalPatch patch(g, field, element_footprint(g, element));
    Eigen::VectorXd data = Eigen::VectorXd::Zero(patch.boundary().size());
    for (int j = 0; j <= g.nb; ++j) {
      const int local = patch.local_from_fine(nodes[j] % (g.nf + 1), nodes[j] / (g.nf + 1));
      const int b = patch.boundary_index(local);
      REQUIRE(b >= 0);
      data[b] = values[j];
    }
    patch.scatter_to_global(patch.extend(data), out.values);
  }
  return out;
}

}  // namespace

TEST_CASE("h00 norm quadrature reproduces the known-good hat value") {
  const GridHierarchy g = build_hierarchy(2, 8);  // nb = 4, edge length 1/2
  EdgeFunction hat;
  hat.edge = 0;
  hat.values = Eigen::VectorXd::Zero(5);
  hat.values[2] = 1.0;
  // terms: L2 = h = 0.125, pair sum = 4.5, endpoint distance = 0.5
  CHECK(h00_half_norm_sq(g, hat) == doctest::Approx(5.125).epsilon(1e-13));
  CHECK(h00_half_norm(g, hat) == doctest::Approx(std::sqrt(5.125)).epsilon(1e-13));

  EdgeFunction zero;
  zero.edge = 0;
  zero.values = Eigen::VectorXd::Zero(5);
  CHECK(h00_half_norm_sq(g, zero) == 0.0);

  // independent direct summation on random data
  const EdgeFunction psi = random_enrichment(g, 0, 17);
  double expect = 0.0;
  for (int i = 1; i < 4; ++i) expect += g.h * psi.values[i] * psi.values[i];
  for (int i = 0; i <= 4; ++i)
    for (int j = i + 1; j <= 4; ++j) {
      const double wi = (i == 0 || i == 4) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == 4) ? 0.5 : 1.0;
      const double d = psi.values[i] - psi.values[j];
      expect += 2.0 * wi * wj * d * d / ((i - j) * (i - j));
    }
  for (int i = 1; i < 4; ++i)
    expect += psi.values[i] * psi.values[i] / std::min(i, 4 - i);
  CHECK(h00_half_norm_sq(g, psi) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("tent traces interpolate the coarse lattice") {
  const GridHierarchy g = build_hierarchy(4, 8);
  const auto tents = tent_functions(g);
  REQUIRE(tents.size() == 9);

  for (const TentFunction& tent : tents) {
    REQUIRE(tent.edges.size() == 4);
    for (size_t k = 0; k < tent.edges.size(); ++k) {
      const CoarseEdge& e = g.edges[tent.edges[k]];
      const bool low = e.endpoint_nodes[0] == tent.node;
      const bool high = e.endpoint_nodes[1] == tent.node;
      REQUIRE((low || high));
      CHECK(tent.traces[k][low ? 0 : g.nb] == 1.0);
      CHECK(tent.traces[k][low ? g.nb : 0] == 0.0);
      CHECK(tent.traces[k][g.nb / 2] == doctest::Approx(0.5).epsilon(1e-15));
    }
  }

  // partition of unity on edges with two interior endpoints
  for (const CoarseEdge& e : g.edges) {
    if (e.endpoint_nodes[0] < 0 || e.endpoint_nodes[1] < 0) continue;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(g.nb + 1);
    for (const TentFunction& tent : tents)
      for (size_t k = 0; k < tent.edges.size(); ++k)
        if (tent.edges[k] == e.id) sum += tent.traces[k];
    CHECK((sum - Eigen::VectorXd::Ones(g.nb + 1)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("tent interpolation is a projection onto edgewise linear traces") {
  const GridHierarchy g = build_hierarchy(4, 8);
  const auto tents = tent_functions(g);

  Eigen::VectorXd nodal = Eigen::VectorXd::Zero(g.num_interior_nodes());
  nodal[4] = 1.0;  // center node of the 3x3 interior lattice
  const auto traces = interpolate(g, nodal);
  REQUIRE(traces.size() == g.edges.size());
  const TentFunction& tent = tents[4];
  for (size_t e = 0; e < traces.size(); ++e) {
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(g.nb + 1);
    for (size_t k = 0; k < tent.edges.size(); ++k)
      if (tent.edges[k] == static_cast<int>(e)) expect = tent.traces[k];
    CHECK((traces[e] - expect).cwiseAbs().maxCoeff() < 1e-15);
  }

  const auto zero = interpolate(g, Eigen::VectorXd::Zero(g.num_interior_nodes()));
  for (const auto& t : zero) CHECK(t.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("edge energy Gram matches extensions measured in the energy norm") {
  const GridHierarchy g = build_hierarchy(3, 12);
  const CoefficientField a = build_multiscale_trig(g);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::horizontal, 1, 1)];
  const Eigen::MatrixXd gram = h_half_gram(g, a, e);
  REQUIRE(gram.rows() == g.nb - 1);

  std::vector<FineFunction> ext;
  for (int i = 1; i < g.nb; ++i) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(g.nb + 1);
    unit[i] = 1.0;
    ext.push_back(two_sided_extension(g, a, e, unit));
  }
  for (int i = 0; i < g.nb - 1; ++i)
    for (int j = 0; j < g.nb - 1; ++j)
      CHECK(gram(i, j) == doctest::Approx(energy_inner(g, a, ext[i], ext[j]))
                              .epsilon(1e-10));

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  CoefficientField doubled = a;
  for (double& v : doubled.values) v *= 2.0;
  doubled.a_min *= 2.0;
  doubled.a_max *= 2.0;
  const Eigen::MatrixXd gram2 = h_half_gram(g, doubled, e);
  CHECK((gram2 - 2.0 * gram).cwiseAbs().maxCoeff() < 1e-12 * gram.norm());

  const Eigen::MatrixXd dense = dense::edge_energy_gram(g, a, e);
  CHECK((gram - dense).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + gram.norm()));
}

TEST_CASE("restriction operator annihilates constants and discrete-linear data") {
  const GridHierarchy g = build_hierarchy(5, 20);
  const CoefficientField a = build_multiscale_trig(g);
  const CoarseEdge& inner = g.edges[edge_id(g, EdgeOrientation::horizontal, 2, 2)];
  REQUIRE_FALSE(patch_touches_domain_boundary(g, oversampling_domain(g, inner)));

  const Eigen::MatrixXd r = build_restriction_operator(g, a, inner);
  const Eigen::VectorXd rc = r * Eigen::VectorXd::Ones(r.cols());
  CHECK(rc.cwiseAbs().maxCoeff() < 1e-12);

  // linear data for the unit coefficient extends to x1, whose edge residue is 0
  const CoefficientField one = build_unit_field(g);
  const Eigen::MatrixXd r1 = build_restriction_operator(g, one, inner);
  const LocalPatch patch(g, one, oversampling_domain(g, inner));
  Eigen::VectorXd data(r1.cols());
  int c = 0;
  for (size_t k = 0; k < patch.boundary().size(); ++k) {
    if (patch.boundary_on_domain()[k]) continue;
    const int gn = patch.global_node(patch.boundary()[k]);
    data[c++] = g.fine_node_position(gn)[0];
  }
  CHECK((r1 * data).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("restriction operator matches the dense composition oracle") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  for (const int id : {edge_id(g, EdgeOrientation::horizontal, 0, 1),
                       edge_id(g, EdgeOrientation::vertical, 2, 2)}) {
    const CoarseEdge& e = g.edges[id];
    const Eigen::MatrixXd r = build_restriction_operator(g, a, e);
    const Eigen::MatrixXd rd = dense::restriction_matrix(g, a, e);
    REQUIRE(r.rows() == rd.rows());
    REQUIRE(r.cols() == rd.cols());
    CHECK((r - rd).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + rd.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("edge svd agrees with the dense pencil oracle") {
  const GridHierarchy g = build_hierarchy(4, 16);
  for (const CoefficientField& a : {build_multiscale_trig(g), build_unit_field(g)}) {
    for (const int id : {edge_id(g, EdgeOrientation::horizontal, 1, 2),
                         edge_id(g, EdgeOrientation::vertical, 1, 0)}) {
      const CoarseEdge& e = g.edges[id];
      const EdgeSvdResult svd = edge_svd(g, a, e, 3);
      const EdgeSvdResult oracle = dense::edge_svd(g, a, e, 3);

      REQUIRE(svd.lambda.size() == g.nb - 1);
      for (int k = 0; k + 1 < svd.lambda.size(); ++k)
        CHECK(svd.lambda[k] >= svd.lambda[k + 1]);
      CHECK(svd.lambda.minCoeff() >= 0.0);
      const double scale = oracle.lambda[0];
      for (int k = 0; k < svd.lambda.size(); ++k)
        CHECK(std::abs(svd.lambda[k] - oracle.lambda[k]) < 1e-8 * scale);

      // left singular vectors orthonormal in the edge energy inner product
      const Eigen::MatrixXd gram = h_half_gram(g, a, e);
      for (size_t i = 0; i < svd.functions.size(); ++i)
        for (size_t j = 0; j < svd.functions.size(); ++j) {
          const double v = svd.functions[i].values.segment(1, g.nb - 1).transpose() *
                           gram * svd.functions[j].values.segment(1, g.nb - 1);
          CHECK(std::abs(v - (i == j ? 1.0 : 0.0)) < 1e-8);
        }
      for (const EdgeFunction& fn : svd.functions) {
        CHECK(fn.values[0] == 0.0);
        CHECK(fn.values[g.nb] == 0.0);
      }
    }
  }
}

TEST_CASE("interior-edge pencil is insensitive to the constant-mode handling") {
  const GridHierarchy g = build_hierarchy(5, 20);
  const CoefficientField a = build_multiscale_trig(g);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::horizontal, 2, 2)];
  REQUIRE_FALSE(patch_touches_domain_boundary(g, oversampling_domain(g, e)));
  const EdgeSvdResult svd = edge_svd(g, a, e, 3);
  const EdgeSvdResult oracle = dense::edge_svd(g, a, e, 3);
  for (int k = 0; k < svd.lambda.size(); ++k)
    CHECK(std::abs(svd.lambda[k] - oracle.lambda[k]) < 1e-10 * oracle.lambda[0]);
}

TEST_CASE("first singular value bounds the restriction ratio") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::horizontal, 2, 2)];
  const Eigen::MatrixXd r = dense::restriction_matrix(g, a, e);
  const Eigen::MatrixXd s = dense::boundary_energy_gram(g, a, e);
  const Eigen::MatrixXd gram = dense::edge_energy_gram(g, a, e);
  const double lambda1 = edge_svd(g, a, e, 1).lambda[0];

  std::mt19937 rng(23);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(r.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
    const double image = (r * x).transpose() * gram * (r * x);
    const double domain = x.transpose() * s * x;
    CHECK(std::sqrt(image / domain) <= lambda1 * (1.0 + 1e-8));
  }
}

TEST_CASE("edge svd results are reproducible") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_random_field(g, 9);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::vertical, 2, 1)];
  const EdgeSvdResult s1 = edge_svd(g, a, e, 3);
  const EdgeSvdResult s2 = edge_svd(g, a, e, 3);
  CHECK((s1.lambda - s2.lambda).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s1.functions.size() == s2.functions.size());
  for (size_t k = 0; k < s1.functions.size(); ++k)
    CHECK((s1.functions[k].values - s2.functions[k].values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("requesting beyond the positive spectrum caps and flags") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_unit_field(g);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::horizontal, 1, 1)];
  const EdgeSvdResult svd = edge_svd(g, a, e, g.nb + 5);
  CHECK(svd.rank_capped);
  CHECK(static_cast<int>(svd.functions.size()) <= g.nb - 1);
  CHECK_THROWS_AS((void)edge_svd(g, a, e, 0), DimensionMismatch);
}

TEST_CASE("oversampling bubble matches the composition oracle") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_multiscale_trig(g);
  const CoarseEdge& e = g.edges[edge_id(g, EdgeOrientation::vertical, 2, 1)];
  const auto f = [](double, double) { return -1.0; };

  const EdgeFunction bub = oversampling_bubble_edge(g, a, e, f);
  CHECK(bub.values[0] == 0.0);
  CHECK(bub.values[g.nb] == 0.0);

  const LocalPatch patch(g, a, oversampling_domain(g, e));
  const FineFunction ub = bubble_solve(g, a, patch, f);
  const auto nodes = g.edge_fine_nodes(e.id);
  const double v0 = ub.values[nodes[0]];
  const double v1 = ub.values[nodes[g.nb]];
  for (int j = 1; j < g.nb; ++j) {
    const double t = static_cast<double>(j) / g.nb;
    const double expect = ub.values[nodes[j]] - (1.0 - t) * v0 - t * v1;
    CHECK(bub.values[j] == doctest::Approx(expect).epsilon(1e-12));
  }

  const EdgeFunction zero =
      oversampling_bubble_edge(g, a, e, [](double, double) { return 0.0; });
  CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("oversampling bubble norm scales about linearly in the coarse size") {
  // The edge norm of the bubble is of order H times the load norm over the
  // patch, and for a bounded f that load norm itself shrinks like H, so the
  // load factor sqrt(|omega_e|) is divided out before comparing across H.
  const auto f = [](double, double) { return -1.0; };
  const auto norm_at = [&](int nc) {
    const GridHierarchy g = build_hierarchy(nc, 64);
    const CoefficientField one = build_unit_field(g);
    const CoarseEdge& e =
        g.edges[edge_id(g, EdgeOrientation::horizontal, nc / 2, nc / 2)];
    const EdgeFunction bub = oversampling_bubble_edge(g, one, e, f);
    const Eigen::MatrixXd gram = h_half_gram(g, one, e);
    const Eigen::VectorXd v = bub.values.segment(1, g.nb - 1);
    const double area = oversampling_domain(g, e).num_elements() * g.H * g.H;
    return std::sqrt(v.transpose() * gram * v) / std::sqrt(area);
  };
  const double ratio = norm_at(8) / norm_at(16);
  CHECK(ratio >= 1.5);
  CHECK(ratio <= 3.0);
}

TEST_CASE("adaptive truncation selects the spectrum crossing") {
  const GridHierarchy g = build_hierarchy(8, 32);
  const CoefficientField trig = build_multiscale_trig(g);
  const EdgeBasisSet basis = build_edge_basis(g, trig, 3);

  double lambda_max = 0.0;
  for (const EdgeRecord& rec : basis.edges) lambda_max = std::max(lambda_max, rec.lambda[0]);
  const TruncationResult all_one = adaptive_truncation(basis, 2.0 * lambda_max);
  for (int m : all_one.m_e) CHECK(m == 1);

  const TruncationResult capped = adaptive_truncation(basis, 1e-300);
  for (size_t i = 0; i < capped.m_e.size(); ++i) {
    CHECK(capped.capped[i]);
    CHECK(capped.m_e[i] == static_cast<int>(basis.edges[i].lambda.size()));
  }

  // a smooth coefficient needs fewer enrichments at the same threshold
  std::vector<double> l2;
  for (const EdgeRecord& rec : basis.edges) l2.push_back(rec.lambda[1]);
  std::nth_element(l2.begin(), l2.begin() + l2.size() / 2, l2.end());
  const double tau = l2[l2.size() / 2];
  const EdgeBasisSet smooth = build_edge_basis(g, build_unit_field(g), 3);
  const TruncationResult rough_cut = adaptive_truncation(basis, tau);
  const TruncationResult smooth_cut = adaptive_truncation(smooth, tau);
  int sum_rough = 0, sum_smooth = 0;
  for (int m : rough_cut.m_e) sum_rough += m;
  for (int m : smooth_cut.m_e) sum_smooth += m;
  CHECK(sum_smooth < sum_rough);
}

TEST_CASE("the offline pass reproduces per-edge svd and carries provenance") {
  const GridHierarchy g = build_hierarchy(4, 16);
  const CoefficientField a = build_random_field(g, 4);
  const RhsEvaluator f = [](double x, double y) { return x - y; };
  const EdgeBasisSet basis = build_edge_basis(g, a, 3, &f);

  CHECK(basis.nc == 4);
  CHECK(basis.nf == 16);
  CHECK(basis.coeff_hash == a.hash());
  CHECK(basis.family == CoeffFamily::random_field);
  REQUIRE(basis.edges.size() == g.edges.size());

  for (size_t idx = 0; idx < basis.edges.size(); ++idx) {
    const EdgeRecord& rec = basis.edges[idx];
    REQUIRE(rec.os_bubble.has_value());
    const EdgeSvdResult solo = edge_svd(g, a, g.edges[idx], 3);
    CHECK((rec.lambda - solo.lambda).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(rec.functions.size() == solo.functions.size());
    for (size_t k = 0; k < rec.functions.size(); ++k)
      CHECK((rec.functions[k].values - solo.functions[k].values).cwiseAbs().maxCoeff() <
            1e-14);
    const EdgeFunction bub = oversampling_bubble_edge(g, a, g.edges[idx], f);
    CHECK((rec.os_bubble->values - bub.values).cwiseAbs().maxCoeff() < 1e-14);
  }

  const EdgeBasisSet no_f = build_edge_basis(g, a, 2);
  CHECK_FALSE(no_f.edges[0].os_bubble.has_value());
  CHECK(no_f.edges[0].m_e == 2);
}
