#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "msbasis/dense_reference.hpp"
#include "msbasis/edge_basis.hpp"
#include "msbasis/errors.hpp"
#include "msbasis/fem_core.hpp"
#include "msbasis/galerkin.hpp"
#include "msbasis/harness.hpp"
#include "msbasis/mesh.hpp"
#include "msbasis/parallel.hpp"
#include "msbasis/store.hpp"

namespace msbasis {

namespace {

void run_entry(PropertyReport& report, const char* name,
               const std::function<void(PropertyResult&)>& body) {
  PropertyResult r;
  r.name = name;
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  report.entries.push_back(r);
}

RhsEvaluator minus_one() {
  return [](double, double) { return -1.0; };
}

const char* family_label(int which) {
  switch (which) {
    case 0: return "unit";
    case 1: return "trig";
    case 2: return "random";
    default: return "contrast";
  }
}

CoefficientField family_field(const GridHierarchy& g, int which) {
  switch (which) {
    case 0: return build_unit_field(g);
    case 1: return build_multiscale_trig(g);
    case 2: return build_random_field(g, 3);
    default: return build_high_contrast(g, 1024.0);
  }
}

Eigen::VectorXd interior_values(const EdgeFunction& psi) {
  return psi.values.segment(1, psi.values.size() - 2);
}

Eigen::VectorXd global_basis_column(const GridHierarchy& g, const GalerkinSpace& space,
                                    int dof) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero((g.nf + 1) * (g.nf + 1));
  for (int el = 0; el < g.num_elements(); ++el) {
    const ElementBlock& block = space.elements[el];
    for (size_t c = 0; c < block.dofs.size(); ++c)
      if (block.dofs[c] == dof) {
        const std::vector<int> nodes = element_node_ids(g, el);
        for (size_t i = 0; i < nodes.size(); ++i)
          out[nodes[i]] = block.values(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(c));
      }
  }
  return out;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool same_values(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool same_basis(const EdgeBasisSet& x, const EdgeBasisSet& y) {
  if (x.edges.size() != y.edges.size()) return false;
  for (size_t e = 0; e < x.edges.size(); ++e) {
    const EdgeRecord& a = x.edges[e];
    const EdgeRecord& b = y.edges[e];
    if (!same_values(a.lambda, b.lambda)) return false;
    if (a.functions.size() != b.functions.size()) return false;
    for (size_t i = 0; i < a.functions.size(); ++i)
      if (!same_values(a.functions[i].values, b.functions[i].values)) return false;
    if (a.os_bubble.has_value() != b.os_bubble.has_value()) return false;
    if (a.os_bubble && !same_values(a.os_bubble->values, b.os_bubble->values))
      return false;
  }
  return true;
}

int central_h_edge(const GridHierarchy& g) {
  return g.edge_at(EdgeOrientation::horizontal, g.nc / 2 - 1, g.nc / 2);
}

}  // namespace

bool PropertyReport::all_passed() const {
  for (const PropertyResult& r : entries)
    if (!r.passed) return false;
  return true;
}

PropertyReport run_property_suite() {
  PropertyReport report;
  const RhsEvaluator f = minus_one();

  run_entry(report, "splitting_identity", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    double worst = 0.0;
    std::string worst_family = "unit";
    for (int which = 0; which < 4; ++which) {
      const CoefficientField field = family_field(g, which);
      const FineFunction u = reference_solve(g, field, f);
      const double scale = u.values.lpNorm<Eigen::Infinity>();
      for (int el = 0; el < g.num_elements(); ++el) {
        const LocalPatch patch(g, field, element_footprint(g, el));
        const FineFunction harm =
            harmonic_extension(g, patch, patch.boundary_values_from(u.values));
        const FineFunction bub = bubble_solve(g, field, patch, f);
        const Eigen::VectorXd diff = patch.gather_global(harm.values) +
                                     patch.gather_global(bub.values) -
                                     patch.gather_global(u.values);
        const double err = diff.lpNorm<Eigen::Infinity>() / scale;
        if (err > worst) {
          worst = err;
          worst_family = family_label(which);
        }
      }
    }
    r.measured = worst;
    r.passed = worst <= 1e-10;
    r.detail = "per-element reconstruction of the reference, worst family " + worst_family;
  });

  run_entry(report, "bubble_orthogonality", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    double worst = 0.0;
    for (int which = 0; which < 4; ++which) {
      const CoefficientField field = family_field(g, which);
      const FineFunction u = reference_solve(g, field, f);
      const FineFunction ub = elementwise_bubble(g, field, f);
      FineFunction uh;
      uh.nf = g.nf;
      uh.values = u.values - ub.values;
      const double ip = energy_inner(g, field, uh, ub);
      const double denom = energy_norm(g, field, uh) * energy_norm(g, field, ub);
      worst = std::max(worst, std::abs(ip) / denom);
    }
    r.measured = worst;
    r.passed = worst <= 1e-10;
    r.detail = "a(u - u_b, u_b) over all four families at nc=4, nf=16";
  });

  run_entry(report, "energy_pythagoras", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    double worst = 0.0;
    for (int which = 0; which < 4; ++which) {
      const CoefficientField field = family_field(g, which);
      const FineFunction u = reference_solve(g, field, f);
      const FineFunction ub = elementwise_bubble(g, field, f);
      FineFunction uh;
      uh.nf = g.nf;
      uh.values = u.values - ub.values;
      const double nu = energy_norm(g, field, u);
      const double nh = energy_norm(g, field, uh);
      const double nb = energy_norm(g, field, ub);
      worst = std::max(worst, std::abs(nu * nu - nh * nh - nb * nb) / (nu * nu));
    }
    r.measured = worst;
    r.passed = worst <= 1e-10;
    r.detail = "|u|^2 = |u_h|^2 + |u_b|^2 over all four families";
  });

  run_entry(report, "galerkin_residual", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField field = build_multiscale_trig(g);
    const EdgeBasisSet basis = build_edge_basis(g, field, 1, &f);
    const GalerkinSpace space = build_space(g, field, basis, true);
    const FineFunction u_ref = reference_solve(g, field, f);
    const FineFunction bubble = elementwise_bubble(g, field, f);
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k) {
      SolutionReport rep = solve_variant(g, field, space, f, k, &bubble);
      attach_errors(rep, g, field, u_ref);
      worst = std::max(worst, residual_orthogonality_check(g, field, space, rep, f));
    }
    r.measured = worst;
    r.passed = worst <= 1e-8;
    r.detail = "max defect over variants 1..3, trig coefficient, m=1";
  });

  run_entry(report, "constant_residue", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(8, 32);
    const CoefficientField field = build_multiscale_trig(g);
    const int edge = g.edge_at(EdgeOrientation::horizontal, 3, 4);
    const Eigen::MatrixXd R = build_restriction_operator(g, field, g.edges[edge]);
    const Eigen::VectorXd residue = R * Eigen::VectorXd::Ones(R.cols());
    r.measured = residue.lpNorm<Eigen::Infinity>();
    r.passed = r.measured <= 1e-12;
    r.detail = "restriction of constant data on an interior patch";
  });

  run_entry(report, "lambda_sorted", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    double worst = 0.0;
    for (int which : {1, 2}) {
      const CoefficientField field = family_field(g, which);
      const EdgeBasisSet basis = build_edge_basis(g, field, 3);
      for (const EdgeRecord& rec : basis.edges) {
        for (Eigen::Index i = 0; i + 1 < rec.lambda.size(); ++i)
          worst = std::max(worst, rec.lambda[i + 1] - rec.lambda[i]);
        if (rec.lambda.size() > 0)
          worst = std::max(worst, -rec.lambda[rec.lambda.size() - 1]);
      }
    }
    r.measured = worst;
    r.passed = worst <= 1e-14;
    r.detail = "descending order and nonnegativity over all edges, trig and random";
  });

  run_entry(report, "dense_oracle", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    double worst = 0.0;
    for (int which : {1, 2}) {
      const CoefficientField field = family_field(g, which);
      for (int edge : {g.edge_at(EdgeOrientation::horizontal, 0, 1),
                       g.edge_at(EdgeOrientation::vertical, 2, 1)}) {
        const CoarseEdge& e = g.edges[edge];
        const Eigen::MatrixXd gram = h_half_gram(g, field, e);
        const Eigen::MatrixXd gram_ref = dense::edge_energy_gram(g, field, e);
        worst = std::max(worst, (gram - gram_ref).norm() / gram_ref.norm());
        const Eigen::MatrixXd R = build_restriction_operator(g, field, e);
        const Eigen::MatrixXd R_ref = dense::restriction_matrix(g, field, e);
        worst = std::max(worst, (R - R_ref).norm() / std::max(1.0, R_ref.norm()));
        const EdgeSvdResult svd = edge_svd(g, field, e, 2);
        const EdgeSvdResult svd_ref = dense::edge_svd(g, field, e, 2);
        const Eigen::Index n = std::min(svd.lambda.size(), svd_ref.lambda.size());
        for (Eigen::Index i = 0; i < n; ++i)
          worst = std::max(worst, std::abs(svd.lambda[i] - svd_ref.lambda[i]) /
                                      svd_ref.lambda[0]);
      }
    }
    r.measured = worst;
    r.passed = worst <= 1e-8;
    r.detail = "gram, restriction and spectrum against dense references at nc=4, nf=16";
  });

  run_entry(report, "h00_norm_equivalence", [&](PropertyResult& r) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int nc : {8, 16, 32}) {
      const GridHierarchy g = build_hierarchy(nc, 4 * nc);
      const CoefficientField field = build_unit_field(g);
      const CoarseEdge& e = g.edges[central_h_edge(g)];
      const EdgeSvdResult svd = edge_svd(g, field, e, 1);
      const EdgeFunction& psi = svd.functions.at(0);
      const Eigen::VectorXd inner = interior_values(psi);
      const Eigen::MatrixXd gram = h_half_gram(g, field, e);
      const double half = std::sqrt(inner.dot(gram * inner));
      const double ratio = half / h00_half_norm(g, psi);
      if (first) {
        lo = hi = ratio;
        first = false;
      } else {
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    r.measured = hi / lo;
    r.passed = r.measured < 10.0;
    r.detail = "edge-energy norm over quadrature norm across H = 1/8, 1/16, 1/32";
  });

  run_entry(report, "bubble_h_scaling", [&](PropertyResult& r) {
    const GridHierarchy g8 = build_hierarchy(8, 64);
    const GridHierarchy g16 = build_hierarchy(16, 64);
    const CoefficientField f8 = build_unit_field(g8);
    const CoefficientField f16 = build_unit_field(g16);
    const double n8 = energy_norm(g8, f8, elementwise_bubble(g8, f8, f));
    const double n16 = energy_norm(g16, f16, elementwise_bubble(g16, f16, f));
    r.measured = n8 / n16;
    r.passed = r.measured >= 1.5 && r.measured <= 3.0;
    r.detail = "energy of the bubble part when H halves, a = 1, f = -1";
  });

  run_entry(report, "os_bubble_h_scaling", [&](PropertyResult& r) {
    // The bubble trace is of order H times the load norm over the patch;
    // dividing out sqrt(|omega_e|) leaves the linear factor to measure.
    double norms[2];
    int slot = 0;
    for (int nc : {8, 16}) {
      const GridHierarchy g = build_hierarchy(nc, 64);
      const CoefficientField field = build_unit_field(g);
      const CoarseEdge& e = g.edges[central_h_edge(g)];
      const EdgeFunction psi = oversampling_bubble_edge(g, field, e, f);
      const Eigen::VectorXd inner = interior_values(psi);
      const Eigen::MatrixXd gram = h_half_gram(g, field, e);
      const double area = oversampling_domain(g, e).num_elements() * g.H * g.H;
      norms[slot++] = std::sqrt(inner.dot(gram * inner) / area);
    }
    r.measured = norms[0] / norms[1];
    r.passed = r.measured >= 1.5 && r.measured <= 3.0;
    r.detail =
        "edge norm of the oversampling bubble over the patch load norm when H "
        "halves, a = 1, f = -1";
  });

  run_entry(report, "store_roundtrip", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField field = build_multiscale_trig(g);
    const EdgeBasisSet basis = build_edge_basis(g, field, 2);
    const std::filesystem::path root =
        std::filesystem::temp_directory_path() / "msbasis_prop_store";
    std::filesystem::remove_all(root);
    const std::string dir_a = (root / "a").string();
    const std::string dir_b = (root / "b").string();
    save_edge_basis(basis, dir_a);
    const EdgeBasisSet loaded = load_edge_basis(dir_a, g, field);
    save_edge_basis(loaded, dir_b);
    const bool bytes_equal =
        read_bytes(dir_a + "/manifest.json") == read_bytes(dir_b + "/manifest.json") &&
        read_bytes(dir_a + "/payload.bin") == read_bytes(dir_b + "/payload.bin");
    const bool content_equal = same_basis(basis, loaded);
    std::filesystem::remove_all(root);
    r.measured = (bytes_equal && content_equal) ? 0.0 : 1.0;
    r.passed = bytes_equal && content_equal;
    r.detail = "save, load, save again: bytes and values identical";
  });

  run_entry(report, "worker_determinism", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField field = build_multiscale_trig(g);
    set_worker_cap(1);
    const EdgeBasisSet one = build_edge_basis(g, field, 2, &f);
    set_worker_cap(2);
    const EdgeBasisSet two = build_edge_basis(g, field, 2, &f);
    set_worker_cap(0);
    const bool equal = same_basis(one, two);
    r.measured = equal ? 0.0 : 1.0;
    r.passed = equal;
    r.detail = "offline pass bitwise identical with 1 and 2 workers";
  });

  run_entry(report, "detector_sensitivity", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField field = build_multiscale_trig(g);
    const EdgeBasisSet basis = build_edge_basis(g, field, 1);
    const GalerkinSpace space = build_space(g, field, basis, false);
    const FineFunction u_ref = reference_solve(g, field, f);
    SolutionReport rep = solve_variant(g, field, space, f, 1);
    attach_errors(rep, g, field, u_ref);
    SolutionReport bumped = rep;
    bumped.solution.values += 1e-3 * global_basis_column(g, space, 0);
    r.measured = residual_orthogonality_check(g, field, space, bumped, f);
    r.passed = r.measured > 1e-6;
    r.detail = "perturbed solution must trip the residual check";
  });

  run_entry(report, "tent_partition_of_unity", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const std::vector<TentFunction> tents = tent_functions(g);
    double worst = 0.0;
    for (const CoarseEdge& e : g.edges) {
      if (e.boundary_connected) continue;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(g.nb + 1);
      for (const TentFunction& tent : tents)
        for (size_t s = 0; s < tent.edges.size(); ++s)
          if (tent.edges[s] == e.id) sum += tent.traces[s];
      worst = std::max(worst, (sum.array() - 1.0).abs().maxCoeff());
    }
    r.measured = worst;
    r.passed = worst <= 1e-12;
    r.detail = "tent traces sum to one on fully interior edges";
  });

  run_entry(report, "truncation_bounds", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField field = build_multiscale_trig(g);
    const EdgeBasisSet basis = build_edge_basis(g, field, 3);
    double lambda_max = 0.0;
    for (const EdgeRecord& rec : basis.edges)
      if (rec.lambda.size() > 0) lambda_max = std::max(lambda_max, rec.lambda[0]);
    const TruncationResult wide = adaptive_truncation(basis, 2.0 * lambda_max);
    const TruncationResult tight = adaptive_truncation(basis, 1e-300);
    int violations = 0;
    for (size_t e = 0; e < basis.edges.size(); ++e) {
      if (wide.m_e[e] != 1 || wide.capped[e]) ++violations;
      if (tight.m_e[e] != static_cast<int>(basis.edges[e].lambda.size()) ||
          !tight.capped[e])
        ++violations;
    }
    r.measured = violations;
    r.passed = violations == 0;
    r.detail = "threshold above lambda_1 keeps one function; unreachable threshold caps";
  });

  run_entry(report, "coefficient_determinism", [&](PropertyResult& r) {
    const GridHierarchy g = build_hierarchy(4, 16);
    const CoefficientField a = build_random_field(g, 7);
    const CoefficientField b = build_random_field(g, 7);
    double worst = a.values == b.values ? 0.0 : 1.0;
    const double trig_ref = 1.1443001443001443;
    worst = std::max(worst, std::abs(eval_multiscale_trig(0.0, 0.0) - trig_ref));
    r.measured = worst;
    r.passed = worst <= 1e-15;
    r.detail = "seeded field bitwise stable; trig value at the origin matches the record";
  });

  return report;
}

}  // namespace msbasis
