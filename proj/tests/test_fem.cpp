#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mgrf/fem.hpp"

using namespace mgrf;
using testutil::code_of;

namespace {

// Independent assembly oracle for flat 2D meshes: hat-function gradients from
// the affine interpolation system (not the chart code), volumes from the
// cross product.
Matrix dense_stiffness_oracle(const TriangulatedManifold& mesh, const AnisotropyField* field) {
  const Eigen::Index n = mesh.num_vertices();
  Matrix F = Matrix::Zero(n, n);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const Index* v = mesh.element(e);
    Eigen::Matrix3d V;  // rows: [1, x_i, y_i]
    for (int i = 0; i < 3; ++i) {
      V(i, 0) = 1;
      V(i, 1) = mesh.vertices()(v[i], 0);
      V(i, 2) = mesh.vertices()(v[i], 1);
    }
    const Eigen::Matrix3d coef = V.inverse();  // column i: affine coeffs of hat i
    Eigen::Matrix<double, 2, 3> grads;
    for (int i = 0; i < 3; ++i) grads.col(i) = coef.block<2, 1>(1, i);
    const Eigen::Vector2d e1 = (mesh.point(v[1]) - mesh.point(v[0])).head<2>();
    const Eigen::Vector2d e2 = (mesh.point(v[2]) - mesh.point(v[0])).head<2>();
    const double area = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    MetricTensor g;
    if (field) g = metric_at(*field, mesh, e);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        F(v[i], v[j]) +=
            g.sqrt_det * area * grads.col(i).dot(g.inv.topLeftCorner<2, 2>() * grads.col(j));
  }
  return F;
}

Vector dense_lumped_mass_oracle(const TriangulatedManifold& mesh, const AnisotropyField* field) {
  const Eigen::Index n = mesh.num_vertices();
  Vector m = Vector::Zero(n);
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const Index* v = mesh.element(e);
    const Eigen::Vector2d e1 = (mesh.point(v[1]) - mesh.point(v[0])).head<2>();
    const Eigen::Vector2d e2 = (mesh.point(v[2]) - mesh.point(v[0])).head<2>();
    const double area = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    MetricTensor g;
    if (field) g = metric_at(*field, mesh, e);
    for (int i = 0; i < 3; ++i) m[v[i]] += g.sqrt_det * area / 3.0;
  }
  return m;
}

}  // namespace

TEST_CASE("unit square lumped mass") {
  const TriangulatedManifold g = build_grid(2, {1, 1}, {1.0, 1.0});
  const LumpedMass lm = assemble_lumped_mass(g);
  CHECK(lm.mass[0] == Catch::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(lm.mass[1] == Catch::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(lm.mass[2] == Catch::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(lm.mass[3] == Catch::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(lm.sqrt_mass[0] == Catch::Approx(std::sqrt(1.0 / 3)));
  CHECK(lm.mass.sum() == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("reference triangle stiffness") {
  Matrix verts(3, 2);
  verts << 0, 0, 1, 0, 0, 1;
  const TriangulatedManifold m(2, 2, verts, {0, 1, 2});
  const SparseMatrix F = assemble_stiffness(m);
  Matrix want(3, 3);
  want << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((Matrix(F) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("stiffness matches the dense oracle on a jittered anisotropic mesh") {
  const auto mesh = testutil::jittered_grid2d(6, 5, 2.0, 1.7, 0.25, 11);
  const AnisotropyField f = AnisotropyField::constant2d(1.7, 0.6, 0.4);

  SECTION("identity metric") {
    const SparseMatrix F = assemble_stiffness(mesh);
    const Matrix want = dense_stiffness_oracle(mesh, nullptr);
    CHECK((Matrix(F) - want).cwiseAbs().maxCoeff() < 1e-12);
    const Vector lm = assemble_lumped_mass(mesh).mass;
    CHECK((lm - dense_lumped_mass_oracle(mesh, nullptr)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("anisotropic metric") {
    const SparseMatrix F = assemble_stiffness(mesh, &f);
    const Matrix want = dense_stiffness_oracle(mesh, &f);
    CHECK((Matrix(F) - want).cwiseAbs().maxCoeff() < 1e-12);
    const Vector lm = assemble_lumped_mass(mesh, &f).mass;
    CHECK((lm - dense_lumped_mass_oracle(mesh, &f)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("stiffness structure: symmetric, zero row sums, PSD") {
  const auto mesh = testutil::jittered_grid2d(5, 5, 1.0, 1.0, 0.2, 5);
  const AnisotropyField f = AnisotropyField::constant2d(0.8, 0.3, -0.7);
  const Matrix F = Matrix(assemble_stiffness(mesh, &f));
  CHECK((F - F.transpose()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(F.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);  // constants in the kernel
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(F);
  CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("3D stiffness row sums vanish and masses are positive") {
  const auto mesh = testutil::jittered_grid3d(3, 3, 3, 1.0, 0.15, 9);
  const SparseMatrix F = assemble_stiffness(mesh);
  const Vector ones = Vector::Ones(mesh.num_vertices());
  CHECK((F * ones).cwiseAbs().maxCoeff() < 1e-12);
  const LumpedMass lm = assemble_lumped_mass(mesh);
  CHECK(lm.mass.minCoeff() > 0);
  CHECK(lm.mass.sum() == Catch::Approx(1.0).epsilon(1e-12));  // total metric volume
}

TEST_CASE("scaled stiffness is the sqrt-mass similarity transform") {
  const auto mesh = testutil::jittered_grid2d(4, 4, 1.0, 1.0, 0.2, 21);
  const LumpedMass lm = assemble_lumped_mass(mesh);
  const SparseMatrix F = assemble_stiffness(mesh);
  const SparseMatrix S = assemble_scaled_stiffness(lm, F);
  const Matrix want = lm.sqrt_mass.cwiseInverse().asDiagonal() * Matrix(F) *
                      lm.sqrt_mass.cwiseInverse().asDiagonal();
  CHECK((Matrix(S) - want).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("range scaling laws: mass ~ c^-d, 2D stiffness invariant") {
  const auto mesh = testutil::jittered_grid2d(5, 4, 2.0, 1.5, 0.2, 31);
  const double c = 1.9;
  const AnisotropyField f1 = AnisotropyField::constant2d(1.2, 0.5, 0.6);
  const AnisotropyField fc = AnisotropyField::constant2d(c * 1.2, c * 0.5, 0.6);
  const Vector m1 = assemble_lumped_mass(mesh, &f1).mass;
  const Vector mc = assemble_lumped_mass(mesh, &fc).mass;
  CHECK((mc - m1 / (c * c)).cwiseAbs().maxCoeff() < 1e-13);
  const Matrix F1 = Matrix(assemble_stiffness(mesh, &f1));
  const Matrix Fc = Matrix(assemble_stiffness(mesh, &fc));
  CHECK((F1 - Fc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant-metric stiffness equals identity-metric stiffness on deformed vertices") {
  const auto mesh = testutil::jittered_grid2d(6, 4, 2.0, 1.2, 0.2, 77);
  const double rho1 = 1.6, rho2 = 0.45, theta = 0.8;
  const AnisotropyField f = AnisotropyField::constant2d(rho1, rho2, theta);
  const Matrix F_metric = Matrix(assemble_stiffness(mesh, &f));

  Eigen::Matrix2d R;
  R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  const Eigen::Matrix2d B =
      Eigen::Vector2d(1 / rho1, 1 / rho2).asDiagonal() * R.transpose();
  Matrix verts = mesh.vertices();
  for (Eigen::Index i = 0; i < verts.rows(); ++i)
    verts.row(i) = (B * verts.row(i).transpose()).transpose();
  std::vector<Index> cells = mesh.simplices();
  const TriangulatedManifold deformed(2, 2, std::move(verts), std::move(cells));
  const Matrix F_plain = Matrix(assemble_stiffness(deformed));
  CHECK((F_metric - F_plain).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("surface operators: icosahedron mass equals area, stiffness kernel") {
  const std::string dir = testutil::temp_dir();
  write_text_file(dir + "/ico.off", testutil::icosahedron_off());
  const TriangulatedManifold m = load_mesh_off(dir + "/ico.off");
  double area = 0;
  for (Index e = 0; e < m.num_elements(); ++e) area += element_chart(m, e).volume;
  const LumpedMass lm = assemble_lumped_mass(m);
  CHECK(lm.mass.sum() == Catch::Approx(area).epsilon(1e-13));
  const SparseMatrix F = assemble_stiffness(m);
  const Vector ones = Vector::Ones(m.num_vertices());
  CHECK((F * ones).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(code_of([&] {
          const AnisotropyField f = AnisotropyField::isotropic(2, 1.0);
          assemble_stiffness(m, &f);
        }) == errc::dimension_mismatch);
}

TEST_CASE("design matrix: convex rows, exact on linear fields") {
  const auto mesh = testutil::jittered_grid2d(5, 5, 1.0, 1.0, 0.25, 13);
  Rng rng(99);
  Matrix locs(20, 2);
  for (int i = 0; i < 20; ++i) {
    locs(i, 0) = rng.uniform();
    locs(i, 1) = rng.uniform();
  }
  const SparseMatrix M = assemble_design(mesh, locs);
  REQUIRE(M.rows() == 20);
  REQUIRE(M.cols() == mesh.num_vertices());

  const Vector ones = Vector::Ones(mesh.num_vertices());
  CHECK(((M * ones).array() - 1.0).abs().maxCoeff() < 1e-12);

  // nodal values of 2 + 3x - y interpolate exactly
  Vector nodal(mesh.num_vertices());
  for (Eigen::Index i = 0; i < nodal.size(); ++i)
    nodal[i] = 2 + 3 * mesh.vertices()(i, 0) - mesh.vertices()(i, 1);
  const Vector at = M * nodal;
  for (int i = 0; i < 20; ++i)
    CHECK(at[i] == Catch::Approx(2 + 3 * locs(i, 0) - locs(i, 1)).margin(1e-12));

  Matrix bad(1, 2);
  bad << 5.0, 5.0;
  CHECK(code_of([&] { assemble_design(mesh, bad); }) == errc::outside_domain);
}

TEST_CASE("bundle wires dimensions together") {
  const auto mesh = testutil::jittered_grid2d(4, 4, 1.0, 1.0, 0.2, 17);
  Matrix obs(3, 2), tgt(5, 2);
  obs << 0.2, 0.2, 0.5, 0.6, 0.9, 0.1;
  tgt << 0.1, 0.1, 0.3, 0.3, 0.5, 0.5, 0.7, 0.7, 0.9, 0.9;
  const OperatorBundle b = make_bundle(mesh, nullptr, &obs, &tgt);
  CHECK(b.n() == mesh.num_vertices());
  CHECK(b.p() == 3);
  CHECK(b.q() == 5);
  CHECK(b.mass.size() == b.n());
  const OperatorBundle prior_only = make_bundle(mesh);
  CHECK(prior_only.p() == 0);
  CHECK(prior_only.q() == 0);
}
