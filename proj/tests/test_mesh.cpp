#include <cmath>
#include <fstream>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mgrf/mesh.hpp"

using namespace mgrf;
using testutil::code_of;

namespace {

// Independent of the library's chart code: least-squares barycentric fit in
// ambient coordinates, then a full scan over elements.
std::optional<LocateResult> brute_force_locate(const TriangulatedManifold& mesh,
                                               const Eigen::Vector3d& p, double tol) {
  const int d = mesh.intrinsic_dim();
  std::optional<LocateResult> best;
  double best_defect = tol;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const Index* v = mesh.element(e);
    Eigen::MatrixXd A(mesh.ambient_dim(), d);
    const Eigen::Vector3d p0 = mesh.point(v[0]);
    for (int j = 1; j <= d; ++j)
      A.col(j - 1) = (mesh.point(v[j]) - p0).head(mesh.ambient_dim());
    const Eigen::VectorXd rhs = (p - p0).head(mesh.ambient_dim());
    const Eigen::VectorXd w = A.colPivHouseholderQr().solve(rhs);
    const double resid = (A * w - rhs).norm();
    Eigen::Vector4d bary = Eigen::Vector4d::Zero();
    bary[0] = 1 - w.sum();
    for (int j = 1; j <= d; ++j) bary[j] = w[j - 1];
    double scale = 0;
    for (int j = 0; j < d; ++j) scale = std::max(scale, A.col(j).norm());
    double defect = resid;
    for (int i = 0; i <= d; ++i) defect = std::max(defect, -bary[i] * scale);
    if (defect < best_defect) {
      best_defect = defect;
      LocateResult r;
      r.element = e;
      r.weights = bary.cwiseMax(0.0);
      r.weights /= r.weights.sum();
      best = r;
    }
  }
  return best;
}

double total_volume(const TriangulatedManifold& mesh) {
  double s = 0;
  for (Index e = 0; e < mesh.num_elements(); ++e) s += element_chart(mesh, e).volume;
  return s;
}

}  // namespace

TEST_CASE("structured 2D grid: counts, coordinates, areas") {
  const TriangulatedManifold g = build_grid(2, {3, 2}, {3.0, 2.0});
  REQUIRE(g.num_vertices() == 12);
  REQUIRE(g.num_elements() == 12);
  REQUIRE(g.ambient_dim() == 2);
  REQUIRE(g.intrinsic_dim() == 2);
  // x varies fastest
  CHECK(g.point(0).isApprox(Eigen::Vector3d(0, 0, 0)));
  CHECK(g.point(1).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(g.point(6).isApprox(Eigen::Vector3d(2, 1, 0)));
  CHECK(total_volume(g) == Catch::Approx(6.0).epsilon(1e-14));
  for (Index e = 0; e < g.num_elements(); ++e)
    CHECK(element_chart(g, e).volume == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(g.diameter() == Catch::Approx(std::sqrt(13.0)));
}

TEST_CASE("unit square cell: the two triangles split along the +x+y diagonal") {
  const TriangulatedManifold g = build_grid(2, {1, 1}, {1.0, 1.0});
  REQUIRE(g.num_elements() == 2);
  const Index* t0 = g.element(0);
  const Index* t1 = g.element(1);
  CHECK(std::vector<Index>(t0, t0 + 3) == std::vector<Index>{0, 1, 3});
  CHECK(std::vector<Index>(t1, t1 + 3) == std::vector<Index>{0, 3, 2});
}

TEST_CASE("structured 3D grid: six tetrahedra per cell tile it exactly") {
  const TriangulatedManifold g = build_grid(3, {2, 2, 2}, {2.0, 2.0, 2.0});
  REQUIRE(g.num_vertices() == 27);
  REQUIRE(g.num_elements() == 48);
  CHECK(total_volume(g) == Catch::Approx(8.0).epsilon(1e-13));
  for (Index e = 0; e < g.num_elements(); ++e)
    CHECK(element_chart(g, e).volume == Catch::Approx(1.0 / 6.0).epsilon(1e-13));
  // Each tetrahedron's centroid must locate back to that tetrahedron.
  for (Index e = 0; e < g.num_elements(); ++e) {
    const Index* v = g.element(e);
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int i = 0; i < 4; ++i) c += g.point(v[i]);
    c /= 4;
    const auto r = try_locate(g, c);
    REQUIRE(r.has_value());
    CHECK(r->element == e);
    for (int i = 0; i < 4; ++i) CHECK(r->weights[i] == Catch::Approx(0.25).margin(1e-12));
  }
}

TEST_CASE("grid vertex cap raises an overflow error") {
  CHECK(code_of([] { build_grid(3, {1000, 1000, 1000}, {1, 1, 1}, 1'000'000); }) ==
        errc::overflow);
}

TEST_CASE("reference triangle chart: gradients and volume") {
  // Unit right triangle (0,0), (1,0), (0,1).
  Matrix verts(3, 2);
  verts << 0, 0, 1, 0, 0, 1;
  const TriangulatedManifold m(2, 2, verts, {0, 1, 2});
  const ElementChart c = element_chart(m, 0);
  CHECK(c.volume == Catch::Approx(0.5));
  CHECK(c.grad.col(0).head(2).isApprox(Eigen::Vector2d(-1, -1)));
  CHECK(c.grad.col(1).head(2).isApprox(Eigen::Vector2d(1, 0)));
  CHECK(c.grad.col(2).head(2).isApprox(Eigen::Vector2d(0, 1)));
}

TEST_CASE("degenerate and malformed meshes are rejected") {
  Matrix verts(3, 2);
  verts << 0, 0, 1, 0, 2, 0;  // collinear
  CHECK(code_of([&] { TriangulatedManifold(2, 2, verts, {0, 1, 2}); }) ==
        errc::degenerate_simplex);

  Matrix ok(3, 2);
  ok << 0, 0, 1, 0, 0, 1;
  CHECK(code_of([&] { TriangulatedManifold(2, 2, ok, {0, 1, 5}); }) == errc::index_out_of_range);
  CHECK(code_of([&] { TriangulatedManifold(2, 2, ok, {0, 1}); }) == errc::config);

  Matrix bad = ok;
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { TriangulatedManifold(2, 2, bad, {0, 1, 2}); }) == errc::non_finite_entry);
}

TEST_CASE("locate agrees with a brute-force scan on a jittered mesh") {
  const auto mesh = testutil::jittered_grid2d(7, 5, 3.5, 2.5, 0.25, 42);
  Rng rng(7);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    Eigen::Vector3d p(rng.uniform_in(0, 3.5), rng.uniform_in(0, 2.5), 0);
    const auto got = try_locate(mesh, p);
    const auto want = brute_force_locate(mesh, p, 1e-9);
    REQUIRE(got.has_value());
    REQUIRE(want.has_value());
    // Point reconstruction is the invariant (ties on edges may pick either side).
    const Index* v = mesh.element(got->element);
    Eigen::Vector3d rec = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) rec += got->weights[i] * mesh.point(v[i]);
    CHECK((rec - p).norm() < 1e-12);
    CHECK(got->weights.minCoeff() >= 0);
    CHECK(got->weights.sum() == Catch::Approx(1.0).epsilon(1e-12));
    if (want->element == got->element) {
      for (int i = 0; i < 3; ++i)
        CHECK(got->weights[i] == Catch::Approx(want->weights[i]).margin(1e-9));
    }
    ++checked;
  }
  REQUIRE(checked == 200);
}

TEST_CASE("snap tolerance: near-boundary points snap, far points are outside") {
  const TriangulatedManifold g = build_grid(2, {4, 4}, {1.0, 1.0});
  const auto snapped = try_locate(g, {0.5, 1.0 + 1e-12, 0});
  REQUIRE(snapped.has_value());
  CHECK(snapped->weights.minCoeff() >= 0);

  CHECK_FALSE(try_locate(g, {0.5, 1.5, 0}).has_value());
  CHECK(code_of([&] { locate(g, {-2, 0.5, 0}); }) == errc::outside_domain);
}

TEST_CASE("explicit barycentric weights on the unit square") {
  const TriangulatedManifold g = build_grid(2, {1, 1}, {1.0, 1.0});
  const auto r = locate(g, {0.75, 0.25, 0});
  REQUIRE(r.element == 0);  // lower triangle (0,0),(1,0),(1,1)
  CHECK(r.weights[0] == Catch::Approx(0.25));
  CHECK(r.weights[1] == Catch::Approx(0.50));
  CHECK(r.weights[2] == Catch::Approx(0.25));
}

TEST_CASE("icosahedron OFF: Euler characteristic, surface locate") {
  const std::string dir = testutil::temp_dir();
  const std::string path = dir + "/ico.off";
  write_text_file(path, testutil::icosahedron_off());
  const TriangulatedManifold m = load_mesh_off(path);
  REQUIRE(m.num_vertices() == 12);
  REQUIRE(m.num_elements() == 20);
  REQUIRE(m.is_surface());

  std::set<std::pair<Index, Index>> edges;
  for (Index e = 0; e < m.num_elements(); ++e) {
    const Index* v = m.element(e);
    for (int i = 0; i < 3; ++i) {
      const Index a = v[i], b = v[(i + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  CHECK(12 - static_cast<int>(edges.size()) + 20 == 2);  // V - E + F

  // Face centroids locate to their own face with equal weights.
  for (Index e = 0; e < m.num_elements(); ++e) {
    const Index* v = m.element(e);
    Eigen::Vector3d c = (m.point(v[0]) + m.point(v[1]) + m.point(v[2])) / 3.0;
    const auto r = try_locate(m, c);
    REQUIRE(r.has_value());
    CHECK(r->element == e);
    for (int i = 0; i < 3; ++i) CHECK(r->weights[i] == Catch::Approx(1.0 / 3).margin(1e-12));
  }
  // A point far off the surface is outside the domain.
  CHECK_FALSE(try_locate(m, {0, 0, 0}).has_value());
}

TEST_CASE("CSV mesh pair round-trips") {
  const std::string dir = testutil::temp_dir();
  write_text_file(dir + "/v.csv", "x,y\n0,0\n1,0\n0.5,1\n");
  write_text_file(dir + "/s.csv", "v0,v1,v2\n0,1,2\n");
  const TriangulatedManifold m = load_mesh_csv(dir + "/v.csv", dir + "/s.csv");
  REQUIRE(m.num_vertices() == 3);
  REQUIRE(m.num_elements() == 1);
  CHECK(m.point(2).isApprox(Eigen::Vector3d(0.5, 1, 0)));

  CHECK(code_of([&] { load_mesh_csv(dir + "/missing.csv", dir + "/s.csv"); }) == errc::io);
  write_text_file(dir + "/bad.csv", "x,y\n0,zero\n");
  CHECK(code_of([&] { load_mesh_csv(dir + "/bad.csv", dir + "/s.csv"); }) == errc::parse);
}

TEST_CASE("anisotropy metric matches a hand-built rotation model") {
  const double rho1 = 2.0, rho2 = 0.5, theta = std::numbers::pi / 6;
  const AnisotropyField f = AnisotropyField::constant2d(rho1, rho2, theta);
  const TriangulatedManifold g = build_grid(2, {2, 2}, {1.0, 1.0});
  const MetricTensor m = metric_at(f, g, 3);

  Eigen::Matrix2d R;
  R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Eigen::Matrix2d Ginv = R * Eigen::Vector2d(rho1 * rho1, rho2 * rho2).asDiagonal() *
                         R.transpose();
  CHECK((m.inv.topLeftCorner<2, 2>() - Ginv).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m.g.topLeftCorner<2, 2>() - Ginv.inverse()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(m.sqrt_det == Catch::Approx(1.0 / (rho1 * rho2)).epsilon(1e-14));

  // Unit G-length in the rotated first axis spans Euclidean length rho1.
  const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
  CHECK((rho1 * u).dot(Ginv.inverse() * (rho1 * u)) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("per-vertex anisotropy with constant values equals the constant field") {
  const TriangulatedManifold g = testutil::jittered_grid2d(4, 4, 1, 1, 0.2, 3);
  const Eigen::Index n = g.num_vertices();
  Matrix ranges(n, 2);
  ranges.col(0).setConstant(1.5);
  ranges.col(1).setConstant(0.4);
  Vector angles = Vector::Constant(n, 0.3);
  const AnisotropyField fv = AnisotropyField::vertexwise2d(ranges, angles);
  const AnisotropyField fc = AnisotropyField::constant2d(1.5, 0.4, 0.3);
  for (Index e = 0; e < g.num_elements(); ++e) {
    const MetricTensor a = metric_at(fv, g, e);
    const MetricTensor b = metric_at(fc, g, e);
    CHECK((a.inv - b.inv).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.sqrt_det == Catch::Approx(b.sqrt_det).epsilon(1e-12));
  }
}

TEST_CASE("anisotropy validation") {
  CHECK(code_of([] { AnisotropyField::constant2d(1.0, -0.5, 0.0); }) == errc::config);
  const TriangulatedManifold g = build_grid(2, {2, 2}, {1.0, 1.0});
  Matrix ranges(3, 2);  // wrong row count for a 9-vertex mesh
  ranges.setOnes();
  Vector angles = Vector::Zero(3);
  const AnisotropyField f = AnisotropyField::vertexwise2d(ranges, angles);
  CHECK(code_of([&] { metric_at(f, g, 0); }) == errc::missing_field);

  const AnisotropyField f3 = AnisotropyField::isotropic(3, 1.0);
  CHECK(code_of([&] { metric_at(f3, g, 0); }) == errc::dimension_mismatch);
}

TEST_CASE("anisotropy CSV loader: constant and per-vertex, 2D and 3D") {
  const std::string dir = testutil::temp_dir();
  write_text_file(dir + "/a2.csv", "rho1,rho2,theta\n2,0.5,0.5235987755982988\n");
  const AnisotropyField f2 = AnisotropyField::from_csv(dir + "/a2.csv", 2);
  CHECK(f2.constant());
  CHECK(f2.ranges()(0, 0) == 2.0);
  CHECK(f2.angles()[0] == Catch::Approx(std::numbers::pi / 6));

  write_text_file(dir + "/a3.csv", "rho1,rho2,rho3\n1,2,3\n");
  const AnisotropyField f3 = AnisotropyField::from_csv(dir + "/a3.csv", 3);
  CHECK(f3.rotations()[0].isApprox(Eigen::Matrix3d::Identity()));

  write_text_file(dir + "/a3r.csv",
                  "rho1,rho2,rho3,r11,r12,r13,r21,r22,r23,r31,r32,r33\n"
                  "1,2,3,0,-1,0,1,0,0,0,0,1\n");
  const AnisotropyField f3r = AnisotropyField::from_csv(dir + "/a3r.csv", 3);
  Eigen::Matrix3d want;
  want << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK(f3r.rotations()[0].isApprox(want, 1e-12));

  write_text_file(dir + "/bad.csv", "rho1,theta\n1,0\n");
  CHECK(code_of([&] { AnisotropyField::from_csv(dir + "/bad.csv", 2); }) == errc::parse);
}
