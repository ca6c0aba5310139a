#pragma once

// Triangulated manifolds: construction (files or structured grids), per-element
// chart geometry, point location through a uniform spatial hash, and the
// Riemannian metric induced by local anisotropy (ranges + rotation).
//
// Meshes are flat simplicial domains in R^d (d = 2, 3) or triangulated
// surfaces embedded in R^3. All geometry below works in a per-element chart:
// for flat meshes the chart is the global frame, for surfaces an orthonormal
// tangent frame of the triangle's plane.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgrf/csv.hpp"
#include "mgrf/error.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

struct ElementChart {
  int dim = 0;               // intrinsic dimension d
  double volume = 0;         // Euclidean d-volume of the simplex
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d frame = Eigen::Matrix3d::Identity();  // chart axes as columns
  Eigen::Matrix<double, 3, 4> pts;       // in-chart vertex coordinates (cols)
  Eigen::Matrix3d inv_edge;              // inverse of [p1-p0 ... pd-p0], top d x d
  Eigen::Matrix<double, 3, 4> grad;      // chart gradients of the d+1 hat functions
};

namespace detail {
class LocateIndex;
}

class TriangulatedManifold {
 public:
  // vertices: one row per vertex (ambient_dim columns); simplices: flat list of
  // (intrinsic_dim+1)-tuples of vertex ids. Validates indices and rejects
  // degenerate simplices.
  TriangulatedManifold(int ambient_dim, int intrinsic_dim, Matrix vertices,
                       std::vector<Index> simplices);
  ~TriangulatedManifold();
  TriangulatedManifold(TriangulatedManifold&&) noexcept = default;
  TriangulatedManifold& operator=(TriangulatedManifold&&) noexcept = default;

  int ambient_dim() const { return ambient_; }
  int intrinsic_dim() const { return intrinsic_; }
  bool is_surface() const { return intrinsic_ < ambient_; }
  Eigen::Index num_vertices() const { return vertices_.rows(); }
  Eigen::Index num_elements() const { return static_cast<Eigen::Index>(simplices_.size()) / (intrinsic_ + 1); }

  const Matrix& vertices() const { return vertices_; }
  const std::vector<Index>& simplices() const { return simplices_; }
  const Index* element(Index e) const { return simplices_.data() + static_cast<std::size_t>(e) * (intrinsic_ + 1); }

  // Vertex coordinates padded to 3 components.
  Eigen::Vector3d point(Index v) const {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (int a = 0; a < ambient_; ++a) p[a] = vertices_(v, a);
    return p;
  }

  const Eigen::Vector3d& box_min() const { return box_min_; }
  const Eigen::Vector3d& box_max() const { return box_max_; }
  double diameter() const { return diameter_; }

  // Vertex -> incident elements, CSR layout. Built at construction; the
  // stiffness assembly and locate fallbacks rely on it.
  const std::vector<std::int64_t>& adjacency_offsets() const { return adj_offsets_; }
  const std::vector<Index>& adjacency_elements() const { return adj_elements_; }

  const detail::LocateIndex& locate_index() const;  // built lazily, thread-safe

 private:
  int ambient_;
  int intrinsic_;
  Matrix vertices_;
  std::vector<Index> simplices_;
  Eigen::Vector3d box_min_, box_max_;
  double diameter_;
  std::vector<std::int64_t> adj_offsets_;
  std::vector<Index> adj_elements_;

  struct Lazy;
  std::unique_ptr<Lazy> lazy_;
};

// ---------------------------------------------------------------------------
// Element charts

inline ElementChart element_chart(const TriangulatedManifold& mesh, Index e) {
  const int d = mesh.intrinsic_dim();
  const Index* v = mesh.element(e);
  ElementChart c;
  c.dim = d;
  c.pts.setZero();
  c.inv_edge.setIdentity();
  c.grad.setZero();

  std::array<Eigen::Vector3d, 4> p;
  for (int i = 0; i <= d; ++i) p[i] = mesh.point(v[i]);
  c.origin = p[0];

  if (mesh.is_surface()) {
    // Orthonormal tangent frame of the triangle plane.
    const Eigen::Vector3d e1 = p[1] - p[0];
    const Eigen::Vector3d e2 = p[2] - p[0];
    const double l1 = e1.norm();
    Eigen::Vector3d nrm = e1.cross(e2);
    const double a2 = nrm.norm();  // twice the area
    if (l1 <= 0 || a2 <= 1e-12 * l1 * e2.norm())
      fail(errc::degenerate_simplex, "element " + std::to_string(e));
    const Eigen::Vector3d t1 = e1 / l1;
    nrm /= a2;
    const Eigen::Vector3d t2 = nrm.cross(t1);
    c.frame.col(0) = t1;
    c.frame.col(1) = t2;
    c.frame.col(2) = nrm;
    for (int i = 1; i <= d; ++i) {
      const Eigen::Vector3d w = p[i] - p[0];
      c.pts(0, i) = t1.dot(w);
      c.pts(1, i) = t2.dot(w);
    }
  } else {
    for (int i = 0; i <= d; ++i) c.pts.col(i).head(3) = p[i];
  }

  Eigen::Matrix3d E = Eigen::Matrix3d::Identity();
  double hadamard = 1.0;
  for (int j = 1; j <= d; ++j) {
    E.col(j - 1) = c.pts.col(j) - c.pts.col(0);
    hadamard *= E.col(j - 1).norm();
  }
  const double det = (d == 2) ? E(0, 0) * E(1, 1) - E(0, 1) * E(1, 0) : E.determinant();
  if (!(std::abs(det) > 1e-12 * hadamard))
    fail(errc::degenerate_simplex, "element " + std::to_string(e));

  double fact = 1;
  for (int k = 2; k <= d; ++k) fact *= k;
  c.volume = std::abs(det) / fact;

  Eigen::Matrix3d Einv = Eigen::Matrix3d::Identity();
  if (d == 2) {
    Einv(0, 0) = E(1, 1) / det;
    Einv(0, 1) = -E(0, 1) / det;
    Einv(1, 0) = -E(1, 0) / det;
    Einv(1, 1) = E(0, 0) / det;
  } else {
    Einv = E.inverse();
  }
  c.inv_edge = Einv;

  // Barycentric coordinate i (i >= 1) is row i-1 of Einv applied to (x - p0);
  // its chart gradient is that row. Coordinate 0 closes the partition of unity.
  for (int i = 1; i <= d; ++i) {
    c.grad.col(i).head(3) = Einv.row(i - 1).transpose();
    c.grad.col(0).head(3) -= Einv.row(i - 1).transpose();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Anisotropy and the induced metric

// Metric of one element: G = R diag(rho)^-2 R^T, so unit G-distance along the
// rotated axis i spans Euclidean range rho_i. Only the top d x d block is used.
struct MetricTensor {
  int dim = 0;
  Eigen::Matrix3d g = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d inv = Eigen::Matrix3d::Identity();
  double sqrt_det = 1.0;  // sqrt(det G) = prod 1/rho_i
};

inline MetricTensor metric_from_rotation(int dim, const Eigen::Vector3d& rho,
                                         const Eigen::Matrix3d& rot) {
  MetricTensor m;
  m.dim = dim;
  m.g.setZero();
  m.inv.setZero();
  m.sqrt_det = 1.0;
  Eigen::Vector3d d2 = Eigen::Vector3d::Ones(), di2 = Eigen::Vector3d::Ones();
  for (int a = 0; a < dim; ++a) {
    require(rho[a] > 0 && std::isfinite(rho[a]), errc::config, "anisotropy range must be positive");
    d2[a] = rho[a] * rho[a];
    di2[a] = 1.0 / d2[a];
    m.sqrt_det /= rho[a];
  }
  m.g = rot * di2.asDiagonal() * rot.transpose();
  m.inv = rot * d2.asDiagonal() * rot.transpose();
  for (int a = dim; a < 3; ++a) m.g(a, a) = m.inv(a, a) = 1.0;
  return m;
}

inline Eigen::Matrix3d rotation2d(double theta) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(0, 0) = std::cos(theta);
  r(0, 1) = -std::sin(theta);
  r(1, 0) = std::sin(theta);
  r(1, 1) = std::cos(theta);
  return r;
}

// Per-vertex (or spatially constant) anisotropy. dim == 2 stores an angle per
// row; dim == 3 stores a rotation matrix per row.
class AnisotropyField {
 public:
  static AnisotropyField constant2d(double rho1, double rho2, double theta) {
    AnisotropyField f;
    f.dim_ = 2;
    f.ranges_.resize(1, 2);
    f.ranges_ << rho1, rho2;
    f.angles_.resize(1);
    f.angles_ << theta;
    f.finish();
    return f;
  }

  static AnisotropyField constant3d(const Eigen::Vector3d& rho, const Eigen::Matrix3d& rot) {
    AnisotropyField f;
    f.dim_ = 3;
    f.ranges_.resize(1, 3);
    f.ranges_ << rho[0], rho[1], rho[2];
    f.rotations_.push_back(orthonormalized(rot));
    f.finish();
    return f;
  }

  static AnisotropyField isotropic(int dim, double range) {
    if (dim == 2) return constant2d(range, range, 0.0);
    require(dim == 3, errc::config, "anisotropy dimension must be 2 or 3");
    return constant3d(Eigen::Vector3d::Constant(range), Eigen::Matrix3d::Identity());
  }

  static AnisotropyField vertexwise2d(Matrix ranges, Vector angles) {
    AnisotropyField f;
    f.dim_ = 2;
    require(ranges.cols() == 2 && ranges.rows() == angles.size(), errc::dimension_mismatch,
            "per-vertex anisotropy: ranges must be k x 2 with one angle per row");
    f.ranges_ = std::move(ranges);
    f.angles_ = std::move(angles);
    f.finish();
    return f;
  }

  static AnisotropyField vertexwise3d(Matrix ranges, std::vector<Eigen::Matrix3d> rotations) {
    AnisotropyField f;
    f.dim_ = 3;
    require(ranges.cols() == 3 &&
                ranges.rows() == static_cast<Eigen::Index>(rotations.size()),
            errc::dimension_mismatch,
            "per-vertex anisotropy: ranges must be k x 3 with one rotation per row");
    f.ranges_ = std::move(ranges);
    f.rotations_ = std::move(rotations);
    for (auto& r : f.rotations_) r = orthonormalized(r);
    f.finish();
    return f;
  }

  // CSV with columns rho1,rho2,theta (2D) or rho1,rho2,rho3[,r11..r33] (3D,
  // rotation entries row-major, identity if absent). One row = constant field,
  // otherwise one row per mesh vertex.
  static AnisotropyField from_csv(const std::string& path, int dim);

  int dim() const { return dim_; }
  bool constant() const { return ranges_.rows() == 1; }
  Eigen::Index rows() const { return ranges_.rows(); }
  const Matrix& ranges() const { return ranges_; }
  const Vector& angles() const { return angles_; }
  const std::vector<Eigen::Matrix3d>& rotations() const { return rotations_; }

  Eigen::Matrix3d rotation_row(Eigen::Index i) const {
    return dim_ == 2 ? rotation2d(angles_[i]) : rotations_[i];
  }

  const MetricTensor& constant_metric() const { return constant_metric_; }

 private:
  void finish() {
    require(ranges_.rows() >= 1, errc::config, "anisotropy field is empty");
    for (Eigen::Index i = 0; i < ranges_.rows(); ++i)
      for (int a = 0; a < dim_; ++a)
        require(ranges_(i, a) > 0 && std::isfinite(ranges_(i, a)), errc::config,
                "anisotropy ranges must be positive and finite");
    if (constant()) {
      Eigen::Vector3d rho = Eigen::Vector3d::Ones();
      for (int a = 0; a < dim_; ++a) rho[a] = ranges_(0, a);
      constant_metric_ = metric_from_rotation(dim_, rho, rotation_row(0));
    }
  }

  static Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r) {
    require((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6,
            errc::config, "rotation matrix is not orthonormal");
    // Snap to the nearest rotation so downstream identities hold to machine precision.
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d q = svd.matrixU() * svd.matrixV().transpose();
    if (q.determinant() < 0) q.col(2) *= -1.0;
    return q;
  }

  int dim_ = 2;
  Matrix ranges_;
  Vector angles_;
  std::vector<Eigen::Matrix3d> rotations_;
  MetricTensor constant_metric_;
};

// Metric of one element: constant fields short-circuit; per-vertex fields
// average ranges arithmetically and rotations nematically (2D: mean of 2*theta;
// 3D: matrix mean projected back onto SO(3)).
inline MetricTensor metric_at(const AnisotropyField& field, const TriangulatedManifold& mesh,
                              Index e) {
  require(field.dim() == mesh.intrinsic_dim(), errc::dimension_mismatch,
          "anisotropy dimension does not match the mesh");
  require(!mesh.is_surface(), errc::dimension_mismatch,
          "anisotropy fields require a flat domain");
  if (field.constant()) return field.constant_metric();
  require(field.rows() == mesh.num_vertices(), errc::missing_field,
          "per-vertex anisotropy must supply one row per mesh vertex");

  const int d = mesh.intrinsic_dim();
  const Index* v = mesh.element(e);
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  for (int i = 0; i <= d; ++i)
    for (int a = 0; a < d; ++a) rho[a] += field.ranges()(v[i], a);
  rho /= d + 1;

  Eigen::Matrix3d rot;
  if (d == 2) {
    // Axes are pi-periodic; average on the doubled angle.
    double s = 0, c = 0;
    for (int i = 0; i <= d; ++i) {
      s += std::sin(2.0 * field.angles()[v[i]]);
      c += std::cos(2.0 * field.angles()[v[i]]);
    }
    rot = rotation2d(0.5 * std::atan2(s, c));
  } else {
    Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
    for (int i = 0; i <= d; ++i) sum += field.rotations()[v[i]];
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rot = svd.matrixU() * svd.matrixV().transpose();
    if (rot.determinant() < 0) rot.col(2) *= -1.0;
  }
  return metric_from_rotation(d, rho, rot);
}

// ---------------------------------------------------------------------------
// Point location

struct LocateResult {
  Index element = -1;
  Eigen::Vector4d weights = Eigen::Vector4d::Zero();  // barycentric, first d+1 used
};

namespace detail {

// Uniform grid over element bounding boxes; resolution targets ~2 elements per
// occupied cell so ring-0 lookups resolve interior queries.
class LocateIndex {
 public:
  explicit LocateIndex(const TriangulatedManifold& mesh) {
    const int A = mesh.ambient_dim();
    const Eigen::Index m = mesh.num_elements();
    lo_ = mesh.box_min();
    Eigen::Vector3d span = mesh.box_max() - lo_;
    const double target = std::max(1.0, std::pow(static_cast<double>(m) / 2.0, 1.0 / A));
    dims_.setOnes();
    for (int a = 0; a < A; ++a) {
      dims_[a] = span[a] > 0 ? std::clamp<std::int64_t>(static_cast<std::int64_t>(target), 1, 512) : 1;
      width_[a] = span[a] > 0 ? span[a] / dims_[a] : 1.0;
    }
    build(mesh);
  }

  // Elements whose bbox covers the cell containing p, expanded by `ring` cells.
  void candidates(const Eigen::Vector3d& p, int ring, std::vector<Index>& out) const {
    out.clear();
    std::array<std::int64_t, 3> c;
    for (int a = 0; a < 3; ++a) c[a] = clamp_cell(a, p[a]);
    std::array<std::int64_t, 3> a0, a1;
    for (int a = 0; a < 3; ++a) {
      a0[a] = std::max<std::int64_t>(0, c[a] - ring);
      a1[a] = std::min<std::int64_t>(dims_[a] - 1, c[a] + ring);
    }
    for (std::int64_t z = a0[2]; z <= a1[2]; ++z)
      for (std::int64_t y = a0[1]; y <= a1[1]; ++y)
        for (std::int64_t x = a0[0]; x <= a1[0]; ++x) {
          const std::size_t cell = static_cast<std::size_t>((z * dims_[1] + y) * dims_[0] + x);
          for (std::int64_t k = offsets_[cell]; k < offsets_[cell + 1]; ++k)
            out.push_back(entries_[static_cast<std::size_t>(k)]);
        }
    if (ring > 0) {  // cells overlap for ring > 0 queries; dedupe
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
  }

 private:
  std::int64_t clamp_cell(int axis, double x) const {
    const double t = (x - lo_[axis]) / width_[axis];
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(t)), 0, dims_[axis] - 1);
  }

  void build(const TriangulatedManifold& mesh) {
    const int d = mesh.intrinsic_dim();
    const Eigen::Index m = mesh.num_elements();
    const std::size_t ncells =
        static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
        static_cast<std::size_t>(dims_[2]);
    offsets_.assign(ncells + 1, 0);

    auto cell_range = [&](Index e, std::array<std::int64_t, 3>& c0, std::array<std::int64_t, 3>& c1) {
      Eigen::Vector3d bmin = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
      Eigen::Vector3d bmax = -bmin;
      const Index* v = mesh.element(e);
      for (int i = 0; i <= d; ++i) {
        const Eigen::Vector3d p = mesh.point(v[i]);
        bmin = bmin.cwiseMin(p);
        bmax = bmax.cwiseMax(p);
      }
      for (int a = 0; a < 3; ++a) {
        c0[a] = clamp_cell(a, bmin[a]);
        c1[a] = clamp_cell(a, bmax[a]);
      }
    };

    for (Index e = 0; e < m; ++e) {
      std::array<std::int64_t, 3> c0, c1;
      cell_range(e, c0, c1);
      for (std::int64_t z = c0[2]; z <= c1[2]; ++z)
        for (std::int64_t y = c0[1]; y <= c1[1]; ++y)
          for (std::int64_t x = c0[0]; x <= c1[0]; ++x)
            ++offsets_[static_cast<std::size_t>((z * dims_[1] + y) * dims_[0] + x) + 1];
    }
    for (std::size_t i = 0; i < ncells; ++i) offsets_[i + 1] += offsets_[i];
    entries_.resize(static_cast<std::size_t>(offsets_[ncells]));
    std::vector<std::int64_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (Index e = 0; e < m; ++e) {
      std::array<std::int64_t, 3> c0, c1;
      cell_range(e, c0, c1);
      for (std::int64_t z = c0[2]; z <= c1[2]; ++z)
        for (std::int64_t y = c0[1]; y <= c1[1]; ++y)
          for (std::int64_t x = c0[0]; x <= c1[0]; ++x)
            entries_[static_cast<std::size_t>(
                cursor[static_cast<std::size_t>((z * dims_[1] + y) * dims_[0] + x)]++)] = e;
    }
  }

  Eigen::Vector3d lo_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d width_ = Eigen::Vector3d::Ones();
  Eigen::Matrix<std::int64_t, 3, 1> dims_ = Eigen::Matrix<std::int64_t, 3, 1>::Ones();
  std::vector<std::int64_t> offsets_;
  std::vector<Index> entries_;
};

// Barycentric test of p against element e. Returns the worst constraint
// violation in length units (0 when p is inside) and fills weights.
inline double barycentric_defect(const TriangulatedManifold& mesh, const ElementChart& c,
                                 const Eigen::Vector3d& p, Eigen::Vector4d& w) {
  const int d = c.dim;
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
  double off = 0;
  if (mesh.is_surface()) {
    const Eigen::Vector3d v = p - c.origin;
    q[0] = c.frame.col(0).dot(v);
    q[1] = c.frame.col(1).dot(v);
    off = std::abs(c.frame.col(2).dot(v));
  } else {
    q = p;
  }
  w.setZero();
  double wsum = 0;
  for (int i = 1; i <= d; ++i) {
    w[i] = c.inv_edge.row(i - 1).head(3).dot((q - c.pts.col(0).head(3)));
    wsum += w[i];
  }
  w[0] = 1.0 - wsum;
  double scale = 0;
  for (int j = 1; j <= d; ++j) scale = std::max(scale, (c.pts.col(j) - c.pts.col(0)).norm());
  double defect = 0;
  for (int i = 0; i <= d; ++i) defect = std::max(defect, -w[i] * scale);
  return std::max(defect, off);
}

}  // namespace detail

// Locate `point` on the mesh: containing element plus barycentric weights.
// Points within snap_tol (default 1e-8 * diameter) of the mesh are snapped to
// the nearest candidate; anything farther is outside the domain.
inline std::optional<LocateResult> try_locate(const TriangulatedManifold& mesh,
                                              const Eigen::Vector3d& point,
                                              double snap_tol = -1.0) {
  if (snap_tol < 0) snap_tol = 1e-8 * std::max(mesh.diameter(), 1e-300);
  const auto& index = mesh.locate_index();

  Index best = -1;
  double best_defect = std::numeric_limits<double>::infinity();
  Eigen::Vector4d best_w = Eigen::Vector4d::Zero();
  std::vector<Index> cand;

  auto scan = [&](const std::vector<Index>& list) {
    for (Index e : list) {
      const ElementChart c = element_chart(mesh, e);
      Eigen::Vector4d w;
      const double defect = detail::barycentric_defect(mesh, c, point, w);
      if (defect < best_defect - 1e-300 || (defect == best_defect && e < best)) {
        best_defect = defect;
        best = e;
        best_w = w;
      }
      if (defect == 0.0) return true;
    }
    return false;
  };

  for (int ring = 0; ring <= 1; ++ring) {
    index.candidates(point, ring, cand);
    if (scan(cand) || best_defect <= snap_tol) break;
  }
  if (best_defect > snap_tol) {
    // Rare fallback: exhaustive scan (queries hugging the hash-cell seams).
    std::vector<Index> all(static_cast<std::size_t>(mesh.num_elements()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
    scan(all);
  }
  if (best < 0 || best_defect > snap_tol) return std::nullopt;

  LocateResult r;
  r.element = best;
  r.weights = best_w.cwiseMax(0.0);
  const double s = r.weights.sum();
  if (s > 0) r.weights /= s;
  return r;
}

inline LocateResult locate(const TriangulatedManifold& mesh, const Eigen::Vector3d& point,
                           double snap_tol = -1.0) {
  auto r = try_locate(mesh, point, snap_tol);
  if (!r)
    fail(errc::outside_domain,
         "point (" + format_double(point[0]) + ", " + format_double(point[1]) + ", " +
             format_double(point[2]) + ") is outside the domain");
  return *r;
}

// ---------------------------------------------------------------------------
// TriangulatedManifold implementation

struct TriangulatedManifold::Lazy {
  std::once_flag once;
  std::unique_ptr<detail::LocateIndex> index;
};

inline TriangulatedManifold::TriangulatedManifold(int ambient_dim, int intrinsic_dim,
                                                  Matrix vertices, std::vector<Index> simplices)
    : ambient_(ambient_dim),
      intrinsic_(intrinsic_dim),
      vertices_(std::move(vertices)),
      simplices_(std::move(simplices)),
      lazy_(std::make_unique<Lazy>()) {
  require(ambient_ == 2 || ambient_ == 3, errc::config, "ambient dimension must be 2 or 3");
  require(intrinsic_ == 2 || intrinsic_ == 3, errc::config, "intrinsic dimension must be 2 or 3");
  require(intrinsic_ <= ambient_, errc::config, "intrinsic dimension exceeds ambient dimension");
  require(vertices_.cols() == ambient_, errc::dimension_mismatch,
          "vertex table must have one column per ambient coordinate");
  require(vertices_.rows() > 0, errc::config, "mesh has no vertices");
  require(vertices_.allFinite(), errc::non_finite_entry, "vertex coordinates must be finite");
  const int k = intrinsic_ + 1;
  require(!simplices_.empty() && simplices_.size() % k == 0, errc::config,
          "simplex list must be a multiple of " + std::to_string(k));

  const Eigen::Index n = vertices_.rows();
  const Eigen::Index m = static_cast<Eigen::Index>(simplices_.size()) / k;
  for (std::size_t i = 0; i < simplices_.size(); ++i)
    require(simplices_[i] >= 0 && simplices_[i] < n, errc::index_out_of_range,
            "simplex " + std::to_string(i / k) + " references vertex " +
                std::to_string(simplices_[i]));

  box_min_.setZero();
  box_max_.setZero();
  for (int a = 0; a < ambient_; ++a) {
    box_min_[a] = vertices_.col(a).minCoeff();
    box_max_[a] = vertices_.col(a).maxCoeff();
  }
  diameter_ = (box_max_ - box_min_).norm();

  // Vertex -> element adjacency (counting sort).
  adj_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t i = 0; i < simplices_.size(); ++i) ++adj_offsets_[simplices_[i] + 1];
  for (Eigen::Index i = 0; i < n; ++i) adj_offsets_[i + 1] += adj_offsets_[i];
  adj_elements_.resize(simplices_.size());
  {
    std::vector<std::int64_t> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
    for (Eigen::Index e = 0; e < m; ++e)
      for (int i = 0; i < k; ++i)
        adj_elements_[static_cast<std::size_t>(cursor[element(static_cast<Index>(e))[i]]++)] =
            static_cast<Index>(e);
  }

  // Chart construction throws on degenerate simplices.
  for (Eigen::Index e = 0; e < m; ++e) element_chart(*this, static_cast<Index>(e));
}

inline TriangulatedManifold::~TriangulatedManifold() = default;

inline const detail::LocateIndex& TriangulatedManifold::locate_index() const {
  std::call_once(lazy_->once,
                 [this] { lazy_->index = std::make_unique<detail::LocateIndex>(*this); });
  return *lazy_->index;
}

// ---------------------------------------------------------------------------
// Constructors from files and structured grids

// ASCII OFF surface mesh (triangles only).
inline TriangulatedManifold load_mesh_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open '" + path + "'");
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto h = line.find('#');
      if (h != std::string::npos) line = line.substr(0, h);
      line = trim(line);
      if (!line.empty()) return true;
    }
    return false;
  };
  std::string line;
  if (!next_line(line) || line != "OFF") fail(errc::parse, path + ": missing OFF header");
  if (!next_line(line)) fail(errc::parse, path + ": missing count line");
  std::istringstream counts(line);
  long long nv = 0, nf = 0, ne = 0;
  if (!(counts >> nv >> nf)) fail(errc::parse, path + ": bad count line");
  counts >> ne;
  require(nv > 0 && nf > 0, errc::parse, path + ": empty mesh");

  Matrix verts(nv, 3);
  for (long long i = 0; i < nv; ++i) {
    if (!next_line(line)) fail(errc::parse, path + ": truncated vertex list");
    std::istringstream ls(line);
    if (!(ls >> verts(i, 0) >> verts(i, 1) >> verts(i, 2)))
      fail(errc::parse, path + ": bad vertex on line '" + line + "'");
  }
  std::vector<Index> tris;
  tris.reserve(static_cast<std::size_t>(nf) * 3);
  for (long long f = 0; f < nf; ++f) {
    if (!next_line(line)) fail(errc::parse, path + ": truncated face list");
    std::istringstream ls(line);
    long long k = 0;
    if (!(ls >> k)) fail(errc::parse, path + ": bad face on line '" + line + "'");
    require(k == 3, errc::parse, path + ": only triangular faces are supported");
    for (int i = 0; i < 3; ++i) {
      long long v = -1;
      if (!(ls >> v)) fail(errc::parse, path + ": bad face on line '" + line + "'");
      tris.push_back(static_cast<Index>(v));
    }
  }
  return TriangulatedManifold(3, 2, std::move(verts), std::move(tris));
}

// CSV pair: vertices (x,y[,z]) and simplices (v0,v1,v2[,v3], 0-based ids).
inline TriangulatedManifold load_mesh_csv(const std::string& vertices_path,
                                          const std::string& simplices_path) {
  const CsvTable vt = read_csv(vertices_path);
  const int ambient = static_cast<int>(vt.cols());
  require(ambient == 2 || ambient == 3, errc::parse,
          vertices_path + ": expected columns x,y or x,y,z");
  static const char* names[3] = {"x", "y", "z"};
  for (int a = 0; a < ambient; ++a)
    require(vt.column(names[a]) == a, errc::parse,
            vertices_path + ": header must be x,y" + std::string(ambient == 3 ? ",z" : ""));
  Matrix verts(static_cast<Eigen::Index>(vt.rows.size()), ambient);
  for (std::size_t i = 0; i < vt.rows.size(); ++i)
    for (int a = 0; a < ambient; ++a) verts(static_cast<Eigen::Index>(i), a) = vt.rows[i][a];

  std::ifstream in(simplices_path);
  if (!in) fail(errc::io, "cannot open '" + simplices_path + "'");
  std::string line;
  std::size_t lineno = 0;
  int k = 0;
  std::vector<Index> cells;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = simplices_path + ":" + std::to_string(lineno);
    auto fields = split_csv_line(line);
    if (!saw_header) {
      k = static_cast<int>(fields.size());
      require(k == 3 || k == 4, errc::parse, where + ": expected v0,v1,v2 or v0,v1,v2,v3");
      for (int i = 0; i < k; ++i)
        require(lower(trim(fields[i])) == "v" + std::to_string(i), errc::parse,
                where + ": header must be v0..v" + std::to_string(k - 1));
      saw_header = true;
      continue;
    }
    require(static_cast<int>(fields.size()) == k, errc::parse, where + ": ragged row");
    for (int i = 0; i < k; ++i) cells.push_back(static_cast<Index>(parse_int(fields[i], where)));
  }
  require(saw_header && !cells.empty(), errc::parse, simplices_path + ": no simplices");
  const int intrinsic = k - 1;
  return TriangulatedManifold(ambient, intrinsic, std::move(verts), std::move(cells));
}

// Structured grid on [0,L1] x ... Cells are split into 2 triangles (diagonal
// towards +x+y) or 6 tetrahedra (all sharing the main cube diagonal), which
// tile face-compatibly across cells.
inline TriangulatedManifold build_grid(int dim, const std::vector<Index>& cells_per_axis,
                                       const std::vector<double>& lengths,
                                       std::int64_t max_vertices = 1 << 27) {
  require(dim == 2 || dim == 3, errc::config, "grid dimension must be 2 or 3");
  require(static_cast<int>(cells_per_axis.size()) == dim &&
              static_cast<int>(lengths.size()) == dim,
          errc::config, "grid needs one cell count and one length per axis");
  std::int64_t nv = 1;
  for (int a = 0; a < dim; ++a) {
    require(cells_per_axis[a] >= 1, errc::config, "cell counts must be >= 1");
    require(lengths[a] > 0 && std::isfinite(lengths[a]), errc::config,
            "axis lengths must be positive");
    nv *= cells_per_axis[a] + 1;
    require(nv <= max_vertices, errc::overflow,
            "grid would exceed the vertex cap of " + std::to_string(max_vertices));
  }

  const std::int64_t nx = cells_per_axis[0] + 1;
  const std::int64_t ny = cells_per_axis[1] + 1;
  const std::int64_t nz = dim == 3 ? cells_per_axis[2] + 1 : 1;
  Matrix verts(nv, dim);
  for (std::int64_t k = 0; k < nz; ++k)
    for (std::int64_t j = 0; j < ny; ++j)
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::int64_t r = i + nx * (j + ny * k);
        verts(r, 0) = static_cast<double>(i) * lengths[0] / cells_per_axis[0];
        verts(r, 1) = static_cast<double>(j) * lengths[1] / cells_per_axis[1];
        if (dim == 3) verts(r, 2) = static_cast<double>(k) * lengths[2] / cells_per_axis[2];
      }

  std::vector<Index> cells;
  if (dim == 2) {
    cells.reserve(static_cast<std::size_t>(cells_per_axis[0]) * cells_per_axis[1] * 6);
    for (std::int64_t j = 0; j < cells_per_axis[1]; ++j)
      for (std::int64_t i = 0; i < cells_per_axis[0]; ++i) {
        const Index v00 = static_cast<Index>(i + nx * j);
        const Index v10 = static_cast<Index>(i + 1 + nx * j);
        const Index v01 = static_cast<Index>(i + nx * (j + 1));
        const Index v11 = static_cast<Index>(i + 1 + nx * (j + 1));
        cells.insert(cells.end(), {v00, v10, v11, v00, v11, v01});
      }
  } else {
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    cells.reserve(static_cast<std::size_t>(cells_per_axis[0]) * cells_per_axis[1] *
                  cells_per_axis[2] * 24);
    auto vid = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
      return static_cast<Index>(i + nx * (j + ny * k));
    };
    for (std::int64_t k = 0; k < cells_per_axis[2]; ++k)
      for (std::int64_t j = 0; j < cells_per_axis[1]; ++j)
        for (std::int64_t i = 0; i < cells_per_axis[0]; ++i)
          for (const auto& p : perms) {
            std::int64_t c[3] = {i, j, k};
            cells.push_back(vid(c[0], c[1], c[2]));
            for (int step = 0; step < 3; ++step) {
              ++c[p[step]];
              cells.push_back(vid(c[0], c[1], c[2]));
            }
          }
  }
  return TriangulatedManifold(dim, dim, std::move(verts), std::move(cells));
}

inline AnisotropyField AnisotropyField::from_csv(const std::string& path, int dim) {
  const CsvTable t = read_csv(path);
  require(dim == 2 || dim == 3, errc::config, "anisotropy dimension must be 2 or 3");
  require(!t.rows.empty(), errc::parse, path + ": no data rows");
  const Eigen::Index k = static_cast<Eigen::Index>(t.rows.size());
  Matrix ranges(k, dim);
  for (int a = 0; a < dim; ++a) {
    const int col = t.column("rho" + std::to_string(a + 1));
    require(col >= 0, errc::parse, path + ": missing column rho" + std::to_string(a + 1));
    for (Eigen::Index i = 0; i < k; ++i) ranges(i, a) = t.rows[i][col];
  }
  if (dim == 2) {
    const int col = t.column("theta");
    require(col >= 0, errc::parse, path + ": missing column theta");
    Vector angles(k);
    for (Eigen::Index i = 0; i < k; ++i) angles[i] = t.rows[i][col];
    return vertexwise2d(std::move(ranges), std::move(angles));
  }
  int rc[9];
  bool have_rot = true;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      rc[r * 3 + c] = t.column("r" + std::to_string(r + 1) + std::to_string(c + 1));
      if (rc[r * 3 + c] < 0) have_rot = false;
    }
  std::vector<Eigen::Matrix3d> rots(static_cast<std::size_t>(k), Eigen::Matrix3d::Identity());
  if (have_rot)
    for (Eigen::Index i = 0; i < k; ++i)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rots[i](r, c) = t.rows[i][rc[r * 3 + c]];
  return vertexwise3d(std::move(ranges), std::move(rots));
}

}  // namespace mgrf
