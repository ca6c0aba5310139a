#pragma once

// First-order FEM operators on a triangulated manifold, all with respect to
// the anisotropy-induced metric:
//   - lumped mass          m_i    = sum_e sqrt(det G_e) vol(e) / (d+1)
//   - stiffness            F_ij   = sum_e sqrt(det G_e) vol(e) grad_i . G_e^{-1} grad_j
//   - scaled stiffness     S      = D^{-1} F D^{-1},  D = diag(sqrt m_i)
//   - design matrices      M[k,i] = hat function i at location k
//
// Assembly is two-pass CSR (pattern from the vertex->element adjacency, then
// per-element accumulation into the fixed pattern). No triplet buffers: the
// largest single allocation stays at one CSR array even for million-vertex
// meshes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mgrf/error.hpp"
#include "mgrf/mesh.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

struct LumpedMass {
  Vector mass;       // (psi_i, 1) under the metric volume element
  Vector sqrt_mass;  // diagonal of C^{1/2}

  Eigen::Index size() const { return mass.size(); }
};

namespace detail {

inline MetricTensor element_metric(const TriangulatedManifold& mesh, const AnisotropyField* field,
                                   Index e) {
  if (!field) return MetricTensor{};
  return metric_at(*field, mesh, e);
}

}  // namespace detail

inline LumpedMass assemble_lumped_mass(const TriangulatedManifold& mesh,
                                       const AnisotropyField* field = nullptr) {
  const int d = mesh.intrinsic_dim();
  const Eigen::Index n = mesh.num_vertices();
  const Eigen::Index m = mesh.num_elements();
  LumpedMass out;
  out.mass = Vector::Zero(n);
  for (Index e = 0; e < m; ++e) {
    const ElementChart c = element_chart(mesh, e);
    const MetricTensor g = detail::element_metric(mesh, field, e);
    const double share = g.sqrt_det * c.volume / (d + 1);
    const Index* v = mesh.element(e);
    for (int i = 0; i <= d; ++i) out.mass[v[i]] += share;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    require(out.mass[i] > 0 && std::isfinite(out.mass[i]), errc::non_positive_mass,
            "vertex " + std::to_string(i) + " has lumped mass " + format_double(out.mass[i]));
  out.sqrt_mass = out.mass.cwiseSqrt();
  return out;
}

inline SparseMatrix assemble_stiffness(const TriangulatedManifold& mesh,
                                       const AnisotropyField* field = nullptr) {
  const int d = mesh.intrinsic_dim();
  const int k = d + 1;
  const Eigen::Index n = mesh.num_vertices();
  const Eigen::Index m = mesh.num_elements();
  const auto& adj_off = mesh.adjacency_offsets();
  const auto& adj_elt = mesh.adjacency_elements();

  // Pass 1: row patterns. A row's columns are the vertices sharing an element
  // with it (itself included).
  auto gather_row = [&](Eigen::Index i, std::vector<Index>& scratch) {
    scratch.clear();
    for (std::int64_t a = adj_off[i]; a < adj_off[i + 1]; ++a) {
      const Index* v = mesh.element(adj_elt[static_cast<std::size_t>(a)]);
      scratch.insert(scratch.end(), v, v + k);
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
  };

  std::vector<Index> scratch;
  std::vector<std::int64_t> row_start(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    gather_row(i, scratch);
    row_start[i + 1] = row_start[i] + static_cast<std::int64_t>(scratch.size());
  }
  const std::int64_t nnz = row_start[n];
  require(nnz <= std::numeric_limits<Index>::max(), errc::too_large,
          "stiffness pattern exceeds 32-bit index range");

  SparseMatrix F(n, n);
  F.makeCompressed();
  F.resizeNonZeros(nnz);
  Index* outer = F.outerIndexPtr();
  Index* inner = F.innerIndexPtr();
  double* vals = F.valuePtr();
  for (Eigen::Index i = 0; i <= n; ++i) outer[i] = static_cast<Index>(row_start[i]);
  for (Eigen::Index i = 0; i < n; ++i) {
    gather_row(i, scratch);
    std::copy(scratch.begin(), scratch.end(), inner + row_start[i]);
  }
  std::fill(vals, vals + nnz, 0.0);

  // Pass 2: accumulate element contributions into the fixed pattern.
  auto slot = [&](Index row, Index col) {
    const Index* lo = inner + outer[row];
    const Index* hi = inner + outer[row + 1];
    const Index* it = std::lower_bound(lo, hi, col);
    return vals + (it - inner);
  };

  for (Index e = 0; e < m; ++e) {
    const ElementChart c = element_chart(mesh, e);
    const MetricTensor g = detail::element_metric(mesh, field, e);
    const double w = g.sqrt_det * c.volume;
    const Index* v = mesh.element(e);
    Eigen::Matrix<double, 3, 4> flux = g.inv * c.grad;  // G^{-1} grad_j, columns
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        *slot(v[i], v[j]) += w * c.grad.col(i).dot(flux.col(j));
  }

  for (std::int64_t t = 0; t < nnz; ++t)
    require(std::isfinite(vals[t]), errc::non_finite_entry,
            "stiffness assembly produced a non-finite entry");
  return F;
}

// S = D^{-1} F D^{-1}. Consumes F to keep one CSR copy alive.
inline SparseMatrix assemble_scaled_stiffness(const LumpedMass& lumped, SparseMatrix F) {
  const Eigen::Index n = F.rows();
  require(lumped.size() == n && F.cols() == n, errc::dimension_mismatch,
          "lumped mass and stiffness sizes differ");
  const Index* outer = F.outerIndexPtr();
  const Index* inner = F.innerIndexPtr();
  double* vals = F.valuePtr();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double si = 1.0 / lumped.sqrt_mass[i];
    for (Index t = outer[i]; t < outer[i + 1]; ++t)
      vals[t] *= si / lumped.sqrt_mass[inner[t]];
  }
  return F;
}

// Rows evaluate a piecewise-linear field at the given locations (one row per
// location, d+1 barycentric weights each).
inline SparseMatrix assemble_design(const TriangulatedManifold& mesh, const Matrix& locations) {
  const int d = mesh.intrinsic_dim();
  const int k = d + 1;
  const Eigen::Index p = locations.rows();
  require(p == 0 || locations.cols() == mesh.ambient_dim(), errc::dimension_mismatch,
          "locations must have one column per ambient coordinate");

  SparseMatrix M(p, mesh.num_vertices());
  M.makeCompressed();
  M.resizeNonZeros(p * k);
  Index* outer = M.outerIndexPtr();
  Index* inner = M.innerIndexPtr();
  double* vals = M.valuePtr();
  for (Eigen::Index r = 0; r <= p; ++r) outer[r] = static_cast<Index>(r * k);

  std::array<std::pair<Index, double>, 4> entry;
  for (Eigen::Index r = 0; r < p; ++r) {
    Eigen::Vector3d pt = Eigen::Vector3d::Zero();
    for (int a = 0; a < mesh.ambient_dim(); ++a) pt[a] = locations(r, a);
    const auto loc = try_locate(mesh, pt);
    if (!loc)
      fail(errc::outside_domain, "location " + std::to_string(r) + " at (" +
                                     format_double(pt[0]) + ", " + format_double(pt[1]) + ", " +
                                     format_double(pt[2]) + ") is outside the domain");
    const Index* v = mesh.element(loc->element);
    for (int i = 0; i < k; ++i) entry[i] = {v[i], loc->weights[i]};
    std::sort(entry.begin(), entry.begin() + k);
    for (int i = 0; i < k; ++i) {
      inner[r * k + i] = entry[i].first;
      vals[r * k + i] = entry[i].second;
    }
  }
  return M;
}

// Everything the matrix-free model needs: sqrt-mass diagonal, scaled
// stiffness, and the observation / target design matrices. Immutable once
// built; all products are read-only.
struct OperatorBundle {
  LumpedMass mass;
  SparseMatrix S;
  SparseMatrix M_D;  // p x n, observations
  SparseMatrix M_T;  // q x n, prediction targets

  Eigen::Index n() const { return S.rows(); }
  Eigen::Index p() const { return M_D.rows(); }
  Eigen::Index q() const { return M_T.rows(); }
};

inline OperatorBundle make_bundle(const TriangulatedManifold& mesh,
                                  const AnisotropyField* field = nullptr,
                                  const Matrix* obs_locations = nullptr,
                                  const Matrix* target_locations = nullptr) {
  OperatorBundle b;
  b.mass = assemble_lumped_mass(mesh, field);
  b.S = assemble_scaled_stiffness(b.mass, assemble_stiffness(mesh, field));
  b.M_D = obs_locations ? assemble_design(mesh, *obs_locations)
                        : SparseMatrix(0, mesh.num_vertices());
  b.M_T = target_locations ? assemble_design(mesh, *target_locations)
                           : SparseMatrix(0, mesh.num_vertices());
  if (!obs_locations) b.M_D.makeCompressed();
  if (!target_locations) b.M_T.makeCompressed();
  return b;
}

}  // namespace mgrf
