#pragma once

// Matrix-free conjugate gradients. Dot products use fixed-shape pairwise
// summation so a solve is bit-reproducible for a given operator, independent
// of how the caller's matvec is parallelized internally.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mgrf/csv.hpp"
#include "mgrf/error.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

namespace detail {
inline double pairwise_dot_rec(const double* u, const double* v, Eigen::Index n) {
  if (n <= 64) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) s += u[i] * v[i];
    return s;
  }
  const Eigen::Index h = n / 2;
  return pairwise_dot_rec(u, v, h) + pairwise_dot_rec(u + h, v + h, n - h);
}
}  // namespace detail

inline double pairwise_dot(const Vector& u, const Vector& v) {
  require(u.size() == v.size(), errc::dimension_mismatch, "dot product sizes differ");
  return detail::pairwise_dot_rec(u.data(), v.data(), u.size());
}

struct CgOptions {
  double tol = 1e-8;                 // on ||r|| / ||b||
  Eigen::Index max_iterations = 0;   // 0: 10 sqrt(n) + 200
  // Optional preconditioner hook, applies an SPD approximation of A^{-1}.
  // Ships unset: the model operators are well enough conditioned after the
  // sqrt-mass scaling that plain CG is the documented configuration.
  std::function<Vector(const Vector&)> preconditioner;
  std::vector<double>* residual_history = nullptr;  // relative residuals per iteration
};

struct SolveReport {
  bool converged = false;
  Eigen::Index iterations = 0;
  double relative_residual = 0;
};

template <class Op>
std::pair<Vector, SolveReport> conjugate_gradient(Op&& apply, const Vector& b,
                                                  const CgOptions& opt = {}) {
  const Eigen::Index n = b.size();
  require(b.allFinite(), errc::non_finite_entry, "right-hand side must be finite");
  require(opt.tol > 0, errc::config, "CG tolerance must be positive");
  const Eigen::Index max_it =
      opt.max_iterations > 0
          ? opt.max_iterations
          : static_cast<Eigen::Index>(10.0 * std::sqrt(static_cast<double>(n))) + 200;

  Vector x = Vector::Zero(n);
  SolveReport rep;
  const double bnorm = std::sqrt(pairwise_dot(b, b));
  if (bnorm == 0) {
    rep.converged = true;
    return {std::move(x), rep};
  }

  Vector r = b;
  Vector z = opt.preconditioner ? opt.preconditioner(r) : r;
  Vector p = z;
  double rz = pairwise_dot(r, z);
  for (Eigen::Index it = 1; it <= max_it; ++it) {
    const Vector Ap = apply(p);
    require(Ap.size() == n, errc::dimension_mismatch, "operator changed vector size");
    const double pAp = pairwise_dot(p, Ap);
    if (!(pAp > 0) || !std::isfinite(pAp))
      fail(errc::breakdown, "CG direction with non-positive curvature at iteration " +
                                std::to_string(it) + " (p^T A p = " + format_double(pAp) + ")");
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rnorm = std::sqrt(pairwise_dot(r, r));
    rep.iterations = it;
    rep.relative_residual = rnorm / bnorm;
    if (opt.residual_history) opt.residual_history->push_back(rep.relative_residual);
    if (rep.relative_residual <= opt.tol) {
      rep.converged = true;
      break;
    }
    z = opt.preconditioner ? opt.preconditioner(r) : r;
    const double rz_next = pairwise_dot(r, z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  return {std::move(x), rep};
}

inline std::pair<Vector, SolveReport> conjugate_gradient(const SparseMatrix& A, const Vector& b,
                                                         const CgOptions& opt = {}) {
  require(A.rows() == A.cols() && A.cols() == b.size(), errc::dimension_mismatch,
          "system dimensions differ");
  return conjugate_gradient([&](const Vector& v) -> Vector { return A * v; }, b, opt);
}

}  // namespace mgrf
