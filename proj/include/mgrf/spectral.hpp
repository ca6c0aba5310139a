#pragma once

// Spectral side of the model: polynomials acting on the scaled stiffness,
// Chebyshev approximation of scalar functions of that operator, and cheap
// guaranteed eigenvalue enclosures used to pick approximation intervals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mgrf/csv.hpp"
#include "mgrf/error.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

// Polynomial in ascending coefficient order: coeffs[k] multiplies x^k.
struct SpectralPolynomial {
  Vector coeffs;

  SpectralPolynomial() : coeffs(Vector::Zero(1)) {}
  explicit SpectralPolynomial(Vector c) : coeffs(std::move(c)) {
    require(coeffs.size() >= 1, errc::config, "polynomial needs at least one coefficient");
    require(coeffs.allFinite(), errc::non_finite_entry, "polynomial coefficients must be finite");
  }
  SpectralPolynomial(std::initializer_list<double> c)
      : SpectralPolynomial(Eigen::Map<const Vector>(c.begin(), static_cast<Eigen::Index>(c.size()))) {}

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  double operator()(double x) const {
    double y = coeffs[coeffs.size() - 1];
    for (Eigen::Index k = coeffs.size() - 2; k >= 0; --k) y = y * x + coeffs[k];
    return y;
  }
};

// P = P1(x)^2 + x * P2(x)^2 + eps, positive on [0, inf) whenever eps > 0 or
// the squares never vanish together. This is the optimizer's search space:
// any coefficient vector maps to a valid spectral density.
struct PositivePolynomialParam {
  Vector p1;
  Vector p2;
  double eps = 1e-3;
};

inline SpectralPolynomial expand_positive_poly(const PositivePolynomialParam& param) {
  require(param.p1.size() >= 1 && param.p2.size() >= 1, errc::config,
          "positive polynomial factors must be non-empty");
  require(param.p1.allFinite() && param.p2.allFinite() && std::isfinite(param.eps),
          errc::non_finite_entry, "positive polynomial parameters must be finite");
  require(param.eps >= 0, errc::config, "positive polynomial offset must be >= 0");
  const auto conv = [](const Vector& u, const Vector& v) {
    Vector w = Vector::Zero(u.size() + v.size() - 1);
    for (Eigen::Index i = 0; i < u.size(); ++i)
      for (Eigen::Index j = 0; j < v.size(); ++j) w[i + j] += u[i] * v[j];
    return w;
  };
  const Vector sq1 = conv(param.p1, param.p1);
  const Vector sq2 = conv(param.p2, param.p2);
  Vector out = Vector::Zero(std::max(sq1.size(), sq2.size() + 1));
  out.head(sq1.size()) += sq1;
  out.segment(1, sq2.size()) += sq2;
  out[0] += param.eps;
  return SpectralPolynomial(std::move(out));
}

struct PolyRange {
  double min = 0;
  double max = 0;
};

// Range of P over [lo, hi] sampled on a dense grid (endpoints included).
inline PolyRange poly_range(const SpectralPolynomial& P, double lo, double hi,
                            int grid_points = 10001) {
  PolyRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * i / (grid_points - 1);
    const double y = P(x);
    r.min = std::min(r.min, y);
    r.max = std::max(r.max, y);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Chebyshev approximation

struct ChebyshevApprox {
  double a = 0;
  double b = 1;
  Vector coeffs;  // c_0..c_K with the standard half applied to c_0 already
  double sup_error = 0;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  double eval(double x) const {  // Clenshaw
    const double t = (2.0 * x - (a + b)) / (b - a);
    double b1 = 0, b2 = 0;
    for (Eigen::Index k = coeffs.size() - 1; k >= 1; --k) {
      const double tmp = 2.0 * t * b1 - b2 + coeffs[k];
      b2 = b1;
      b1 = tmp;
    }
    return t * b1 - b2 + coeffs[0];
  }
};

enum class ErrorScan {
  grid,  // max |f - approx| over a 1e5-point grid: slower, trustworthy
  tail,  // sum of trailing coefficient magnitudes: cheap, used in inner loops
};

template <class F>
ChebyshevApprox chebyshev_fit(F&& f, double a, double b, int degree,
                              ErrorScan scan = ErrorScan::grid) {
  require(std::isfinite(a) && std::isfinite(b), errc::interval_too_small,
          "approximation interval must be finite");
  require(b - a > 1e-14 * std::max({1.0, std::abs(a), std::abs(b)}), errc::interval_too_small,
          "approximation interval [" + format_double(a) + ", " + format_double(b) +
              "] is degenerate");
  require(degree >= 0, errc::config, "Chebyshev degree must be >= 0");

  const int N = degree + 1;
  std::vector<double> theta(N), fx(N);
  for (int j = 0; j < N; ++j) {
    theta[j] = std::numbers::pi * (j + 0.5) / N;
    const double x = a + (b - a) * 0.5 * (std::cos(theta[j]) + 1.0);
    fx[j] = f(x);
    require(std::isfinite(fx[j]), errc::non_finite_target,
            "target function is not finite at x = " + format_double(x));
  }
  ChebyshevApprox out;
  out.a = a;
  out.b = b;
  out.coeffs = Vector::Zero(N);
  for (int k = 0; k < N; ++k) {
    double s = 0;
    for (int j = 0; j < N; ++j) s += fx[j] * std::cos(k * theta[j]);
    out.coeffs[k] = 2.0 * s / N;
  }
  out.coeffs[0] *= 0.5;

  if (scan == ErrorScan::grid) {
    const int G = 100001;
    double worst = 0;
    for (int i = 0; i < G; ++i) {
      const double x = a + (b - a) * i / (G - 1);
      const double y = f(x);
      require(std::isfinite(y), errc::non_finite_target,
              "target function is not finite at x = " + format_double(x));
      worst = std::max(worst, std::abs(y - out.eval(x)));
    }
    out.sup_error = worst;
  } else {
    const int tail = std::max(2, N / 8);
    out.sup_error = out.coeffs.tail(tail).cwiseAbs().sum();
  }
  return out;
}

// Doubles the degree until the trailing coefficients fall below tail_tol
// (relative to the largest coefficient), then reports the error in the
// requested mode. Smooth targets converge geometrically, so the doubling
// overshoots by at most 2x.
template <class F>
ChebyshevApprox chebyshev_fit_adaptive(F&& f, double a, double b, double tail_tol = 1e-8,
                                       int start_degree = 64, int max_degree = 1024,
                                       ErrorScan scan = ErrorScan::grid) {
  int degree = start_degree;
  for (;;) {
    ChebyshevApprox fit = chebyshev_fit(f, a, b, degree, ErrorScan::tail);
    const double scale = std::max(1.0, fit.coeffs.cwiseAbs().maxCoeff());
    const int tail = std::max(2, (degree + 1) / 8);
    const double tail_max = fit.coeffs.tail(tail).cwiseAbs().maxCoeff();
    if (tail_max <= tail_tol * scale || degree >= max_degree) {
      if (scan == ErrorScan::grid) return chebyshev_fit(f, a, b, degree, ErrorScan::grid);
      return fit;
    }
    degree = std::min(2 * degree, max_degree);
  }
}

// y = approx(Op) v through the three-term recurrence on the affinely mapped
// operator. Op is any callable Vector -> Vector; symmetric with spectrum
// inside [a, b] for the approximation to mean anything.
template <class Op>
Vector apply_chebyshev(Op&& op, const ChebyshevApprox& approx, const Vector& v) {
  const double shift = approx.a + approx.b;
  const double scale = approx.b - approx.a;
  auto mapped = [&](const Vector& w) -> Vector {
    Vector r = op(w);
    r = (2.0 * r - shift * w) / scale;
    return r;
  };
  const Eigen::Index K = approx.coeffs.size() - 1;
  Vector y = approx.coeffs[0] * v;
  if (K == 0) return y;
  Vector u_prev = v;
  Vector u_cur = mapped(v);
  y += approx.coeffs[1] * u_cur;
  Vector u_next;
  for (Eigen::Index k = 2; k <= K; ++k) {
    u_next = 2.0 * mapped(u_cur) - u_prev;
    y += approx.coeffs[k] * u_next;
    u_prev.swap(u_cur);
    u_cur.swap(u_next);
  }
  return y;
}

inline double eigen_upper_bound_S(const SparseMatrix& S);

inline Vector apply_chebyshev(const SparseMatrix& B, const ChebyshevApprox& approx,
                              const Vector& v) {
  require(B.rows() == B.cols() && B.cols() == v.size(), errc::dimension_mismatch,
          "operator/vector sizes differ");
  const double bound = eigen_upper_bound_S(B);
  require(approx.a <= 1e-12 * std::max(1.0, bound) && approx.b >= bound * (1.0 - 1e-12),
          errc::interval_too_small,
          "approximation interval [" + format_double(approx.a) + ", " +
              format_double(approx.b) + "] does not cover the spectrum bound " +
              format_double(bound));
  return apply_chebyshev([&](const Vector& w) -> Vector { return B * w; }, approx, v);
}

// ---------------------------------------------------------------------------
// Matrix-free model products

// alpha * D P(S) D v + M^T M v with D = diag(sqrt_mass); pass M = nullptr for
// the pure polynomial part. Horner on S: degree(P) products with S per call.
inline Vector apply_poly_shifted(const Vector& sqrt_mass, const SparseMatrix& S, double alpha,
                                 const SpectralPolynomial& P, const SparseMatrix* M,
                                 const Vector& v) {
  const Eigen::Index n = S.rows();
  require(S.cols() == n && sqrt_mass.size() == n && v.size() == n, errc::dimension_mismatch,
          "operator/vector sizes differ");
  if (M)
    require(M->cols() == n, errc::dimension_mismatch, "design matrix has wrong column count");

  const Eigen::Index K = P.coeffs.size() - 1;
  Vector w = sqrt_mass.cwiseProduct(v);
  Vector y = P.coeffs[K] * w;
  Vector t(n);
  for (Eigen::Index k = K - 1; k >= 0; --k) {
    t.noalias() = S * y;
    y = t + P.coeffs[k] * w;
  }
  Vector out = alpha * sqrt_mass.cwiseProduct(y);
  if (M && M->rows() > 0) out.noalias() += M->transpose() * (*M * v);
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue enclosures

struct EigenInterval {
  double lower = 0;
  double upper = 0;
};

// Upper bound for the largest eigenvalue of symmetric PSD S: the smaller of
// the Frobenius norm and the largest Gershgorin row bound.
inline double eigen_upper_bound_S(const SparseMatrix& S) {
  require(S.rows() == S.cols(), errc::dimension_mismatch, "S must be square");
  double frob2 = 0;
  const Eigen::Index n = S.rows();
  const Index* outer = S.outerIndexPtr();
  const Index* inner = S.innerIndexPtr();
  const double* vals = S.valuePtr();
  double gersh = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0;
    for (Index t = outer[i]; t < outer[i + 1]; ++t) {
      const double v = vals[t];
      frob2 += v * v;
      row += inner[t] == i ? v : std::abs(v);
    }
    gersh = std::max(gersh, row);
  }
  return std::min(std::sqrt(frob2), gersh);
}

// Enclosure of the spectrum of A = tau2 D P(S) D + M^T M given an upper bound
// on the spectrum of S. The design part only lifts the upper end (its smallest
// eigenvalue may be 0), bounded by the largest column sum of M (rows of M are
// convex weights).
inline EigenInterval eigen_interval_A(const SpectralPolynomial& P, double tau2,
                                      const Vector& sqrt_mass, const SparseMatrix* M,
                                      double lambda_max_S) {
  require(tau2 > 0 && std::isfinite(tau2), errc::config, "tau2 must be positive");
  const PolyRange pr = poly_range(P, 0.0, lambda_max_S);
  require(pr.min > 0, errc::non_positive_lower_bound,
          "spectral polynomial reaches " + format_double(pr.min) +
              " on [0, " + format_double(lambda_max_S) + "]");
  double min_m = std::numeric_limits<double>::infinity(), max_m = 0;
  for (Eigen::Index i = 0; i < sqrt_mass.size(); ++i) {
    const double m2 = sqrt_mass[i] * sqrt_mass[i];
    min_m = std::min(min_m, m2);
    max_m = std::max(max_m, m2);
  }
  double design = 0;
  if (M && M->rows() > 0) {
    Vector colsum = Vector::Zero(M->cols());
    const Index* outer = M->outerIndexPtr();
    const Index* inner = M->innerIndexPtr();
    const double* vals = M->valuePtr();
    for (Eigen::Index r = 0; r < M->rows(); ++r)
      for (Index t = outer[r]; t < outer[r + 1]; ++t) colsum[inner[t]] += std::abs(vals[t]);
    design = colsum.maxCoeff();
  }
  EigenInterval out;
  out.lower = tau2 * min_m * pr.min;
  out.upper = tau2 * max_m * pr.max + design;
  return out;
}

}  // namespace mgrf
