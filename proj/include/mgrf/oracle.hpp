#pragma once

// Dense brute-force references and closed-form curves. Everything here is
// deliberately the *slow obvious* computation: eigendecompositions, full
// matrix algebra, quadrature. Production code never calls these; tests and
// small-instance validation do.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mgrf/error.hpp"
#include "mgrf/fem.hpp"
#include "mgrf/model.hpp"
#include "mgrf/solver.hpp"
#include "mgrf/spectral.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

struct DenseModelMatrices {
  Matrix sigma;    // covariance of the weights
  Matrix q;        // precision of the weights
  Vector eigvals;  // eigenvalues of S, ascending
  Matrix eigvecs;
};

namespace detail {
inline void check_dense_cap(Eigen::Index n, Eigen::Index cap) {
  require(n <= cap, errc::too_large,
          "dense oracle limited to " + std::to_string(cap) + " vertices, got " +
              std::to_string(n));
}
}  // namespace detail

// Sigma = D^{-1} f(S) D^{-1} and Q = D (1/f)(S) D by full eigendecomposition.
inline DenseModelMatrices dense_matrices(const OperatorBundle& bundle,
                                         const std::function<double(double)>& f,
                                         Eigen::Index cap = 2000) {
  const Eigen::Index n = bundle.n();
  detail::check_dense_cap(n, cap);
  DenseModelMatrices out;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(bundle.S));
  require(eig.info() == Eigen::Success, errc::solver, "dense eigendecomposition failed");
  out.eigvals = eig.eigenvalues();
  out.eigvecs = eig.eigenvectors();

  Vector fv(n), finv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = f(out.eigvals[i]);
    require(std::isfinite(y), errc::non_finite_target,
            "spectral density not finite at eigenvalue " + format_double(out.eigvals[i]));
    require(y > 0, errc::non_positive_lower_bound,
            "spectral density not positive at eigenvalue " + format_double(out.eigvals[i]));
    fv[i] = y;
    finv[i] = 1.0 / y;
  }
  const Vector dinv = bundle.mass.sqrt_mass.cwiseInverse();
  out.sigma = dinv.asDiagonal() * (out.eigvecs * fv.asDiagonal() * out.eigvecs.transpose()) *
              dinv.asDiagonal();
  out.q = bundle.mass.sqrt_mass.asDiagonal() *
          (out.eigvecs * finv.asDiagonal() * out.eigvecs.transpose()) *
          bundle.mass.sqrt_mass.asDiagonal();
  return out;
}

struct DenseConditional {
  Vector mean;
  Matrix cov;
  // Largest relative discrepancy between the two closed forms of each moment
  // (precision route vs covariance route); both are computed and must agree.
  double mean_form_gap = 0;
  double cov_form_gap = 0;
};

inline DenseConditional dense_conditional(const OperatorBundle& bundle, const SpectralModel& model,
                                          const Vector& Y, Eigen::Index cap = 2000) {
  const Eigen::Index n = bundle.n();
  const Eigen::Index p = bundle.p();
  detail::check_dense_cap(n, cap);
  require(Y.size() == p, errc::dimension_mismatch, "observation vector length differs from p");
  const DenseModelMatrices dm =
      dense_matrices(bundle, [&](double lam) { return 1.0 / model.P(lam); }, cap);
  const Matrix Md = Matrix(bundle.M_D);

  // Precision route: A = tau2 Q + M^T M.
  const Matrix A = model.tau2 * dm.q + Md.transpose() * Md;
  const Eigen::LDLT<Matrix> A_ldlt(A);
  require(A_ldlt.info() == Eigen::Success, errc::solver, "dense A factorization failed");
  DenseConditional out;
  out.mean = A_ldlt.solve(Md.transpose() * Y);
  out.cov = model.tau2 * A_ldlt.solve(Matrix::Identity(n, n));

  // Covariance route: gain K = Sigma M^T (M Sigma M^T + tau2 I)^{-1}.
  Vector mean2;
  Matrix cov2;
  if (p > 0) {
    const Matrix SigY =
        Md * dm.sigma * Md.transpose() + model.tau2 * Matrix::Identity(p, p);
    const Eigen::LLT<Matrix> SigY_llt(SigY);
    require(SigY_llt.info() == Eigen::Success, errc::solver,
            "dense observation covariance not positive definite");
    const Matrix K = SigY_llt.solve(Md * dm.sigma).transpose();
    mean2 = K * Y;
    cov2 = dm.sigma - K * Md * dm.sigma;
  } else {
    mean2 = Vector::Zero(n);
    cov2 = dm.sigma;
  }
  out.mean_form_gap = (out.mean - mean2).norm() / std::max(1.0, out.mean.norm());
  out.cov_form_gap = (out.cov - cov2).norm() / std::max(1.0, out.cov.norm());
  return out;
}

// log det of the precision of Y (= -log det of its covariance M Sigma M^T + tau2 I).
inline double dense_logdet_QY(const OperatorBundle& bundle, const SpectralModel& model,
                              Eigen::Index cap = 2000) {
  const Eigen::Index p = bundle.p();
  detail::check_dense_cap(bundle.n(), cap);
  if (p == 0) return 0.0;
  const DenseModelMatrices dm =
      dense_matrices(bundle, [&](double lam) { return 1.0 / model.P(lam); }, cap);
  const Matrix Md = Matrix(bundle.M_D);
  const Matrix SigY = Md * dm.sigma * Md.transpose() + model.tau2 * Matrix::Identity(p, p);
  const Eigen::LLT<Matrix> llt(SigY);
  require(llt.info() == Eigen::Success, errc::solver,
          "dense observation covariance not positive definite");
  double logdet = 0;
  for (Eigen::Index i = 0; i < p; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -2.0 * logdet;
}

// One covariance column without densifying anything: Sigma e_j by a nested
// exact CG solve with P(S). Independent of the Chebyshev sampling path, so it
// doubles as an oracle at sizes where eigendecomposition is impractical.
inline Vector sigma_column_cg(const OperatorBundle& bundle, const SpectralModel& model, Index j,
                              double tol = 1e-12) {
  const Eigen::Index n = bundle.n();
  require(j >= 0 && j < n, errc::index_out_of_range, "column index out of range");
  Vector rhs = Vector::Zero(n);
  rhs[j] = 1.0 / bundle.mass.sqrt_mass[j];
  const Vector ones = Vector::Ones(n);
  CgOptions opt;
  opt.tol = tol;
  opt.max_iterations = 20000;
  auto [u, rep] = conjugate_gradient(
      [&](const Vector& v) {
        return apply_poly_shifted(ones, bundle.S, 1.0, model.P, nullptr, v);
      },
      rhs, opt);
  require(rep.converged, errc::solver, "covariance-column solve did not converge");
  return u.cwiseQuotient(bundle.mass.sqrt_mass);
}

// ---------------------------------------------------------------------------
// Closed-form and transform-based covariance curves

// Whittle-Matern covariance with smoothness nu and scale kappa.
inline double matern_covariance(double h, double kappa, double nu, double sigma2) {
  require(h >= 0, errc::config, "lag must be non-negative");
  require(kappa > 0 && nu > 0 && sigma2 >= 0, errc::config,
          "kappa and nu must be positive");
  if (h == 0) return sigma2;
  const double u = kappa * h;
  return sigma2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(u, nu) *
         std::cyl_bessel_k(nu, u);
}

struct CovarianceCurve {
  Vector lags;    // increasing, starts at 0
  Vector values;  // covariance at each lag
  bool alias_warning = false;  // density had not decayed at the frequency cutoff
  double sill() const { return values[0]; }
  CovarianceCurve normalized() const {
    CovarianceCurve c = *this;
    require(c.values[0] > 0, errc::non_positive_lower_bound, "curve sill must be positive");
    c.values /= c.values[0];
    return c;
  }
};

// Radial covariance curve of the continuous model with density 1/P(|w|^2):
//   C(x) = (2pi)^-d Integral 1/P(|w|^2) exp(i w.x) dw.
// d=2: the profile along an axis of the d-dimensional transform; summing the
// grid density over the off-axis frequency first reduces it to one 1D DFT with
// identical arithmetic. d=3: radial quadrature of the equivalent 1D form
//   C(r) = (2pi^2)^-1 Integral_0^inf rho^2 / P(rho^2) * sinc(rho r) drho.
inline CovarianceCurve covariance_curve_fft(const SpectralPolynomial& P, int dim,
                                            int grid = 1024) {
  require(dim == 2 || dim == 3, errc::config, "curve dimension must be 2 or 3");
  require(grid >= 64 && grid <= (1 << 16), errc::config, "frequency grid size out of range");
  const double f0 = 1.0 / P(0.0);
  require(std::isfinite(f0) && f0 > 0, errc::non_positive_lower_bound,
          "spectral density must be positive at zero frequency");

  const auto density = [&](double rho) {
    const double fr = 1.0 / P(rho * rho);
    require(std::isfinite(fr) && fr >= 0, errc::non_positive_lower_bound,
            "spectral density negative inside the grid");
    return fr;
  };

  // Frequency cutoff: double until the density has decayed six orders, or give
  // up and flag aliasing (e.g. degree-0 P, a white-noise-like model).
  double omega = 1.0;
  bool decayed = false;
  int doublings = 0;
  for (; doublings < 40; ++doublings) {
    if (density(omega) <= 1e-6 * f0) {
      decayed = true;
      break;
    }
    omega *= 2.0;
  }
  CovarianceCurve out;
  out.alias_warning = !decayed;

  const int N = grid;
  const int half = N / 2;
  if (dim == 2) {
    const double dw = 2.0 * omega / N;
    // Marginal over the second frequency axis, standard DFT ordering.
    std::vector<std::complex<double>> h(N);
    for (int k = 0; k < N; ++k) {
      const double wx = (k < half ? k : k - N) * dw;
      double s = 0;
      for (int l = 0; l < N; ++l) {
        const double wy = (l < half ? l : l - N) * dw;
        s += 1.0 / P(wx * wx + wy * wy);
      }
      h[k] = s * dw;
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> H(N);
    fft.fwd(H, h);  // even in k, so the forward transform is real and equals the inverse
    const double dx = 2.0 * std::numbers::pi / (N * dw);
    out.lags = Vector(half);
    out.values = Vector(half);
    for (int m = 0; m < half; ++m) {
      out.lags[m] = m * dx;
      out.values[m] = H[m].real() * dw / (4.0 * std::numbers::pi * std::numbers::pi);
    }
  } else {
    // Radially: r C(r) is the sine transform of rho f(rho^2) / (2 pi^2). The
    // DFT evaluates the sine kernel exactly, so accuracy only needs the smooth
    // radial density resolved. The sill integrand carries an extra rho, so
    // extend the cutoff until rho^2 f has also decayed; lag spacing stays tied
    // to the plain cutoff so the output axis matches the d = 2 convention.
    double g_peak = 0;
    double omega_int = omega;
    int extra = doublings;
    for (; extra < 40; ++extra) {
      constexpr int scan = 64;
      for (int i = 1; i <= scan; ++i) {
        const double rho = omega_int * i / scan;
        g_peak = std::max(g_peak, rho * rho * density(rho));
      }
      if (extra > doublings && omega_int * omega_int * density(omega_int) <= 1e-6 * g_peak)
        break;
      omega_int *= 2.0;
    }
    if (extra == 40) out.alias_warning = true;

    // stride = omega_int / (2 omega), capped so the transform stays small;
    // the cap only binds for densities whose tail never decays, and those are
    // flagged. Rebuilding omega_int from the capped stride keeps the grid
    // spacing and the cutoff consistent.
    const int need = std::max(0, extra - doublings - 1);
    const int shift =
        std::min({need, 12, 22 - static_cast<int>(std::bit_width(static_cast<unsigned>(N)))});
    if (shift < need) out.alias_warning = true;
    const int stride = 1 << shift;
    const int Nq = stride * N;
    omega_int = omega * 2.0 * stride;
    const double drho = omega_int / Nq;
    std::vector<double> u(Nq);
    for (int q = 0; q < Nq; ++q) {
      const double rho = q * drho;
      u[q] = rho * density(rho);
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> U(Nq);
    fft.fwd(U, std::vector<std::complex<double>>(u.begin(), u.end()));

    const double dx = 2.0 * std::numbers::pi / omega_int;  // = pi/omega per output step
    const double scale = drho / (2.0 * std::numbers::pi * std::numbers::pi);
    out.lags = Vector(half);
    out.values = Vector(half);
    double sill = 0;
    for (int q = 1; q < Nq; ++q) sill += (q * drho) * u[q];
    out.lags[0] = 0;
    out.values[0] = sill * scale;
    for (int m = 1; m < half; ++m) {
      const double r = m * stride * dx;
      out.lags[m] = r;
      out.values[m] = -U[static_cast<size_t>(m) * stride].imag() * scale / r;
    }
  }
  require(out.values.allFinite(), errc::non_finite_entry, "curve evaluation overflowed");
  return out;
}

}  // namespace mgrf
