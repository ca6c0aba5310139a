#pragma once

// Likelihood machinery: stochastic log-determinants (Hutchinson probes over
// Chebyshev approximations of log targets), the observation quadratic form,
// and derivative-free maximum-likelihood fitting with optional covariates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgrf/error.hpp"
#include "mgrf/fem.hpp"
#include "mgrf/fieldops.hpp"
#include "mgrf/model.hpp"
#include "mgrf/rng.hpp"
#include "mgrf/solver.hpp"
#include "mgrf/spectral.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

enum class ProbeKind { rademacher, gaussian };

struct TraceEstimate {
  double value = 0;
  double std_error = 0;  // 0 when only one probe was drawn
  int probes = 0;
};

namespace detail {
inline bool point_interval(double a, double b) {
  return b - a <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace detail

// Monte-Carlo trace of g(B) for a symmetric operator with spectrum inside
// [a, b]: fit g by a Chebyshev polynomial, then average probe quadratic forms
// v' g(B) v. A zero-width interval means B is a multiple of the identity, so
// the trace is returned exactly and no probes are consumed.
template <class Op>
TraceEstimate hutchinson_trace(Op&& apply, Eigen::Index n,
                               const std::function<double(double)>& g, double a, double b,
                               int degree, int probes, ProbeKind kind, Rng& rng) {
  require(probes >= 1, errc::config, "need at least one probe");
  TraceEstimate out;
  out.probes = probes;
  if (detail::point_interval(a, b)) {
    out.value = static_cast<double>(n) * g(0.5 * (a + b));
    return out;
  }
  const ChebyshevApprox fit = chebyshev_fit(g, a, b, degree, ErrorScan::tail);
  double sum = 0, sumsq = 0;
  for (int i = 0; i < probes; ++i) {
    const Vector v =
        kind == ProbeKind::rademacher ? rng.sign_vector(n) : rng.normal_vector(n);
    const double q = pairwise_dot(v, apply_chebyshev(apply, fit, v));
    sum += q;
    sumsq += q * q;
  }
  out.value = sum / probes;
  if (probes > 1)
    out.std_error =
        std::sqrt(std::max(0.0, (sumsq - sum * sum / probes) / (probes - 1.0)) / probes);
  return out;
}

struct LogDetEstimate {
  double value = 0;
  int probes = 0;
  std::uint64_t probe_seed = 0;
};

struct LogDetOptions {
  int degree = 256;                         // Chebyshev degree of both log targets
  ProbeKind kind = ProbeKind::rademacher;
  double lambda_max_S = 0;                  // > 0: caller-supplied bound, skips recomputation
};

// log det of the precision of Y, decomposed as
//   Tr log P(S) - Tr log A + (n - p) log tau2 + 2 sum_i log D_ii,
// with the two traces estimated on shared probe vectors.
inline LogDetEstimate logdet_QY(const OperatorBundle& bundle, const SpectralModel& model,
                                int probes, std::uint64_t seed,
                                const LogDetOptions& opt = {}) {
  model.validate();
  const Eigen::Index n = bundle.n();
  const Eigen::Index p = bundle.p();
  const double lam =
      opt.lambda_max_S > 0 ? opt.lambda_max_S : eigen_upper_bound_S(bundle.S);
  const PolyRange pr = poly_range(model.P, 0.0, lam);
  require(pr.min > 0, errc::non_positive_lower_bound,
          "spectral polynomial must stay positive on the operator interval");
  const EigenInterval ia =
      eigen_interval_A(model.P, model.tau2, bundle.mass.sqrt_mass, &bundle.M_D, lam);

  Rng rng(substream(seed, stream::probes));
  const auto logP = [&](double x) { return std::log(model.P(x)); };
  const auto logf = [](double x) { return std::log(x); };

  // shared probes: draw each vector once and feed it to both traces
  LogDetEstimate out;
  out.probes = probes;
  out.probe_seed = seed;
  require(probes >= 1, errc::config, "need at least one probe");
  const bool s_point = detail::point_interval(0.0, lam);
  const bool a_point = detail::point_interval(ia.lower, ia.upper);
  ChebyshevApprox fit_s, fit_a;
  if (!s_point) fit_s = chebyshev_fit(logP, 0.0, lam, opt.degree, ErrorScan::tail);
  if (!a_point) fit_a = chebyshev_fit(logf, ia.lower, ia.upper, opt.degree, ErrorScan::tail);
  double q1 = 0, q2 = 0;
  for (int i = 0; i < probes; ++i) {
    const Vector v =
        opt.kind == ProbeKind::rademacher ? rng.sign_vector(n) : rng.normal_vector(n);
    if (s_point)
      q1 += static_cast<double>(n) * logP(0.5 * lam);
    else
      q1 += pairwise_dot(
          v, apply_chebyshev([&](const Vector& u) { return Vector(bundle.S * u); }, fit_s, v));
    if (a_point)
      q2 += static_cast<double>(n) * logf(0.5 * (ia.lower + ia.upper));
    else
      q2 += pairwise_dot(v, apply_chebyshev(
                                [&](const Vector& u) {
                                  return apply_poly_shifted(bundle.mass.sqrt_mass, bundle.S,
                                                            model.tau2, model.P, &bundle.M_D, u);
                                },
                                fit_a, v));
  }
  double logdet = (q1 - q2) / probes;
  logdet += static_cast<double>(n - p) * std::log(model.tau2);
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(bundle.mass.sqrt_mass[i]);
  require(std::isfinite(logdet), errc::non_finite_entry, "log-determinant estimate overflowed");
  out.value = logdet;
  return out;
}

// Y' Q_Y Y = (Y'Y - Y' M_D A^{-1} M_D' Y) / tau2, via one kriging solve.
inline double quadratic_form(const OperatorBundle& bundle, const SpectralModel& model,
                             const Vector& Y, const CgOptions& opt = {}) {
  model.validate();
  require(Y.size() == bundle.p(), errc::dimension_mismatch,
          "observation vector length differs from the design row count");
  if (Y.size() == 0) return 0.0;
  const Vector x = conditional_mean(bundle, model, Y, opt);
  const double yy = pairwise_dot(Y, Y);
  const double fitted = pairwise_dot(Vector(bundle.M_D.transpose() * Y), x);
  const double value = (yy - fitted) / model.tau2;
  require(value > -1e-6 * std::max(1.0, yy / model.tau2), errc::solver,
          "quadratic form came out negative: " + format_double(value));
  return std::max(0.0, value);
}

// Gaussian log-likelihood of the observations. With the probe seed fixed this
// is a deterministic function of the model.
inline double log_likelihood(const OperatorBundle& bundle, const SpectralModel& model,
                             const Vector& Y, int probes, std::uint64_t seed,
                             const LogDetOptions& ld_opt = {}, const CgOptions& cg_opt = {}) {
  const double p = static_cast<double>(bundle.p());
  const double logdet = logdet_QY(bundle, model, probes, seed, ld_opt).value;
  const double quad = quadratic_form(bundle, model, Y, cg_opt);
  return -0.5 * (p * std::log(2.0 * std::numbers::pi) - logdet + quad);
}

// Generalized least squares for covariate coefficients: solves
// (X' Q_Y X) beta = X' Q_Y Ytilde with k + 1 applications of Q_Y, each one an
// inner kriging solve.
inline Vector fit_regression(const OperatorBundle& bundle, const SpectralModel& model,
                             const Matrix& X, const Vector& Ytilde,
                             const CgOptions& opt = {}) {
  model.validate();
  const Eigen::Index p = bundle.p();
  const Eigen::Index k = X.cols();
  require(X.rows() == p && Ytilde.size() == p, errc::dimension_mismatch,
          "covariates and data must have one row per observation");
  require(k >= 1, errc::config, "need at least one covariate column");
  require(Eigen::ColPivHouseholderQR<Matrix>(X).rank() == k, errc::rank_deficient,
          "covariate matrix does not have full column rank");

  const auto apply_QY = [&](const Vector& v) -> Vector {
    const Vector x = conditional_mean(bundle, model, v, opt);
    return (v - bundle.M_D * x) / model.tau2;
  };
  Matrix QX(p, k);
  for (Eigen::Index j = 0; j < k; ++j) QX.col(j) = apply_QY(X.col(j));
  const Vector Qy = apply_QY(Ytilde);
  const Matrix G = X.transpose() * QX;
  const Vector rhs = X.transpose() * Qy;
  Eigen::FullPivLU<Matrix> lu(G);
  require(lu.rank() == k, errc::rank_deficient, "normal equations are singular");
  return lu.solve(rhs);
}

// ---------------------------------------------------------------------------
// Maximum likelihood fitting

struct ThetaVector {
  Vector p1;
  Vector p2;
  double log_tau2 = 0;
};

namespace detail {

inline Vector flatten_theta(const ThetaVector& t) {
  Vector x(t.p1.size() + t.p2.size() + 1);
  x << t.p1, t.p2, t.log_tau2;
  return x;
}

inline ThetaVector unflatten_theta(const Vector& x, Eigen::Index n1, Eigen::Index n2) {
  ThetaVector t;
  t.p1 = x.head(n1);
  t.p2 = x.segment(n1, n2);
  t.log_tau2 = x[n1 + n2];
  return t;
}

}  // namespace detail

struct NelderMeadResult {
  Vector x;
  double value = 0;
  int evaluations = 0;
};

// Downhill simplex minimizer with the standard reflection/expansion/
// contraction/shrink coefficients (1, 2, 1/2, 1/2). Infinite objective values
// are legal and simply rank worst, so the simplex backs away from invalid
// regions of the parameter space.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Vector& x0, double step, int max_iter,
                             double ftol = 1e-8) {
  const Eigen::Index dim = x0.size();
  require(dim >= 1, errc::config, "optimizer needs at least one dimension");
  std::vector<std::pair<double, Vector>> simplex;
  simplex.reserve(dim + 1);
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  simplex.emplace_back(eval(x0), x0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    Vector xi = x0;
    xi[i] += step;
    simplex.emplace_back(eval(xi), xi);
  }
  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::sort(simplex.begin(), simplex.end(), by_value);

  for (int it = 0; it < max_iter; ++it) {
    const double fbest = simplex.front().first;
    const double fworst = simplex.back().first;
    if (std::isfinite(fbest) && fworst - fbest <= ftol * (1.0 + std::abs(fbest))) break;

    Vector centroid = Vector::Zero(dim);
    for (Eigen::Index i = 0; i < dim; ++i) centroid += simplex[i].second;
    centroid /= static_cast<double>(dim);

    const Vector& worst = simplex.back().second;
    const Vector reflected = centroid + (centroid - worst);
    const double fr = eval(reflected);
    if (fr < fbest) {
      const Vector expanded = centroid + 2.0 * (centroid - worst);
      const double fe = eval(expanded);
      simplex.back() = fe < fr ? std::make_pair(fe, expanded) : std::make_pair(fr, reflected);
    } else if (fr < simplex[dim - 1].first) {
      simplex.back() = {fr, reflected};
    } else {
      const Vector contracted = centroid + 0.5 * ((fr < fworst ? reflected : worst) - centroid);
      const double fc = eval(contracted);
      if (fc < std::min(fr, fworst)) {
        simplex.back() = {fc, contracted};
      } else {
        const Vector anchor = simplex.front().second;
        for (Eigen::Index i = 1; i <= dim; ++i) {
          simplex[i].second = anchor + 0.5 * (simplex[i].second - anchor);
          simplex[i].first = eval(simplex[i].second);
        }
      }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
  }
  return {simplex.front().second, simplex.front().first, evals};
}

struct FitOptions {
  int degree_p1 = 1;  // polynomial degree of the first positive factor
  int degree_p2 = 1;  // and of the x-weighted factor
  int restarts = 8;
  int probes_phase1 = 1;
  int probes_phase2 = 10;
  int logdet_degree = 256;
  ProbeKind kind = ProbeKind::rademacher;
  std::uint64_t seed = 1;
  int max_iterations = 400;  // simplex iterations per phase per restart
  double ftol = 1e-7;
  double step = 0.25;      // initial simplex spread
  double eps = 1e-3;       // positivity floor added to P
  double restart_spread = 0.5;
  CgOptions cg;
  const Matrix* covariates = nullptr;  // p x k, optional
  std::optional<ThetaVector> start;    // defaults to the near-flat guess
};

struct FitReport {
  ThetaVector theta_hat;
  double loglik = 0;
  int restarts = 0;
  std::vector<std::pair<Vector, double>> trace;  // (flattened theta, loglik) milestones
  std::optional<Vector> beta_hat;
};

// Two-phase simplex search: every restart runs a cheap one-probe phase, then
// the overall winner is polished with more probes. Probe vectors are fixed
// within each phase so the objective is deterministic in theta.
inline FitReport fit_mle(const OperatorBundle& bundle, const Vector& Y,
                         const FitOptions& opt = {}) {
  require(opt.restarts >= 1, errc::all_restarts_failed, "no restarts configured");
  require(Y.size() == bundle.p(), errc::dimension_mismatch,
          "observation vector length differs from the design row count");
  require(opt.probes_phase1 >= 1 && opt.probes_phase2 >= 1, errc::config,
          "probe counts must be positive");
  const Eigen::Index n1 = opt.degree_p1 + 1;
  const Eigen::Index n2 = opt.degree_p2 + 1;

  LogDetOptions ld;
  ld.degree = opt.logdet_degree;
  ld.kind = opt.kind;
  ld.lambda_max_S = eigen_upper_bound_S(bundle.S);  // bundle is fixed across the fit

  const std::uint64_t probe_seed1 = substream(opt.seed, stream::probes);
  const std::uint64_t probe_seed2 = substream(probe_seed1, stream::probes);

  Vector beta_scratch;
  const auto objective = [&](const Vector& x, int probes, std::uint64_t probe_seed,
                             Vector* beta_out) -> double {
    const ThetaVector t = detail::unflatten_theta(x, n1, n2);
    if (std::abs(t.log_tau2) > 40) return std::numeric_limits<double>::infinity();
    try {
      const auto model = SpectralModel::from_param(
          PositivePolynomialParam{t.p1, t.p2, opt.eps}, std::exp(t.log_tau2));
      Vector data = Y;
      if (opt.covariates) {
        const Vector beta = fit_regression(bundle, model, *opt.covariates, Y, opt.cg);
        data -= *opt.covariates * beta;
        if (beta_out) *beta_out = beta;
      }
      return -log_likelihood(bundle, model, data, probes, probe_seed, ld, opt.cg);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  ThetaVector base;
  if (opt.start) {
    base = *opt.start;
    require(base.p1.size() == n1 && base.p2.size() == n2, errc::config,
            "start guess has the wrong coefficient counts");
  } else {
    base.p1 = Vector::Zero(n1);
    base.p1[0] = 0.001;
    base.p2 = Vector::Zero(n2);
    base.log_tau2 = 0;
  }
  const Vector x_base = detail::flatten_theta(base);

  FitReport report;
  Rng restart_rng(substream(opt.seed, stream::restarts));
  bool have_best = false;
  Vector best_x;
  double best_f1 = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opt.restarts; ++r) {
    Vector x0 = x_base;
    if (r > 0)
      for (Eigen::Index i = 0; i < x0.size(); ++i)
        x0[i] += restart_rng.uniform_in(-opt.restart_spread, opt.restart_spread);
    const auto res = nelder_mead(
        [&](const Vector& x) { return objective(x, opt.probes_phase1, probe_seed1, nullptr); },
        x0, opt.step, opt.max_iterations, opt.ftol);
    ++report.restarts;
    if (!std::isfinite(res.value)) continue;
    report.trace.emplace_back(res.x, -res.value);
    if (!have_best || res.value < best_f1) {
      have_best = true;
      best_f1 = res.value;
      best_x = res.x;
    }
  }
  require(have_best, errc::all_restarts_failed,
          "no restart produced a finite likelihood");

  report.trace.emplace_back(best_x,
                            -objective(best_x, opt.probes_phase2, probe_seed2, nullptr));
  const auto final_res = nelder_mead(
      [&](const Vector& x) { return objective(x, opt.probes_phase2, probe_seed2, nullptr); },
      best_x, opt.step * 0.5, opt.max_iterations, opt.ftol);
  require(std::isfinite(final_res.value), errc::all_restarts_failed,
          "polishing phase lost the likelihood");

  report.theta_hat = detail::unflatten_theta(final_res.x, n1, n2);
  if (opt.covariates) {
    // one more evaluation at the optimum to capture the coefficients
    objective(final_res.x, opt.probes_phase2, probe_seed2, &beta_scratch);
    report.beta_hat = beta_scratch;
  }
  report.loglik = -final_res.value;
  report.trace.emplace_back(final_res.x, report.loglik);
  return report;
}

}  // namespace mgrf
