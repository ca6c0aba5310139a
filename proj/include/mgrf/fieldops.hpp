#pragma once

// Field-level operations on top of the operator bundle: unconditional
// simulation, kriging, conditional simulation. Everything is matrix-free;
// the only dense objects are vectors of length n.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "mgrf/error.hpp"
#include "mgrf/fem.hpp"
#include "mgrf/model.hpp"
#include "mgrf/rng.hpp"
#include "mgrf/solver.hpp"
#include "mgrf/spectral.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

// Reusable ingredients of a prior draw: the polynomial approximation of
// 1/sqrt(P) on the certified spectral interval of S. Fitting is the expensive
// part, so replicate loops build the plan once.
struct SamplePlan {
  ChebyshevApprox root_density;
  double lambda_max = 0;
};

inline SamplePlan make_sample_plan(const OperatorBundle& bundle, const SpectralModel& model,
                                   double tail_tol = 1e-8) {
  model.validate();
  SamplePlan plan;
  plan.lambda_max = eigen_upper_bound_S(bundle.S);
  const PolyRange pr = poly_range(model.P, 0.0, plan.lambda_max);
  require(pr.min > 0, errc::non_positive_lower_bound,
          "spectral polynomial reaches " + format_double(pr.min) +
              " on the operator interval; the density is undefined");
  plan.root_density = chebyshev_fit_adaptive(
      [&](double x) { return 1.0 / std::sqrt(model.P(x)); }, 0.0, plan.lambda_max, tail_tol);
  return plan;
}

// Z' = D^{-1} g(S) W with g ~ 1/sqrt(P) and W standard normal, so that
// cov(Z') = D^{-1} (1/P)(S) D^{-1} up to the approximation tail.
inline FieldVector simulate_prior(const OperatorBundle& bundle, const SamplePlan& plan, Rng& rng) {
  const Vector w = rng.normal_vector(bundle.n());
  const Vector y = apply_chebyshev(bundle.S, plan.root_density, w);
  FieldVector z = y.cwiseQuotient(bundle.mass.sqrt_mass);
  require(z.allFinite(), errc::non_finite_entry, "simulated field has non-finite entries");
  return z;
}

inline FieldVector simulate_prior(const OperatorBundle& bundle, const SpectralModel& model,
                                  std::uint64_t seed) {
  const SamplePlan plan = make_sample_plan(bundle, model);
  Rng rng(substream(seed, stream::prior_noise));
  return simulate_prior(bundle, plan, rng);
}

// Y = M z + tau eps. tau2 = 0 is legal here (exact evaluation of the field at
// the observation points); the model type forbids it only for inference.
inline Vector simulate_observations(const SparseMatrix& M_D, const FieldVector& z, double tau2,
                                    Rng& rng) {
  require(std::isfinite(tau2) && tau2 >= 0, errc::config,
          "noise variance must be finite and non-negative");
  require(M_D.cols() == z.size(), errc::dimension_mismatch,
          "field length does not match the design");
  Vector y = M_D * z;
  if (y.size() > 0 && tau2 > 0) y += std::sqrt(tau2) * rng.normal_vector(y.size());
  return y;
}

inline Vector simulate_observations(const SparseMatrix& M_D, const FieldVector& z, double tau2,
                                    std::uint64_t seed) {
  Rng rng(substream(seed, stream::obs_noise));
  return simulate_observations(M_D, z, tau2, rng);
}

// E[Z|Y]: solve (tau2 D P(S) D + M^T M) X = M^T Y. The operator is symmetric
// positive definite for tau2 > 0 and P > 0 on the spectrum.
inline Vector conditional_mean(const OperatorBundle& bundle, const SpectralModel& model,
                               const Vector& Y, const CgOptions& opt = {},
                               SolveReport* report = nullptr) {
  model.validate();
  require(Y.size() == bundle.p(), errc::dimension_mismatch,
          "observation vector length differs from the design row count");
  const Vector rhs = bundle.M_D.transpose() * Y;
  auto [x, rep] = conjugate_gradient(
      [&](const Vector& v) {
        return apply_poly_shifted(bundle.mass.sqrt_mass, bundle.S, model.tau2, model.P,
                                  &bundle.M_D, v);
      },
      rhs, opt);
  if (report) *report = rep;
  require(rep.converged, errc::solver,
          "kriging solve stalled at relative residual " + format_double(rep.relative_residual) +
              " after " + std::to_string(rep.iterations) + " iterations");
  return x;
}

// Predictions at the bundle's target locations.
inline Vector krige(const OperatorBundle& bundle, const SpectralModel& model, const Vector& Y,
                    const CgOptions& opt = {}, SolveReport* report = nullptr) {
  return bundle.M_T * conditional_mean(bundle, model, Y, opt, report);
}

// Z' - E[Z'|Y'] for a fresh prior draw Z' and synthetic observations Y' of it:
// a zero-mean field with exactly the conditional covariance.
inline FieldVector conditional_residual(const OperatorBundle& bundle, const SpectralModel& model,
                                        const SamplePlan& plan, std::uint64_t seed,
                                        const CgOptions& opt = {}, SolveReport* report = nullptr) {
  Rng prior_rng(substream(seed, stream::resim_prior));
  const FieldVector zp = simulate_prior(bundle, plan, prior_rng);
  Rng obs_rng(substream(seed, stream::resim_obs));
  const Vector yp = simulate_observations(bundle.M_D, zp, model.tau2, obs_rng);
  return zp - conditional_mean(bundle, model, yp, opt, report);
}

struct ConditionalSimulation {
  FieldVector field;  // one draw of the weights given the data
  Vector targets;     // the draw evaluated at the target locations
  SolveReport data_solve;
  SolveReport residual_solve;
};

inline ConditionalSimulation conditional_simulate(const OperatorBundle& bundle,
                                                  const SpectralModel& model, const Vector& Y,
                                                  std::uint64_t seed, const CgOptions& opt = {}) {
  const SamplePlan plan = make_sample_plan(bundle, model);
  ConditionalSimulation out;
  const Vector mean = conditional_mean(bundle, model, Y, opt, &out.data_solve);
  out.field = mean + conditional_residual(bundle, model, plan, seed, opt, &out.residual_solve);
  require(out.field.allFinite(), errc::non_finite_entry,
          "conditional simulation has non-finite entries");
  out.targets = bundle.M_T * out.field;
  return out;
}

}  // namespace mgrf
