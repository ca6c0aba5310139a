#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "mgrf/error.hpp"
#include "mgrf/spectral.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

// A spectral field model: precision polynomial P (density f = 1/P on the
// spectrum of S) plus the observation-noise variance tau2. Either built from
// an explicit coefficient vector or from the positive parameterization, whose
// factors the fitting code optimizes freely.
struct SpectralModel {
  SpectralPolynomial P;
  std::optional<PositivePolynomialParam> param;
  double tau2 = 1.0;

  static SpectralModel from_coeffs(Vector coeffs, double tau2) {
    SpectralModel m;
    m.P = SpectralPolynomial(std::move(coeffs));
    m.tau2 = tau2;
    m.validate();
    return m;
  }

  static SpectralModel from_param(PositivePolynomialParam prm, double tau2) {
    SpectralModel m;
    m.P = expand_positive_poly(prm);
    m.param = std::move(prm);
    m.tau2 = tau2;
    m.validate();
    return m;
  }

  void validate() const {
    require(tau2 > 0 && std::isfinite(tau2), errc::config, "tau2 must be positive and finite");
  }
};

}  // namespace mgrf
