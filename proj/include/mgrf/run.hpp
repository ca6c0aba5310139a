#pragma once

// Job orchestration: turn a validated JobConfig into artifacts on disk plus a
// key = value run summary on the given stream. Throws mgrf::Error; the CLI
// maps the code to the process exit status.

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgrf/config.hpp"
#include "mgrf/fem.hpp"
#include "mgrf/fieldops.hpp"
#include "mgrf/io.hpp"
#include "mgrf/likelihood.hpp"
#include "mgrf/mesh.hpp"
#include "mgrf/model.hpp"
#include "mgrf/oracle.hpp"

namespace mgrf {

inline TriangulatedManifold build_mesh(const JobConfig& c) {
  if (!c.mesh_off.empty()) return load_mesh_off(c.mesh_off);
  if (!c.mesh_vertices.empty()) return load_mesh_csv(c.mesh_vertices, c.mesh_simplices);
  return build_grid(c.grid_dim, c.grid_cells, c.grid_lengths);
}

inline std::optional<AnisotropyField> build_anisotropy(const JobConfig& c, int dim) {
  if (!c.aniso_file.empty()) return AnisotropyField::from_csv(c.aniso_file, dim);
  if (c.aniso_ranges.empty()) return std::nullopt;
  require(static_cast<int>(c.aniso_ranges.size()) == dim, errc::config,
          "anisotropy.ranges dimension differs from the mesh");
  if (dim == 2)
    return AnisotropyField::constant2d(c.aniso_ranges[0], c.aniso_ranges[1], c.aniso_angle);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (!c.aniso_rotation.empty())
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot(i, j) = c.aniso_rotation[3 * i + j];
  return AnisotropyField::constant3d(
      Eigen::Vector3d(c.aniso_ranges[0], c.aniso_ranges[1], c.aniso_ranges[2]), rot);
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return std::string(buf) + " s";
}

inline void write_field_output(const JobConfig& c, const TriangulatedManifold& mesh,
                               const Vector& values) {
  if (c.out_format == "vtk")
    export_field_vtk(c.out_field, mesh, values);
  else
    export_field_csv(c.out_field, mesh, values);
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

inline void run(const JobConfig& c, std::ostream& out) {
  const detail::Stopwatch total;
  if (c.threads > 0) Eigen::setNbThreads(c.threads);
  out << "command = " << c.command << "\n";

  if (c.command == "covcurve") {
    Vector coeffs = Eigen::Map<const Vector>(c.p_coeffs.data(),
                                             static_cast<Eigen::Index>(c.p_coeffs.size()));
    const CovarianceCurve curve =
        covariance_curve_fft(SpectralPolynomial(std::move(coeffs)), c.curve_dim, c.curve_grid);
    write_curve_csv(c.out_curve, curve);
    out << "dim = " << c.curve_dim << "\n";
    out << "lags = " << curve.lags.size() << "\n";
    out << "sill = " << format_double(curve.sill()) << "\n";
    if (curve.alias_warning)
      out << "warning = spectral tail not fully resolved; distant lags may alias\n";
    out << "curve file = " << c.out_curve << "\n";
    out << "total time = " << detail::fmt_seconds(total.seconds()) << "\n";
    return;
  }

  const TriangulatedManifold mesh = build_mesh(c);
  const std::optional<AnisotropyField> aniso = build_anisotropy(c, mesh.intrinsic_dim());
  const int dim = mesh.intrinsic_dim();

  ObservationSet obs;
  if (c.uses_observations()) obs = read_observations(c.observations, dim);
  Matrix targets;
  if (!c.targets.empty()) targets = read_targets(c.targets, dim);

  const OperatorBundle bundle =
      make_bundle(mesh, aniso ? &*aniso : nullptr,
                  c.uses_observations() ? &obs.locations : nullptr,
                  c.targets.empty() ? nullptr : &targets);
  out << "n = " << bundle.n() << "\n";
  out << "elements = " << mesh.num_elements() << "\n";
  if (c.uses_observations()) out << "p = " << bundle.p() << "\n";
  if (!c.targets.empty()) out << "q = " << bundle.q() << "\n";
  out << "assembly time = " << detail::fmt_seconds(total.seconds()) << "\n";

  CgOptions cg;
  cg.tol = c.cg_tol;
  cg.max_iterations = c.cg_maxit;

  if (c.command == "simulate") {
    const SpectralModel model = SpectralModel::from_coeffs(
        Eigen::Map<const Vector>(c.p_coeffs.data(),
                                 static_cast<Eigen::Index>(c.p_coeffs.size())),
        c.tau2);
    const SamplePlan plan = make_sample_plan(bundle, model, c.tail_tol);
    const detail::Stopwatch solve;
    Rng rng(substream(c.seed, stream::prior_noise));
    const Vector z = simulate_prior(bundle, plan, rng);
    out << "chebyshev degree = " << plan.root_density.degree() << "\n";
    out << "seed = " << c.seed << "\n";
    out << "sample time = " << detail::fmt_seconds(solve.seconds()) << "\n";
    detail::write_field_output(c, mesh, z);
    out << "field file = " << c.out_field << "\n";
  } else if (c.command == "krige") {
    const SpectralModel model = SpectralModel::from_coeffs(
        Eigen::Map<const Vector>(c.p_coeffs.data(),
                                 static_cast<Eigen::Index>(c.p_coeffs.size())),
        c.tau2);
    SolveReport rep;
    const detail::Stopwatch solve;
    const Vector mean = conditional_mean(bundle, model, obs.values, cg, &rep);
    out << "cg iterations = " << rep.iterations << "\n";
    out << "cg residual = " << format_double(rep.relative_residual) << "\n";
    out << "solve time = " << detail::fmt_seconds(solve.seconds()) << "\n";
    write_predictions_csv(c.out_predictions, targets, bundle.M_T * mean);
    out << "predictions file = " << c.out_predictions << "\n";
    if (!c.out_field.empty()) {
      detail::write_field_output(c, mesh, mean);
      out << "field file = " << c.out_field << "\n";
    }
  } else if (c.command == "condsim") {
    const SpectralModel model = SpectralModel::from_coeffs(
        Eigen::Map<const Vector>(c.p_coeffs.data(),
                                 static_cast<Eigen::Index>(c.p_coeffs.size())),
        c.tau2);
    const detail::Stopwatch solve;
    const ConditionalSimulation sim = conditional_simulate(bundle, model, obs.values, c.seed, cg);
    out << "cg iterations = " << sim.data_solve.iterations << " + "
        << sim.residual_solve.iterations << "\n";
    out << "seed = " << c.seed << "\n";
    out << "solve time = " << detail::fmt_seconds(solve.seconds()) << "\n";
    detail::write_field_output(c, mesh, sim.field);
    out << "field file = " << c.out_field << "\n";
    if (!c.targets.empty() && !c.out_predictions.empty()) {
      write_predictions_csv(c.out_predictions, targets, sim.targets);
      out << "predictions file = " << c.out_predictions << "\n";
    }
  } else if (c.command == "loglik") {
    const SpectralModel model = SpectralModel::from_coeffs(
        Eigen::Map<const Vector>(c.p_coeffs.data(),
                                 static_cast<Eigen::Index>(c.p_coeffs.size())),
        c.tau2);
    LogDetOptions ld;
    ld.degree = c.cheb_degree;
    const detail::Stopwatch solve;
    const double ll = log_likelihood(bundle, model, obs.values, c.probes, c.seed, ld, cg);
    out << "loglik = " << format_double(ll) << "\n";
    out << "probes = " << c.probes << "\n";
    out << "chebyshev degree = " << c.cheb_degree << "\n";
    out << "seed = " << c.seed << "\n";
    out << "solve time = " << detail::fmt_seconds(solve.seconds()) << "\n";
    if (!c.out_report.empty()) {
      nlohmann::json j;
      j["command"] = "loglik";
      j["loglik"] = ll;
      j["n"] = bundle.n();
      j["p"] = bundle.p();
      j["probes"] = c.probes;
      j["chebyshev_degree"] = c.cheb_degree;
      j["seed"] = c.seed;
      write_text_file(c.out_report, j.dump(2) + "\n");
      out << "report file = " << c.out_report << "\n";
    }
  } else {  // fit
    FitOptions fo;
    fo.degree_p1 = c.p1_degree;
    fo.degree_p2 = c.p2_degree;
    fo.restarts = c.restarts;
    fo.probes_phase1 = c.probes_phase1;
    fo.probes_phase2 = c.probes;
    fo.logdet_degree = c.cheb_degree;
    fo.seed = c.seed;
    fo.max_iterations = c.max_iterations;
    fo.ftol = c.ftol;
    fo.step = c.step;
    fo.eps = c.eps;
    fo.cg = cg;
    const detail::Stopwatch solve;
    const FitReport rep = fit_mle(bundle, obs.values, fo);
    const double tau2_hat = std::exp(rep.theta_hat.log_tau2);
    const SpectralPolynomial fitted = expand_positive_poly(
        PositivePolynomialParam{rep.theta_hat.p1, rep.theta_hat.p2, c.eps});
    out << "loglik = " << format_double(rep.loglik) << "\n";
    out << "tau2 = " << format_double(tau2_hat) << "\n";
    out << "restarts = " << rep.restarts << "\n";
    out << "seed = " << c.seed << "\n";
    out << "fit time = " << detail::fmt_seconds(solve.seconds()) << "\n";

    nlohmann::json j;
    j["command"] = "fit";
    j["loglik"] = rep.loglik;
    j["tau2"] = tau2_hat;
    j["log_tau2"] = rep.theta_hat.log_tau2;
    j["p1"] = detail::to_std(rep.theta_hat.p1);
    j["p2"] = detail::to_std(rep.theta_hat.p2);
    j["eps"] = c.eps;
    j["p"] = detail::to_std(fitted.coeffs);
    if (rep.beta_hat) j["beta"] = detail::to_std(*rep.beta_hat);
    j["restarts"] = rep.restarts;
    j["seed"] = c.seed;
    j["n"] = bundle.n();
    j["p_obs"] = bundle.p();
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [theta, value] : rep.trace)
      trace.push_back({{"theta", detail::to_std(theta)}, {"loglik", value}});
    j["trace"] = trace;
    write_text_file(c.out_report, j.dump(2) + "\n");
    out << "report file = " << c.out_report << "\n";
  }

  out << "total time = " << detail::fmt_seconds(total.seconds()) << "\n";
}

}  // namespace mgrf
