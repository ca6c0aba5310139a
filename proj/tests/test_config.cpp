#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mgrf/config.hpp"

using namespace mgrf;

namespace {

// Minimal on-disk fixture: a grid-mesh config plus empty-ish data files that
// exist so the referenced-files-exist validation passes.
struct Fixture {
  std::string dir = testutil::temp_dir();
  std::string ini = dir + "/job.ini";
  std::string obs = dir + "/obs.csv";
  std::string tgt = dir + "/tgt.csv";

  Fixture() {
    write_text_file(obs, "x,y,value\n0.5,0.5,1\n");
    write_text_file(tgt, "x,y\n0.25,0.25\n");
    write_text_file(ini,
                    "# smoke config\n"
                    "[mesh]\n"
                    "grid_dim = 2\n"
                    "grid_cells = 8,8\n"
                    "grid_lengths = 2,2\n"
                    "\n"
                    "[model]\n"
                    "p = 1,2,1\n"
                    "tau2 = 0.01\n"
                    "\n"
                    "[data]\n"
                    "observations = " + obs + "\n"
                    "targets = " + tgt + "\n"
                    "\n"
                    "[output]\n"
                    "field = " + dir + "/f.csv\n"
                    "predictions = " + dir + "/p.csv\n"
                    "report = " + dir + "/r.json\n"
                    "curve = " + dir + "/c.csv\n");
  }

  JobConfig job(const std::string& cmd, std::vector<std::string> overrides = {}) const {
    return load_job(cmd, ini, overrides);
  }
};

}  // namespace

TEST_CASE("ini parsing") {
  KeyValues kv = parse_ini(
      "; leading comment\n"
      "[ Run ]\n"
      "Seed = 99\n"
      "# another comment\n"
      "[model]\n"
      "p = 1, -0.75, -0.75, 1\n"
      "tau2 = 0.5\r\n",
      "test");
  REQUIRE(kv.has("run.seed"));
  REQUIRE(kv.unsigned64("run.seed", 1) == 99);
  REQUIRE(kv.number("model.tau2", 0) == 0.5);
  const auto p = kv.numbers("model.p");
  REQUIRE(p.size() == 4);
  REQUIRE(p[1] == -0.75);
  REQUIRE(kv.numbers("model.absent").empty());
  REQUIRE(kv.get("model.absent", "dflt") == "dflt");

  REQUIRE(testutil::code_of([] { parse_ini("[a]\nk = 1\nk = 2\n", "t"); }) == errc::parse);
  REQUIRE(testutil::code_of([] { parse_ini("k = 1\n", "t"); }) == errc::parse);
  REQUIRE(testutil::code_of([] { parse_ini("[a\nk = 1\n", "t"); }) == errc::parse);
  REQUIRE(testutil::code_of([] { parse_ini("[a]\nnovalue\n", "t"); }) == errc::parse);
  REQUIRE(testutil::code_of([] { parse_ini("[a]\nk =\n", "t"); }) == errc::parse);
  REQUIRE(testutil::code_of([] { KeyValues kv2; kv2.set("x", "1,,2"); kv2.numbers("x"); }) ==
          errc::config);
  REQUIRE(testutil::code_of([] { KeyValues kv2; kv2.set("x", "-5"); kv2.unsigned64("x", 0); }) ==
          errc::config);
  REQUIRE(testutil::code_of([] { KeyValues kv2; kv2.set("x", "12a"); kv2.unsigned64("x", 0); }) ==
          errc::config);
}

TEST_CASE("job defaults and overrides") {
  Fixture fx;
  JobConfig c = fx.job("simulate");
  REQUIRE(c.seed == 1);
  REQUIRE(c.threads == 0);
  REQUIRE(c.cg_tol == 1e-8);
  REQUIRE(c.cg_maxit == 10000);
  REQUIRE(c.probes == 10);
  REQUIRE(c.cheb_degree == 256);
  REQUIRE(c.restarts == 8);
  REQUIRE(c.eps == 1e-3);
  REQUIRE(c.out_format == "csv");
  REQUIRE(c.grid_dim == 2);
  REQUIRE(c.grid_cells == std::vector<Index>{8, 8});
  REQUIRE(c.tau2 == 0.01);
  REQUIRE(c.p_coeffs == std::vector<double>{1, 2, 1});

  JobConfig o = fx.job("simulate", {"--run.seed=77", "--solver.cg_tol=1e-10",
                                    "--output.format=VTK", "--mesh.grid_cells=4,4"});
  REQUIRE(o.seed == 77);
  REQUIRE(o.cg_tol == 1e-10);
  REQUIRE(o.out_format == "vtk");
  REQUIRE(o.grid_cells == std::vector<Index>{4, 4});

  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"run.seed=7"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--run.seed"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--seed=7"}); }) == errc::config);
}

TEST_CASE("job validation") {
  Fixture fx;
  // unknown command / unknown key
  REQUIRE(testutil::code_of([&] { fx.job("meshify"); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--model.nu=1"}); }) == errc::config);

  // mesh sources: grid removed -> none; off added on top of grid -> two
  const std::string off = fx.dir + "/m.off";
  write_text_file(off, testutil::icosahedron_off());
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--mesh.off=" + off}); }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--mesh.off=" + fx.dir + "/ghost.off"});
          }) == errc::config);

  // grid spec shape
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--mesh.grid_cells=8"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--mesh.grid_dim=5"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--mesh.grid_lengths=2,-2"});
          }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--mesh.grid_cells=8.5,8"});
          }) == errc::config);

  // model block
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--model.tau2=0"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("fit", {"--model.eps=0"}); }) == errc::config);

  // per-command required outputs and data
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--output.field="}); }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("krige", {"--data.observations=" + fx.dir + "/ghost.csv"});
          }) == errc::config);

  // anisotropy shape rules
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--anisotropy.ranges=2"});
          }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--anisotropy.ranges=2,1", "--anisotropy.rotation=1,0,0,0,1,0,0,0,1"});
          }) == errc::config);
  REQUIRE(testutil::code_of([&] {
            fx.job("simulate", {"--anisotropy.ranges=2,1,1", "--anisotropy.angle=0.5"});
          }) == errc::config);
  JobConfig a2 = fx.job("simulate", {"--anisotropy.ranges=2,1", "--anisotropy.angle=0.5"});
  REQUIRE(a2.aniso_ranges.size() == 2);
  REQUIRE(a2.aniso_angle == 0.5);

  // solver/fit knobs
  REQUIRE(testutil::code_of([&] { fx.job("loglik", {"--solver.probes=0"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("fit", {"--fit.restarts=0"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("covcurve", {"--curve.grid=32"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("covcurve", {"--curve.dim=4"}); }) == errc::config);
  REQUIRE(testutil::code_of([&] { fx.job("simulate", {"--output.format=hdf5"}); }) == errc::config);

  // covcurve runs without any mesh section
  write_text_file(fx.dir + "/curveonly.ini",
                  "[model]\np = 1,2,1\n[output]\ncurve = " + fx.dir + "/c.csv\n");
  JobConfig cc = load_job("covcurve", fx.dir + "/curveonly.ini", {});
  REQUIRE(cc.curve_dim == 2);
  REQUIRE(cc.out_curve == fx.dir + "/c.csv");
  // but a mesh-using command still needs its mesh
  REQUIRE(testutil::code_of([&] {
            load_job("simulate", fx.dir + "/curveonly.ini", {"--output.field=" + fx.dir + "/f.csv"});
          }) == errc::config);

  REQUIRE(testutil::code_of([&] { load_job("simulate", fx.dir + "/ghost.ini", {}); }) == errc::io);
}
