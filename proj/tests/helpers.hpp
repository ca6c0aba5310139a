#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "mgrf/error.hpp"
#include "mgrf/mesh.hpp"
#include "mgrf/rng.hpp"

namespace testutil {

inline std::string temp_dir() {
  char tmpl[] = "/tmp/mgrf_test_XXXXXX";
  const char* d = mkdtemp(tmpl);
  REQUIRE(d != nullptr);
  return d;
}

// Runs f, expecting it to throw mgrf::Error; returns the code.
template <class F>
mgrf::errc code_of(F&& f) {
  try {
    f();
  } catch (const mgrf::Error& e) {
    return e.code();
  }
  FAIL("expected mgrf::Error");
  return mgrf::errc::config;
}

// Structured grid with interior vertices displaced by up to `jitter` cell
// widths; keeps the boundary so the domain stays a rectangle.
inline mgrf::TriangulatedManifold jittered_grid2d(int nx, int ny, double lx, double ly,
                                                  double jitter, std::uint64_t seed) {
  mgrf::TriangulatedManifold g = mgrf::build_grid(2, {nx, ny}, {lx, ly});
  mgrf::Matrix verts = g.vertices();
  mgrf::Rng rng(seed);
  const double hx = lx / nx, hy = ly / ny;
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const Eigen::Index r = i + (nx + 1) * j;
      verts(r, 0) += jitter * hx * (2 * rng.uniform() - 1);
      verts(r, 1) += jitter * hy * (2 * rng.uniform() - 1);
    }
  std::vector<mgrf::Index> cells = g.simplices();
  return mgrf::TriangulatedManifold(2, 2, std::move(verts), std::move(cells));
}

inline mgrf::TriangulatedManifold jittered_grid3d(int nx, int ny, int nz, double l,
                                                  double jitter, std::uint64_t seed) {
  mgrf::TriangulatedManifold g = mgrf::build_grid(3, {nx, ny, nz}, {l, l, l});
  mgrf::Matrix verts = g.vertices();
  mgrf::Rng rng(seed);
  const double h[3] = {l / nx, l / ny, l / nz};
  for (int k = 1; k < nz; ++k)
    for (int j = 1; j < ny; ++j)
      for (int i = 1; i < nx; ++i) {
        const Eigen::Index r = i + (nx + 1) * (j + (ny + 1) * static_cast<Eigen::Index>(k));
        for (int a = 0; a < 3; ++a) verts(r, a) += jitter * h[a] * (2 * rng.uniform() - 1);
      }
  std::vector<mgrf::Index> cells = g.simplices();
  return mgrf::TriangulatedManifold(3, 3, std::move(verts), std::move(cells));
}

// Regular icosahedron as an OFF string (unit circumradius up to scaling).
inline std::string icosahedron_off() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double v[12][3] = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                           {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                           {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  const int f[20][3] = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                        {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                        {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                        {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  std::string s = "OFF\n12 20 30\n";
  for (const auto& p : v)
    s += mgrf::format_double(p[0]) + " " + mgrf::format_double(p[1]) + " " +
         mgrf::format_double(p[2]) + "\n";
  for (const auto& t : f)
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " +
         std::to_string(t[2]) + "\n";
  return s;
}

}  // namespace testutil
