#pragma once

// File exchange formats: observation/target CSV ingestion, field export as
// CSV or legacy-ASCII VTK, covariance-curve CSV. All floating-point output
// goes through format_double, so CSV round-trips are bitwise.

#include <string>
#include <vector>

#include "mgrf/csv.hpp"
#include "mgrf/error.hpp"
#include "mgrf/mesh.hpp"
#include "mgrf/oracle.hpp"
#include "mgrf/types.hpp"

namespace mgrf {

struct ObservationSet {
  Matrix locations;  // p x d
  Vector values;     // length p
};

namespace detail {
inline std::vector<int> coordinate_columns(const CsvTable& t, int dim, const std::string& path) {
  const char* names[] = {"x", "y", "z"};
  std::vector<int> cols;
  for (int a = 0; a < dim; ++a) {
    const int c = t.column(names[a]);
    require(c >= 0, errc::parse,
            std::string("'") + path + "' lacks a '" + names[a] + "' column");
    cols.push_back(c);
  }
  return cols;
}
}  // namespace detail

// Columns x,y[,z],value; the header row is mandatory.
inline ObservationSet read_observations(const std::string& path, int dim) {
  require(dim == 2 || dim == 3, errc::config, "observations need dimension 2 or 3");
  const CsvTable t = read_csv(path);
  const auto coord = detail::coordinate_columns(t, dim, path);
  const int vcol = t.column("value");
  require(vcol >= 0, errc::parse, "'" + path + "' lacks a 'value' column");
  ObservationSet out;
  out.locations = Matrix(t.rows.size(), dim);
  out.values = Vector(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int a = 0; a < dim; ++a) out.locations(r, a) = t.rows[r][coord[a]];
    out.values[r] = t.rows[r][vcol];
  }
  return out;
}

// Coordinate columns only.
inline Matrix read_targets(const std::string& path, int dim) {
  require(dim == 2 || dim == 3, errc::config, "targets need dimension 2 or 3");
  const CsvTable t = read_csv(path);
  const auto coord = detail::coordinate_columns(t, dim, path);
  Matrix out(t.rows.size(), dim);
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (int a = 0; a < dim; ++a) out(r, a) = t.rows[r][coord[a]];
  return out;
}

inline void export_field_csv(const std::string& path, const TriangulatedManifold& mesh,
                             const Vector& values) {
  require(values.size() == mesh.num_vertices(), errc::dimension_mismatch,
          "field length differs from the vertex count");
  const int ad = mesh.ambient_dim();
  std::string out = ad == 2 ? "id,x,y,value\n" : "id,x,y,z,value\n";
  for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) {
    const Eigen::Vector3d p = mesh.point(v);
    out += std::to_string(v);
    for (int a = 0; a < ad; ++a) {
      out += ',';
      out += format_double(p[a]);
    }
    out += ',';
    out += format_double(values[v]);
    out += '\n';
  }
  write_text_file(path, out);
}

// Values re-ingested in vertex-id order, so an export/import cycle is the
// identity on the field.
inline Vector read_field_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int idc = t.column("id");
  const int vc = t.column("value");
  require(idc >= 0 && vc >= 0, errc::parse,
          "'" + path + "' lacks 'id' or 'value' columns");
  Vector out(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto id = static_cast<Eigen::Index>(t.rows[r][idc]);
    require(id >= 0 && id < out.size(), errc::parse,
            "vertex id out of range in '" + path + "'");
    out[id] = t.rows[r][vc];
  }
  return out;
}

// Legacy ASCII unstructured grid with one point-scalar array. Cell type 5 is
// a triangle, 10 a tetrahedron.
inline void export_field_vtk(const std::string& path, const TriangulatedManifold& mesh,
                             const Vector& values, const std::string& name = "field") {
  require(values.size() == mesh.num_vertices(), errc::dimension_mismatch,
          "field length differs from the vertex count");
  const Eigen::Index n = mesh.num_vertices();
  const Eigen::Index m = mesh.num_elements();
  const int k = mesh.intrinsic_dim() + 1;
  std::string out;
  out += "# vtk DataFile Version 3.0\n";
  out += name + "\n";
  out += "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(n) + " double\n";
  for (Eigen::Index v = 0; v < n; ++v) {
    const Eigen::Vector3d p = mesh.point(v);
    out += format_double(p[0]);
    out += ' ';
    out += format_double(p[1]);
    out += ' ';
    out += format_double(p[2]);
    out += '\n';
  }
  out += "CELLS " + std::to_string(m) + " " + std::to_string(m * (k + 1)) + "\n";
  for (Eigen::Index e = 0; e < m; ++e) {
    const Index* el = mesh.element(e);
    out += std::to_string(k);
    for (int i = 0; i < k; ++i) out += ' ' + std::to_string(el[i]);
    out += '\n';
  }
  out += "CELL_TYPES " + std::to_string(m) + "\n";
  const char* type = k == 3 ? "5\n" : "10\n";
  for (Eigen::Index e = 0; e < m; ++e) out += type;
  out += "POINT_DATA " + std::to_string(n) + "\n";
  out += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index v = 0; v < n; ++v) {
    out += format_double(values[v]);
    out += '\n';
  }
  write_text_file(path, out);
}

// Predictions mirror the observation layout, so a prediction file is itself
// ingestible as observations.
inline void write_predictions_csv(const std::string& path, const Matrix& locations,
                                  const Vector& values) {
  require(locations.rows() == values.size(), errc::dimension_mismatch,
          "prediction count differs from the target count");
  const int d = static_cast<int>(locations.cols());
  require(d == 2 || d == 3, errc::dimension_mismatch, "targets need 2 or 3 coordinates");
  std::string out = d == 2 ? "x,y,value\n" : "x,y,z,value\n";
  for (Eigen::Index r = 0; r < locations.rows(); ++r) {
    for (int a = 0; a < d; ++a) {
      out += format_double(locations(r, a));
      out += ',';
    }
    out += format_double(values[r]);
    out += '\n';
  }
  write_text_file(path, out);
}

inline void write_curve_csv(const std::string& path, const CovarianceCurve& curve) {
  std::string out = "lag,value\n";
  for (Eigen::Index i = 0; i < curve.lags.size(); ++i) {
    out += format_double(curve.lags[i]);
    out += ',';
    out += format_double(curve.values[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

inline CovarianceCurve read_curve_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int lc = t.column("lag");
  const int vc = t.column("value");
  require(lc >= 0 && vc >= 0, errc::parse,
          "'" + path + "' lacks 'lag' or 'value' columns");
  CovarianceCurve c;
  c.lags = Vector(t.rows.size());
  c.values = Vector(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    c.lags[r] = t.rows[r][lc];
    c.values[r] = t.rows[r][vc];
  }
  return c;
}

}  // namespace mgrf
