#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mgrf {

using Index = std::int32_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major so that row slices of CSR arrays are the natural assembly unit.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

// Values of a piecewise-linear field, one coefficient per mesh vertex.
using FieldVector = Eigen::VectorXd;

}  // namespace mgrf
