#pragma once

#include <Eigen/Dense>

#include <vector>

namespace grmtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Binary labels are stored as -1 / +1.
using Labels = std::vector<int>;

// Row subset of a matrix, in the order given by `rows`.
Matrix select_rows(const Matrix& m, const std::vector<Index>& rows);
Vector select_rows(const Vector& v, const std::vector<Index>& rows);

bool all_finite(const Matrix& m);

} // namespace grmtl
