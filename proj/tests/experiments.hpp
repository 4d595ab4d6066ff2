#pragma once

// Test-side procedures shared by the unit tests and the acceptance runner.

#include "grmtl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace experiment {

using grmtl::Matrix;

// Quantile universal threshold for the penalties used by the library
// (||X W - Y||^2 + rho * pen(W)): the `quantile` of the smallest penalty
// that zeroes the solution on pure noise, simulated at the noise level
// estimated from the least-squares residuals. Requires n > d.
double qut_l1(const Matrix& x, const Matrix& y, std::uint64_t seed, double quantile = 0.95, int draws = 200);
double qut_nuclear(const Matrix& x, const Matrix& y, std::uint64_t seed, double quantile = 0.95, int draws = 200);

// Singular values above 1e-6 * sigma_max.
int numerical_rank(const Matrix& w);

// The worked metric examples, compared with ==. Returns a description of
// every example that does not hold (empty when all do).
std::vector<std::string> metric_example_failures();

// Random fold sets pooled by aggregate_cv and recounted from the raw
// predictions; returns the mismatches.
std::vector<std::string> pooled_cv_failures(std::uint64_t seed, int trials);

} // namespace experiment
