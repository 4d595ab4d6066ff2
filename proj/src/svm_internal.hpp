#pragma once

#include "grmtl/propsvm.hpp"

namespace grmtl {

// fit_linear_svm without input checks. A single-class labelling yields w = 0
// with the bias on that class's side, which the alternating solver can reach.
SvmModel fit_linear_svm_any(const Matrix& x, const Labels& labels, double cost, const SvmOptions& options);

} // namespace grmtl
