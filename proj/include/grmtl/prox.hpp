#pragma once

#include "grmtl/types.hpp"

#include <functional>

namespace grmtl {

// Elementwise soft-thresholding: sign(w) * max(|w| - threshold, 0).
Matrix prox_l1(const Matrix& w, double threshold);

// Singular value thresholding U * diag(max(sigma - threshold, 0)) * V^T.
// Zero threshold returns the input unchanged.
Matrix prox_nuclear(const Matrix& w, double threshold);

double l1_norm(const Matrix& w);
double nuclear_norm(const Matrix& w);

/// Thin SVD with a reproducible sign convention: the first nonzero component
/// of every left singular vector is made non-negative.
struct CanonicalSvd {
    Matrix u;
    Vector singular_values;
    Matrix v;
};

CanonicalSvd canonical_svd(const Matrix& w);

/// f in F(W) = f(W) + g(W). Must be differentiable with a matching gradient.
struct SmoothObjective {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> gradient;
};

/// g in F(W) = f(W) + g(W), accessed through its proximal map
/// prox(W, step) = argmin_Z 1/(2 step) ||Z - W||_F^2 + g(Z).
struct ProxTerm {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&, double)> prox;
};

ProxTerm zero_term();
ProxTerm l1_term(double weight);
ProxTerm nuclear_term(double weight);

} // namespace grmtl
