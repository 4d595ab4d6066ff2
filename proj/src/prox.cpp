#include "grmtl/prox.hpp"
#include "grmtl/error.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace grmtl {

namespace {

void check_input(const Matrix& w, double threshold, const char* what) {
    if (!(threshold >= 0.0) || !std::isfinite(threshold))
        throw Error(ErrorKind::Domain, std::string(what) + ": threshold must be a finite non-negative number");
    if (!w.allFinite())
        throw Error(ErrorKind::Numeric, std::string(what) + ": input has non-finite entries");
}

} // namespace

Matrix prox_l1(const Matrix& w, double threshold) {
    check_input(w, threshold, "prox_l1");
    return w.unaryExpr([threshold](double x) {
        const double mag = std::abs(x) - threshold;
        return mag > 0.0 ? std::copysign(mag, x) : 0.0;
    });
}

CanonicalSvd canonical_svd(const Matrix& w) {
    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    CanonicalSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    for (Index k = 0; k < out.u.cols(); ++k) {
        for (Index i = 0; i < out.u.rows(); ++i) {
            const double x = out.u(i, k);
            if (std::abs(x) > 1e-14) {
                if (x < 0.0) {
                    out.u.col(k) *= -1.0;
                    out.v.col(k) *= -1.0;
                }
                break;
            }
        }
    }
    return out;
}

Matrix prox_nuclear(const Matrix& w, double threshold) {
    check_input(w, threshold, "prox_nuclear");
    if (threshold == 0.0 || w.size() == 0)
        return w;
    const CanonicalSvd svd = canonical_svd(w);
    const Vector shrunk = (svd.singular_values.array() - threshold).max(0.0).matrix();
    return svd.u * shrunk.asDiagonal() * svd.v.transpose();
}

double l1_norm(const Matrix& w) { return w.cwiseAbs().sum(); }

double nuclear_norm(const Matrix& w) {
    if (w.size() == 0)
        return 0.0;
    return Eigen::JacobiSVD<Matrix>(w).singularValues().sum();
}

ProxTerm zero_term() {
    return {[](const Matrix&) { return 0.0; }, [](const Matrix& w, double) { return w; }};
}

ProxTerm l1_term(double weight) {
    if (!(weight >= 0.0))
        throw Error(ErrorKind::Domain, "l1 weight must be non-negative");
    return {[weight](const Matrix& w) { return weight * l1_norm(w); },
            [weight](const Matrix& w, double step) { return prox_l1(w, weight * step); }};
}

ProxTerm nuclear_term(double weight) {
    if (!(weight >= 0.0))
        throw Error(ErrorKind::Domain, "nuclear-norm weight must be non-negative");
    return {[weight](const Matrix& w) { return weight * nuclear_norm(w); },
            [weight](const Matrix& w, double step) { return prox_nuclear(w, weight * step); }};
}

} // namespace grmtl
