#include "grmtl/error.hpp"
#include "grmtl/propsvm.hpp"
#include "svm_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace grmtl {

Vector SvmModel::decision(const Matrix& x) const {
    if (x.cols() != weights.size())
        throw Error(ErrorKind::Shape, "svm: feature dimension differs from the model");
    return (x * weights).array() + bias;
}

Labels SvmModel::predict(const Matrix& x) const {
    const Vector s = decision(x);
    Labels out(static_cast<std::size_t>(s.size()));
    for (Index u = 0; u < s.size(); ++u)
        out[static_cast<std::size_t>(u)] = s(u) >= 0.0 ? 1 : -1;
    return out;
}

double hinge_loss(int label, double score) noexcept { return std::max(0.0, 1.0 - label * score); }

double svm_objective(const SvmModel& model, const Matrix& x, const Labels& labels) {
    const Vector s = model.decision(x);
    double loss = 0.0;
    for (Index u = 0; u < s.size(); ++u)
        loss += hinge_loss(labels[static_cast<std::size_t>(u)], s(u));
    return 0.5 * model.weights.squaredNorm() + model.cost * loss;
}

namespace {

constexpr double kTau = 1e-12;
constexpr Index kFullGramLimit = 4096;

// Kernel rows of the linear Gram matrix, precomputed when small enough.
class Gram {
public:
    explicit Gram(const Matrix& x) : x_(x) {
        if (x.rows() <= kFullGramLimit)
            full_ = x * x.transpose();
        diag_ = x.rowwise().squaredNorm();
    }

    double diag(Index i) const { return diag_(i); }

    Vector row(Index i) const {
        if (full_)
            return full_->row(i).transpose();
        return x_ * x_.row(i).transpose();
    }

private:
    const Matrix& x_;
    std::optional<Matrix> full_;
    Vector diag_;
};

// argmin_b sum_u hinge(y_u, s_u + b). The objective is piecewise linear with
// slope -#positives far left, rising by one at every breakpoint y_u - s_u, so
// its flat minimum lies between the P-th and (P+1)-th sorted breakpoints.
double best_bias(const Vector& scores, const Labels& labels) {
    const Index n = scores.size();
    std::vector<double> breaks(static_cast<std::size_t>(n));
    Index positives = 0;
    for (Index u = 0; u < n; ++u) {
        const int y = labels[static_cast<std::size_t>(u)];
        breaks[static_cast<std::size_t>(u)] = y - scores(u);
        positives += y == 1;
    }
    std::sort(breaks.begin(), breaks.end());
    if (positives == 0)
        return breaks.front();
    if (positives == n)
        return breaks.back();
    return 0.5 * (breaks[static_cast<std::size_t>(positives - 1)] + breaks[static_cast<std::size_t>(positives)]);
}

// Degenerate one-class problem: w = 0 and any bias beyond the margin is optimal.
SvmModel one_class_model(const Matrix& x, int label, double cost) {
    return {Vector::Zero(x.cols()), static_cast<double>(label), cost};
}

} // namespace

SvmModel fit_linear_svm_any(const Matrix& x, const Labels& labels, double cost, const SvmOptions& options) {
    const Index n = x.rows();
    Index positives = 0;
    for (int y : labels)
        positives += y == 1;
    if (positives == 0 || positives == n)
        return one_class_model(x, positives == n ? 1 : -1, cost);

    const Gram gram(x);
    const double c = cost;
    Vector alpha = Vector::Zero(n);
    Vector grad = Vector::Constant(n, -1.0); // Q alpha - e
    auto y = [&](Index t) { return static_cast<double>(labels[static_cast<std::size_t>(t)]); };

    double eps = 1e-3;
    long iterations = 0;
    SvmModel model{Vector::Zero(x.cols()), 0.0, cost};

    for (;;) {
        // Working-set selection with second-order information.
        double gmax = -std::numeric_limits<double>::infinity();
        Index i = -1;
        for (Index t = 0; t < n; ++t) {
            if (y(t) > 0 ? alpha(t) < c : alpha(t) > 0.0) {
                const double v = -y(t) * grad(t);
                if (v >= gmax) {
                    gmax = v;
                    i = t;
                }
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        Index j = -1;
        Vector ki;
        if (i >= 0) {
            ki = gram.row(i);
            double best = std::numeric_limits<double>::infinity();
            for (Index t = 0; t < n; ++t) {
                if (!(y(t) > 0 ? alpha(t) > 0.0 : alpha(t) < c))
                    continue;
                const double v = y(t) * grad(t);
                gmax2 = std::max(gmax2, v);
                const double diff = gmax + v;
                if (diff > 0.0) {
                    double quad = gram.diag(i) + gram.diag(t) - 2.0 * ki(t);
                    if (quad <= 0.0)
                        quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        j = t;
                    }
                }
            }
        }

        const bool kkt_met = i < 0 || j < 0 || gmax + gmax2 < eps;
        if (kkt_met || iterations >= options.max_iterations) {
            Vector signed_alpha(n);
            for (Index t = 0; t < n; ++t)
                signed_alpha(t) = alpha(t) * y(t);
            model.weights = x.transpose() * signed_alpha;
            const Vector scores = x * model.weights;
            model.bias = best_bias(scores, labels);
            const double primal = svm_objective(model, x, labels);
            const double dual = alpha.sum() - 0.5 * model.weights.squaredNorm();
            const double gap = primal - dual;
            if (gap <= options.tol * std::max(primal, 1e-12) || iterations >= options.max_iterations || eps < 1e-13)
                return model;
            eps *= 0.1;
            continue;
        }

        ++iterations;
        const Vector kj = gram.row(j);
        const double old_ai = alpha(i);
        const double old_aj = alpha(j);
        if (y(i) != y(j)) {
            double quad = gram.diag(i) + gram.diag(j) - 2.0 * ki(j);
            if (quad <= 0.0)
                quad = kTau;
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0.0) {
                if (alpha(j) < 0.0) {
                    alpha(j) = 0.0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = -diff;
            }
            if (diff > 0.0) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = c - diff;
                }
            } else if (alpha(j) > c) {
                alpha(j) = c;
                alpha(i) = c + diff;
            }
        } else {
            double quad = gram.diag(i) + gram.diag(j) - 2.0 * ki(j);
            if (quad <= 0.0)
                quad = kTau;
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > c) {
                if (alpha(i) > c) {
                    alpha(i) = c;
                    alpha(j) = sum - c;
                }
            } else if (alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = sum;
            }
            if (sum > c) {
                if (alpha(j) > c) {
                    alpha(j) = c;
                    alpha(i) = sum - c;
                }
            } else if (alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = sum;
            }
        }
        const double dai = alpha(i) - old_ai;
        const double daj = alpha(j) - old_aj;
        // Q_it = y_i y_t K_it
        for (Index t = 0; t < n; ++t)
            grad(t) += y(t) * (y(i) * ki(t) * dai + y(j) * kj(t) * daj);
    }
}

SvmModel fit_linear_svm(const Matrix& x, const Labels& labels, double cost, const SvmOptions& options) {
    if (static_cast<Index>(labels.size()) != x.rows())
        throw Error(ErrorKind::Shape, "fit_linear_svm: label count differs from rows");
    if (x.rows() < 2 || x.cols() < 1)
        throw Error(ErrorKind::Shape, "fit_linear_svm: need at least two rows and one feature");
    if (!(cost > 0.0) || !std::isfinite(cost))
        throw Error(ErrorKind::Domain, "fit_linear_svm: cost must be positive");
    if (!x.allFinite())
        throw Error(ErrorKind::Numeric, "fit_linear_svm: non-finite input");
    bool pos = false, neg = false;
    for (int y : labels) {
        if (y == 1)
            pos = true;
        else if (y == -1)
            neg = true;
        else
            throw Error(ErrorKind::Domain, "fit_linear_svm: labels must be -1 or +1");
    }
    if (!pos || !neg)
        throw Error(ErrorKind::Domain, "fit_linear_svm: both classes must be present");
    return fit_linear_svm_any(x, labels, cost, options);
}

} // namespace grmtl
