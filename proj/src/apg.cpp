#include "grmtl/apg.hpp"
#include "grmtl/error.hpp"

#include <cmath>
#include <string>

namespace grmtl {

void OptimizerConfig::validate() const {
    if (max_iters < 1)
        throw Error(ErrorKind::Domain, "optimizer: max_iters must be at least 1");
    if (!(tol > 0.0))
        throw Error(ErrorKind::Domain, "optimizer: tol must be positive");
    if (!(initial_step > 0.0) || !std::isfinite(initial_step))
        throw Error(ErrorKind::Domain, "optimizer: initial_step must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
        throw Error(ErrorKind::Domain, "optimizer: backtrack_factor must lie in (0, 1)");
}

namespace {

void require_finite(double value, int iteration, const char* what) {
    if (!std::isfinite(value))
        throw Error(ErrorKind::Numeric, std::string("solve_apg: non-finite ") + what + " at iteration " +
                                            std::to_string(iteration));
}

} // namespace

SolveReport solve_apg(const SmoothObjective& f, const ProxTerm& g, const Matrix& w0, const OptimizerConfig& config) {
    config.validate();
    if (!f.value || !f.gradient || !g.value || !g.prox)
        throw Error(ErrorKind::Domain, "solve_apg: objective callbacks must be set");

    Matrix x = w0;
    double fx_total = f.value(x) + g.value(x);
    require_finite(fx_total, 0, "objective");

    Matrix y = x;
    bool y_is_x = true;
    double t = 1.0;
    double step = config.initial_step;

    SolveReport report;
    report.objective_trace.reserve(static_cast<std::size_t>(config.max_iters));

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        report.iterations_used = iter;
        const double fy = f.value(y);
        const Matrix grad = f.gradient(y);
        require_finite(fy, iter, "smooth objective");
        if (grad.rows() != y.rows() || grad.cols() != y.cols())
            throw Error(ErrorKind::Shape, "solve_apg: gradient shape differs from the iterate");
        if (!grad.allFinite())
            throw Error(ErrorKind::Numeric, "solve_apg: non-finite gradient at iteration " + std::to_string(iter));

        Matrix z;
        double fz = 0.0;
        for (;;) {
            z = g.prox(y - step * grad, step);
            if (z.rows() != y.rows() || z.cols() != y.cols())
                throw Error(ErrorKind::Shape, "solve_apg: prox output shape differs from the iterate");
            fz = f.value(z);
            const Matrix diff = z - y;
            // Quadratic upper bound; the small slack absorbs rounding near the optimum.
            const double bound = fy + (grad.array() * diff.array()).sum() + diff.squaredNorm() / (2.0 * step);
            if (std::isfinite(fz) && fz <= bound + 1e-14 * std::max(1.0, std::abs(fy)))
                break;
            step *= config.backtrack_factor;
            if (step < 1e-300)
                throw Error(ErrorKind::Numeric, "solve_apg: line search collapsed at iteration " +
                                                    std::to_string(iter));
        }

        const double fz_total = fz + g.value(z);
        require_finite(fz_total, iter, "objective");

        if (fz_total <= fx_total) {
            const double previous = fx_total;
            if (config.accelerated) {
                const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
                y = z + ((t - 1.0) / t_next) * (z - x);
                t = t_next;
                y_is_x = false;
            } else {
                y = z;
                y_is_x = true;
            }
            x = std::move(z);
            fx_total = fz_total;
            report.objective_trace.push_back(fx_total);
            if (std::abs(fx_total - previous) / std::max(1.0, std::abs(previous)) < config.tol) {
                report.converged = true;
                break;
            }
        } else {
            report.objective_trace.push_back(fx_total);
            if (y_is_x) {
                // A plain step from the retained point cannot improve it any further.
                report.converged = true;
                break;
            }
            ++report.restarts;
            y = x;
            y_is_x = true;
            t = 1.0;
        }
    }

    report.final_w = std::move(x);
    report.final_step = step;
    return report;
}

} // namespace grmtl
