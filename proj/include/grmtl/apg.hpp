#pragma once

#include "grmtl/prox.hpp"
#include "grmtl/types.hpp"

#include <cstdint>
#include <vector>

namespace grmtl {

struct OptimizerConfig {
    int max_iters = 1000;
    // Stop once |F_m - F_{m-1}| / max(1, |F_{m-1}|) falls below this.
    double tol = 1e-6;
    double initial_step = 1.0;
    double backtrack_factor = 0.5;
    // The solver is deterministic; the seed only travels into reports.
    std::uint64_t seed = 42;
    // false gives plain proximal gradient (ISTA) with the same line search.
    bool accelerated = true;

    void validate() const;
};

struct SolveReport {
    Matrix final_w;
    // Objective of the retained iterate after every iteration; non-increasing.
    std::vector<double> objective_trace;
    int iterations_used = 0;
    bool converged = false;
    double final_step = 0.0;
    int restarts = 0;
};

// Monotone FISTA on F = f + g with backtracking. A candidate that raises F is
// discarded and the momentum restarts from the retained iterate, so the
// returned point is always the best one seen.
SolveReport solve_apg(const SmoothObjective& f, const ProxTerm& g, const Matrix& w0,
                      const OptimizerConfig& config = {});

} // namespace grmtl
