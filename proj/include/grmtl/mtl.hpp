#pragma once

#include "grmtl/apg.hpp"
#include "grmtl/dataset.hpp"
#include "grmtl/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace grmtl {

/// d x M coefficients, one column per task, plus a per-task offset added at
/// prediction time (zero unless the caller centred the targets).
struct WeightMatrix {
    Matrix w;
    std::vector<std::string> task_names;
    Vector intercepts;

    Index task_index(std::string_view name) const;
    void validate() const;
};

/// Task graph as an M x |E| incidence matrix. Edge (a, b) puts +1 in row a and
/// -1 in row b of its column; laplacian = S S^T.
struct StructureMatrix {
    Index num_tasks = 0;
    std::vector<std::pair<Index, Index>> edges;
    Matrix incidence;
    Matrix laplacian;

    static StructureMatrix from_edges(Index num_tasks, std::vector<std::pair<Index, Index>> edges);
    Index num_edges() const noexcept { return static_cast<Index>(edges.size()); }
};

struct RegularizationConfig {
    double rho1 = 1.0;
    double rho2 = 10.0;
    double rho_trace = 1.0;
    double corr_threshold = 0.5;

    void validate() const;
};

struct InconsistencyVector {
    Vector psi;
};

// exp(sum_r (x_r - mean)^2 / (2 * sd)) with the population standard
// deviation; 1 when all raters agree.
double inconsistency_score(std::span<const double> scores);
InconsistencyVector inconsistency_scores(const RaterScores& raw);

// ||W S||_F^2, cross-checked against tr(W L W^T).
double graph_penalty(const Matrix& w, const StructureMatrix& structure);

/// Design, targets and per-sample inconsistency offsets for one task.
struct TaskData {
    Matrix x;
    Vector y;
    // Empty means no offset; otherwise psi(j) is added to every feature of row j.
    Vector psi;

    Matrix effective_design() const;
};

// argmin ||X w - y||^2 + rho2 ||w||_1
Vector fit_lasso(const Matrix& x, const Vector& y, double rho2, const OptimizerConfig& config = {});
// (X^T X + rho2 I)^{-1} X^T y; throws on a singular system.
Vector fit_ridge(const Matrix& x, const Vector& y, double rho2);

// argmin sum_i ||X_i W_i - Y_i||^2 + rho_trace ||W||_*
WeightMatrix fit_trace_mtl(const std::vector<TaskData>& tasks, double rho_trace,
                           std::vector<std::string> task_names = {}, const OptimizerConfig& config = {});

struct StructureEstimate {
    StructureMatrix structure;
    // Pearson correlation between the unit-normalized lasso columns.
    Matrix correlation;
    Matrix normalized_w;
    // Tasks whose lasso fit was identically zero (or constant); they get no edges.
    std::vector<Index> inactive_tasks;
};

// Per-task lasso on the shared design, column normalization, correlation and
// thresholding at |corr| >= corr_threshold. `mask`, when non-empty, selects
// the rows used for each task (n x M).
StructureEstimate estimate_structure(const Matrix& x, const Matrix& y, double rho2, double corr_threshold,
                                     const OptimizerConfig& config = {},
                                     const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask = {});

// Smooth part sum_i ||(X_i + Psi_i) W_i - Y_i||^2 + rho1 ||W S||_F^2.
SmoothObjective graph_mtl_smooth(const std::vector<TaskData>& tasks, const StructureMatrix& structure, double rho1);
// Full objective including rho2 ||W||_1.
double graph_mtl_objective(const std::vector<TaskData>& tasks, const StructureMatrix& structure, double rho1,
                           double rho2, const Matrix& w);

WeightMatrix fit_graph_sparse_mtl(const std::vector<TaskData>& tasks, const StructureMatrix& structure,
                                  double rho1, double rho2, std::vector<std::string> task_names = {},
                                  const OptimizerConfig& config = {});

Vector predict_scores(const Matrix& x_test, const WeightMatrix& weights, std::string_view task);

} // namespace grmtl
