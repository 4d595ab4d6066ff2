#include "grmtl/mtl.hpp"
#include "grmtl/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace grmtl {

Index WeightMatrix::task_index(std::string_view name) const {
    auto it = std::find(task_names.begin(), task_names.end(), name);
    if (it == task_names.end())
        throw Error(ErrorKind::Domain, "unknown task '" + std::string(name) + "'");
    return static_cast<Index>(it - task_names.begin());
}

void WeightMatrix::validate() const {
    if (static_cast<Index>(task_names.size()) != w.cols())
        throw Error(ErrorKind::Shape, "weight matrix: task name count differs from columns");
    if (intercepts.size() != w.cols())
        throw Error(ErrorKind::Shape, "weight matrix: intercept count differs from columns");
    if (!w.allFinite() || !intercepts.allFinite())
        throw Error(ErrorKind::Numeric, "weight matrix has non-finite entries");
}

StructureMatrix StructureMatrix::from_edges(Index num_tasks, std::vector<std::pair<Index, Index>> edges) {
    if (num_tasks < 1)
        throw Error(ErrorKind::Domain, "structure matrix needs at least one task");
    StructureMatrix s;
    s.num_tasks = num_tasks;
    s.incidence = Matrix::Zero(num_tasks, static_cast<Index>(edges.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [a, b] = edges[e];
        if (a < 0 || b < 0 || a >= num_tasks || b >= num_tasks || a == b)
            throw Error(ErrorKind::Domain, "structure matrix: invalid edge (" + std::to_string(a) + ", " +
                                               std::to_string(b) + ")");
        s.incidence(a, static_cast<Index>(e)) = 1.0;
        s.incidence(b, static_cast<Index>(e)) = -1.0;
    }
    s.edges = std::move(edges);
    s.laplacian = s.incidence * s.incidence.transpose();
    return s;
}

void RegularizationConfig::validate() const {
    if (!(rho1 >= 0.0) || !(rho2 >= 0.0) || !(rho_trace >= 0.0))
        throw Error(ErrorKind::Domain, "regularization weights must be non-negative");
    if (!(corr_threshold >= 0.0 && corr_threshold <= 1.0))
        throw Error(ErrorKind::Domain, "corr_threshold must lie in [0, 1]");
}

double inconsistency_score(std::span<const double> scores) {
    if (scores.empty())
        throw Error(ErrorKind::Domain, "inconsistency score needs at least one rater score");
    const double count = static_cast<double>(scores.size());
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / count;
    double sum_sq = 0.0;
    for (double s : scores)
        sum_sq += (s - mean) * (s - mean);
    const double sd = std::sqrt(sum_sq / count);
    if (sd == 0.0)
        return 1.0;
    const double psi = std::exp(sum_sq / (2.0 * sd));
    if (!std::isfinite(psi))
        throw Error(ErrorKind::Numeric, "inconsistency score overflowed");
    return psi;
}

InconsistencyVector inconsistency_scores(const RaterScores& raw) {
    InconsistencyVector out;
    out.psi.resize(raw.rows());
    for (Index i = 0; i < raw.rows(); ++i) {
        const auto scores = raw.row_scores(i);
        if (scores.empty())
            throw Error(ErrorKind::Domain, "task '" + raw.task_name + "': sample '" +
                                               raw.sample_ids[static_cast<std::size_t>(i)] +
                                               "' has no present scores");
        out.psi(i) = inconsistency_score(scores);
    }
    return out;
}

double graph_penalty(const Matrix& w, const StructureMatrix& structure) {
    if (w.cols() != structure.num_tasks)
        throw Error(ErrorKind::Shape, "graph_penalty: W has " + std::to_string(w.cols()) +
                                          " columns but the structure has " +
                                          std::to_string(structure.num_tasks) + " tasks");
    if (structure.edges.empty())
        return 0.0;
    const double direct = (w * structure.incidence).squaredNorm();
    const double trace = (w * structure.laplacian * w.transpose()).trace();
    if (std::abs(direct - trace) > 1e-10 * std::max(1.0, std::abs(direct)))
        throw Error(ErrorKind::Numeric, "graph_penalty: ||WS||_F^2 and tr(W L W^T) disagree");
    return direct;
}

Matrix TaskData::effective_design() const {
    if (psi.size() == 0)
        return x;
    if (psi.size() != x.rows())
        throw Error(ErrorKind::Shape, "task data: psi length differs from design rows");
    if (!psi.allFinite())
        throw Error(ErrorKind::Numeric, "task data: psi has non-finite entries");
    return x.colwise() + psi;
}

namespace {

void check_design(const Matrix& x, const Vector& y, const char* what) {
    if (x.rows() != y.size())
        throw Error(ErrorKind::Shape, std::string(what) + ": design has " + std::to_string(x.rows()) +
                                          " rows but target has " + std::to_string(y.size()));
    if (x.rows() < 1 || x.cols() < 1)
        throw Error(ErrorKind::Shape, std::string(what) + ": empty design");
    if (!x.allFinite() || !y.allFinite())
        throw Error(ErrorKind::Numeric, std::string(what) + ": non-finite input");
}

Index common_width(const std::vector<TaskData>& tasks, const char* what) {
    if (tasks.empty())
        throw Error(ErrorKind::Domain, std::string(what) + ": no tasks");
    const Index d = tasks.front().x.cols();
    for (const auto& t : tasks) {
        if (t.x.cols() != d)
            throw Error(ErrorKind::Shape, std::string(what) + ": tasks disagree on feature dimension");
        check_design(t.x, t.y, what);
    }
    return d;
}

std::vector<std::string> resolve_names(std::vector<std::string> names, std::size_t m) {
    if (names.empty())
        for (std::size_t i = 0; i < m; ++i)
            names.push_back("task" + std::to_string(i));
    if (names.size() != m)
        throw Error(ErrorKind::Shape, "task name count differs from task count");
    return names;
}

// Squared loss summed over tasks on the (already offset) designs.
struct StackedLoss {
    std::vector<Matrix> designs;
    std::vector<Vector> targets;

    double value(const Matrix& w) const {
        double total = 0.0;
        for (std::size_t i = 0; i < designs.size(); ++i)
            total += (designs[i] * w.col(static_cast<Index>(i)) - targets[i]).squaredNorm();
        return total;
    }

    Matrix gradient(const Matrix& w) const {
        Matrix g(w.rows(), w.cols());
        for (std::size_t i = 0; i < designs.size(); ++i) {
            const auto col = static_cast<Index>(i);
            g.col(col) = 2.0 * designs[i].transpose() * (designs[i] * w.col(col) - targets[i]);
        }
        return g;
    }
};

StackedLoss stack(const std::vector<TaskData>& tasks, bool with_psi) {
    StackedLoss loss;
    for (const auto& t : tasks) {
        loss.designs.push_back(with_psi ? t.effective_design() : t.x);
        loss.targets.push_back(t.y);
    }
    return loss;
}

} // namespace

Vector fit_lasso(const Matrix& x, const Vector& y, double rho2, const OptimizerConfig& config) {
    check_design(x, y, "fit_lasso");
    if (!(rho2 >= 0.0))
        throw Error(ErrorKind::Domain, "fit_lasso: rho2 must be non-negative");
    const SmoothObjective f{
        [&](const Matrix& w) { return (x * w - y).squaredNorm(); },
        [&](const Matrix& w) -> Matrix { return 2.0 * x.transpose() * (x * w - y); },
    };
    const auto report = solve_apg(f, l1_term(rho2), Matrix::Zero(x.cols(), 1), config);
    return report.final_w.col(0);
}

Vector fit_ridge(const Matrix& x, const Vector& y, double rho2) {
    check_design(x, y, "fit_ridge");
    if (!(rho2 >= 0.0))
        throw Error(ErrorKind::Domain, "fit_ridge: rho2 must be non-negative");
    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += rho2;
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-13)
        throw Error(ErrorKind::Numeric, "fit_ridge: normal equations are singular (add a ridge penalty)");
    return llt.solve(x.transpose() * y);
}

WeightMatrix fit_trace_mtl(const std::vector<TaskData>& tasks, double rho_trace, std::vector<std::string> task_names,
                           const OptimizerConfig& config) {
    const Index d = common_width(tasks, "fit_trace_mtl");
    if (!(rho_trace >= 0.0))
        throw Error(ErrorKind::Domain, "fit_trace_mtl: rho_trace must be non-negative");
    const StackedLoss loss = stack(tasks, false);
    const SmoothObjective f{[&](const Matrix& w) { return loss.value(w); },
                            [&](const Matrix& w) { return loss.gradient(w); }};
    const auto m = static_cast<Index>(tasks.size());
    auto report = solve_apg(f, nuclear_term(rho_trace), Matrix::Zero(d, m), config);
    WeightMatrix out{std::move(report.final_w), resolve_names(std::move(task_names), tasks.size()),
                     Vector::Zero(m)};
    out.validate();
    return out;
}

StructureEstimate estimate_structure(const Matrix& x, const Matrix& y, double rho2, double corr_threshold,
                                     const OptimizerConfig& config,
                                     const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
    const Index m = y.cols();
    if (m < 2)
        throw Error(ErrorKind::Domain, "estimate_structure: needs at least two tasks");
    if (y.rows() != x.rows())
        throw Error(ErrorKind::Shape, "estimate_structure: targets and design disagree on rows");
    if (mask.size() != 0 && (mask.rows() != y.rows() || mask.cols() != m))
        throw Error(ErrorKind::Shape, "estimate_structure: mask shape differs from targets");
    if (!(corr_threshold >= 0.0 && corr_threshold <= 1.0))
        throw Error(ErrorKind::Domain, "estimate_structure: corr_threshold must lie in [0, 1]");

    StructureEstimate out;
    out.normalized_w = Matrix::Zero(x.cols(), m);
    std::vector<bool> active(static_cast<std::size_t>(m), false);
    for (Index t = 0; t < m; ++t) {
        Vector w;
        if (mask.size() == 0) {
            w = fit_lasso(x, y.col(t), rho2, config);
        } else {
            std::vector<Index> rows;
            for (Index i = 0; i < x.rows(); ++i)
                if (mask(i, t))
                    rows.push_back(i);
            if (rows.empty())
                w = Vector::Zero(x.cols());
            else
                w = fit_lasso(select_rows(x, rows), select_rows(Vector(y.col(t)), rows), rho2, config);
        }
        const double norm = w.norm();
        if (norm > 0.0) {
            out.normalized_w.col(t) = w / norm;
            const Vector centred = out.normalized_w.col(t).array() - out.normalized_w.col(t).mean();
            active[static_cast<std::size_t>(t)] = centred.norm() > 1e-12;
        }
        if (!active[static_cast<std::size_t>(t)])
            out.inactive_tasks.push_back(t);
    }

    out.correlation = Matrix::Identity(m, m);
    Matrix centred = out.normalized_w.rowwise() - out.normalized_w.colwise().mean();
    for (Index t = 0; t < m; ++t) {
        const double n = centred.col(t).norm();
        if (n > 0.0)
            centred.col(t) /= n;
    }
    std::vector<std::pair<Index, Index>> edges;
    for (Index a = 0; a < m; ++a) {
        for (Index b = a + 1; b < m; ++b) {
            const bool both = active[static_cast<std::size_t>(a)] && active[static_cast<std::size_t>(b)];
            const double corr = both ? std::clamp(centred.col(a).dot(centred.col(b)), -1.0, 1.0) : 0.0;
            out.correlation(a, b) = out.correlation(b, a) = corr;
            if (both && std::abs(corr) >= corr_threshold)
                edges.emplace_back(a, b);
        }
    }
    out.structure = StructureMatrix::from_edges(m, std::move(edges));
    return out;
}

SmoothObjective graph_mtl_smooth(const std::vector<TaskData>& tasks, const StructureMatrix& structure, double rho1) {
    common_width(tasks, "graph_mtl_smooth");
    if (structure.num_tasks != static_cast<Index>(tasks.size()))
        throw Error(ErrorKind::Shape, "graph_mtl_smooth: structure covers " + std::to_string(structure.num_tasks) +
                                          " tasks but " + std::to_string(tasks.size()) + " were given");
    if (!(rho1 >= 0.0))
        throw Error(ErrorKind::Domain, "graph_mtl_smooth: rho1 must be non-negative");
    auto loss = std::make_shared<const StackedLoss>(stack(tasks, true));
    auto s = std::make_shared<const StructureMatrix>(structure);
    return {
        [loss, s, rho1](const Matrix& w) {
            double v = loss->value(w);
            if (rho1 > 0.0 && !s->edges.empty())
                v += rho1 * (w * s->incidence).squaredNorm();
            return v;
        },
        [loss, s, rho1](const Matrix& w) -> Matrix {
            Matrix g = loss->gradient(w);
            if (rho1 > 0.0 && !s->edges.empty())
                g += 2.0 * rho1 * w * s->laplacian;
            return g;
        },
    };
}

double graph_mtl_objective(const std::vector<TaskData>& tasks, const StructureMatrix& structure, double rho1,
                           double rho2, const Matrix& w) {
    return graph_mtl_smooth(tasks, structure, rho1).value(w) + rho2 * l1_norm(w);
}

WeightMatrix fit_graph_sparse_mtl(const std::vector<TaskData>& tasks, const StructureMatrix& structure, double rho1,
                                  double rho2, std::vector<std::string> task_names, const OptimizerConfig& config) {
    const Index d = common_width(tasks, "fit_graph_sparse_mtl");
    if (!(rho2 >= 0.0))
        throw Error(ErrorKind::Domain, "fit_graph_sparse_mtl: rho2 must be non-negative");
    const SmoothObjective f = graph_mtl_smooth(tasks, structure, rho1);
    const auto m = static_cast<Index>(tasks.size());
    auto report = solve_apg(f, l1_term(rho2), Matrix::Zero(d, m), config);
    WeightMatrix out{std::move(report.final_w), resolve_names(std::move(task_names), tasks.size()),
                     Vector::Zero(m)};
    out.validate();
    return out;
}

Vector predict_scores(const Matrix& x_test, const WeightMatrix& weights, std::string_view task) {
    const Index t = weights.task_index(task);
    if (x_test.cols() != weights.w.rows())
        throw Error(ErrorKind::Shape, "predict_scores: test features have " + std::to_string(x_test.cols()) +
                                          " columns, model expects " + std::to_string(weights.w.rows()));
    const double offset = weights.intercepts.size() == weights.w.cols() ? weights.intercepts(t) : 0.0;
    return (x_test * weights.w.col(t)).array() + offset;
}

} // namespace grmtl
