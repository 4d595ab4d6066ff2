#include "grmtl/pipeline.hpp"
#include "grmtl/error.hpp"
#include "grmtl/metrics.hpp"
#include "grmtl/mtl.hpp"
#include "grmtl/propsvm.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace fs = std::filesystem;

namespace grmtl {

namespace {

const std::vector<std::string> kMtlBaselines{"lasso", "ridge", "trace"};
const std::vector<std::string> kPropSvmBaselines{"clustering", "clustering+svm"};

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json scale_json(const ScoreScale& s) { return Json{{"min", s.min}, {"max", s.max}}; }

ScoreScale scale_from_json(const Json& j) {
    ScoreScale s;
    if (j.is_array() && j.size() == 2) {
        s.min = j[0].get<int>();
        s.max = j[1].get<int>();
    } else {
        s.min = j.at("min").get<int>();
        s.max = j.at("max").get<int>();
    }
    return s;
}

Json optimizer_json(const OptimizerConfig& c) {
    return Json{{"max_iters", c.max_iters},
                {"tol", c.tol},
                {"initial_step", c.initial_step},
                {"backtrack_factor", c.backtrack_factor},
                {"accelerated", c.accelerated}};
}

Json mtl_synth_json(const MtlSynthParams& p) {
    return Json{{"n", p.n},           {"d", p.d},           {"tasks", p.tasks},
                {"support_fraction", p.support_fraction},   {"rank", p.rank},
                {"groups", p.groups}, {"task_spread", p.task_spread},
                {"noise", p.noise},   {"offset", p.offset}};
}

Json llp_synth_json(const LlpSynthParams& p) {
    return Json{{"n", p.n},
                {"d", p.d},
                {"separation", p.separation},
                {"spread", p.spread},
                {"negative_spread", p.negative_spread},
                {"positive_fraction", p.positive_fraction},
                {"flip", p.flip}};
}

// Assigns j[key] to `field` when present and records the key as known.
class Reader {
public:
    explicit Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object())
            throw Error(ErrorKind::Parse, where_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& field) {
        known_.insert(key);
        if (j_.contains(key))
            field = j_.at(key).get<T>();
    }

    void custom(const char* key, const std::function<void(const Json&)>& apply) {
        known_.insert(key);
        if (j_.contains(key))
            apply(j_.at(key));
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!known_.count(item.key()))
                throw Error(ErrorKind::Parse, where_ + ": unknown key '" + item.key() + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> known_;
};

fs::path out_dir(const RunConfig& config) {
    const fs::path dir(config.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorKind::Io, "cannot create output directory '" + config.out + "'");
    return dir;
}

std::vector<std::string> missing_from(const std::vector<std::string>& ids, const std::set<std::string>& pool) {
    std::vector<std::string> out;
    for (const auto& id : ids)
        if (!pool.count(id))
            out.push_back(id);
    return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
    std::string out;
    const std::size_t limit = 20;
    for (std::size_t i = 0; i < ids.size() && i < limit; ++i)
        out += (i ? ", " : "") + ids[i];
    if (ids.size() > limit)
        out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

// Row order of `ids` inside `reference`; every id must appear in both directions.
std::vector<Index> align_ids(const std::vector<std::string>& reference, const std::vector<std::string>& ids,
                             const std::string& what_ref, const std::string& what) {
    const std::set<std::string> ref_set(reference.begin(), reference.end());
    const std::set<std::string> id_set(ids.begin(), ids.end());
    const auto absent = missing_from(ids, ref_set);
    const auto uncovered = missing_from(reference, id_set);
    std::string problems;
    if (!absent.empty())
        problems = what + " ids missing from " + what_ref + ": " + list_ids(absent);
    if (!uncovered.empty())
        problems += (problems.empty() ? "" : "; ") + what_ref + " ids missing from " + what + ": " + list_ids(uncovered);
    if (!problems.empty())
        throw Error(ErrorKind::Domain, problems);
    std::map<std::string, Index> pos;
    for (std::size_t i = 0; i < ids.size(); ++i)
        pos.emplace(ids[i], static_cast<Index>(i));
    std::vector<Index> order;
    for (const auto& id : reference)
        order.push_back(pos.at(id));
    return order;
}

std::vector<std::string> resolve_baselines(const RunConfig& config, const std::vector<std::string>& allowed) {
    std::vector<std::string> list = config.baselines.value_or(allowed);
    for (const auto& b : list)
        if (std::find(allowed.begin(), allowed.end(), b) == allowed.end())
            throw Error(ErrorKind::Parse, "unknown baseline '" + b + "' for " + config.command);
    return list;
}

Json weights_to_rows(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

Json edges_json(const StructureMatrix& s) {
    Json edges = Json::array();
    for (const auto& [a, b] : s.edges)
        edges.push_back(Json::array({a, b}));
    return edges;
}

/// Per-method prediction records in evaluation order.
struct MethodRun {
    std::string name;
    std::vector<std::string> ids;
    std::vector<int> folds;
    std::vector<double> predictions;
    std::vector<double> truth;
    std::vector<EvalReport> fold_reports;
};

EvalReport direct_report(const MethodRun& run, EvalReport::Mode mode) {
    EvalReport report;
    if (mode == EvalReport::Mode::Regression) {
        report = regression_report(run.predictions, run.truth);
    } else {
        std::vector<int> p(run.predictions.begin(), run.predictions.end());
        std::vector<int> t(run.truth.begin(), run.truth.end());
        report = binary_report(p, t);
    }
    if (!run.fold_reports.empty()) {
        const EvalReport pooled = aggregate_cv(run.fold_reports);
        report.per_fold = pooled.per_fold;
        report.macro_average = pooled.macro_average;
    }
    return report;
}

Json method_json(const MethodRun& run, const EvalReport& report, const std::string& file) {
    Json records = Json::array();
    for (std::size_t i = 0; i < run.ids.size(); ++i)
        records.push_back(Json{{"id", run.ids[i]},
                               {"fold", run.folds[i]},
                               {"prediction", run.predictions[i]},
                               {"truth", run.truth[i]}});
    return Json{{"evaluation", to_json(report)}, {"predictions_file", file}, {"predictions", records}};
}

void write_method_files(const fs::path& dir, const MethodRun& run) {
    save_values(dir / ("predictions_" + run.name + ".csv"), run.ids, run.predictions, "prediction");
}

Json finish_report(const RunConfig& resolved, Json body, const fs::path& dir) {
    Json report;
    report["command"] = resolved.command;
    report["generated_at"] = utc_timestamp();
    report["config"] = to_json(resolved);
    for (auto& item : body.items())
        report[item.key()] = std::move(item.value());
    write_json(dir / "report.json", report);
    return report;
}

// ---- train-mtl -------------------------------------------------------------

struct MtlProblem {
    FeatureMatrix features;  // supervised rows only
    std::vector<std::string> task_names;
    Index primary = 0;
    Matrix targets;           // regression targets per task (attributes: +-1 labels when from raters)
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
    Matrix psi;               // empty when unused
    Matrix primary_scores;    // n x 1 mean primary score, the evaluated truth
    Labels strata;            // empty: unstratified
    std::vector<std::string> excluded;
    std::string source;
};

MtlProblem load_mtl_problem(const RunConfig& config, std::string& primary_name) {
    if (config.features.empty())
        throw Error(ErrorKind::Domain, "train-mtl needs --features");
    if (config.raters.empty() == config.targets.empty())
        throw Error(ErrorKind::Domain, "train-mtl needs exactly one of --raters or --targets");
    const FeatureMatrix all = load_features(config.features);
    MtlProblem p;
    std::vector<Index> keep;

    if (!config.raters.empty()) {
        p.source = "raters";
        const auto raters = load_raters(config.raters, config.scales, config.default_scale);
        if (primary_name.empty()) {
            const bool has_malignancy = std::any_of(raters.begin(), raters.end(),
                                                    [](const RaterScores& r) { return r.task_name == "malignancy"; });
            primary_name = has_malignancy || raters.empty() ? "malignancy" : raters.front().task_name;
        }
        TargetOptions options;
        options.primary_task = primary_name;
        options.min_raters = config.min_raters;
        options.exclude_primary_pivot = config.exclude_primary_pivot;
        const TaskTargets tt = build_task_targets(raters, all.sample_ids, options);
        p.task_names = tt.task_names;
        p.primary = tt.task_index(primary_name);
        for (Index i = 0; i < all.rows(); ++i) {
            if (tt.mask(i, p.primary))
                keep.push_back(i);
            else
                p.excluded.push_back(all.sample_ids[static_cast<std::size_t>(i)]);
        }
        if (keep.empty())
            throw Error(ErrorKind::Domain, "no samples pass the inclusion rules for task '" + primary_name + "'");
        const auto n = static_cast<Index>(keep.size());
        const Index m = tt.num_tasks();
        p.targets.resize(n, m);
        p.mask.resize(n, m);
        p.psi.resize(n, m);
        p.primary_scores.resize(n, 1);
        for (Index r = 0; r < n; ++r) {
            const Index i = keep[static_cast<std::size_t>(r)];
            for (Index t = 0; t < m; ++t) {
                p.mask(r, t) = tt.mask(i, t);
                p.targets(r, t) = t == p.primary ? tt.targets(i, t) : static_cast<double>(tt.binary_labels(i, t));
                const auto scores = tt.raters[static_cast<std::size_t>(t)].row_scores(i);
                p.psi(r, t) = scores.empty() ? 1.0 : inconsistency_score(scores);
            }
            p.primary_scores(r, 0) = tt.targets(i, p.primary);
            p.strata.push_back(tt.binary_labels(i, p.primary));
        }
        if (!config.use_psi)
            p.psi.resize(0, 0);
    } else {
        p.source = "targets";
        const TargetTable table = load_targets(config.targets);
        const auto order = align_ids(all.sample_ids, table.sample_ids, "features", "targets");
        if (primary_name.empty())
            primary_name = table.task_names.front();
        const auto it = std::find(table.task_names.begin(), table.task_names.end(), primary_name);
        if (it == table.task_names.end())
            throw Error(ErrorKind::Domain, "targets file has no column '" + primary_name + "'");
        p.task_names = table.task_names;
        p.primary = static_cast<Index>(it - table.task_names.begin());
        for (Index i = 0; i < all.rows(); ++i) {
            if (table.mask(order[static_cast<std::size_t>(i)], p.primary))
                keep.push_back(i);
            else
                p.excluded.push_back(all.sample_ids[static_cast<std::size_t>(i)]);
        }
        if (keep.empty())
            throw Error(ErrorKind::Domain, "no samples have a value for task '" + primary_name + "'");
        const auto n = static_cast<Index>(keep.size());
        const auto m = static_cast<Index>(p.task_names.size());
        p.targets.resize(n, m);
        p.mask.resize(n, m);
        p.primary_scores.resize(n, 1);
        for (Index r = 0; r < n; ++r) {
            const Index row = order[static_cast<std::size_t>(keep[static_cast<std::size_t>(r)])];
            for (Index t = 0; t < m; ++t) {
                p.targets(r, t) = table.targets(row, t);
                p.mask(r, t) = table.mask(row, t);
            }
            p.primary_scores(r, 0) = table.targets(row, p.primary);
        }
    }
    p.features = all.subset(keep);
    return p;
}

struct FoldFit {
    WeightMatrix graph;
    StructureEstimate structure;
    Standardizer standardizer;
    std::map<std::string, Vector> baseline_predictions;
    Vector graph_predictions;
    double objective = 0.0;
};

// Fits every requested model on `train` rows and predicts the primary task on `test` rows.
FoldFit fit_mtl_fold(const MtlProblem& p, const RunConfig& config, const std::vector<std::string>& baselines,
                     const std::vector<Index>& train, const std::vector<Index>& test) {
    FoldFit fit;
    const Matrix x_raw = select_rows(p.features.data, train);
    fit.standardizer = config.standardize ? Standardizer::fit(x_raw)
                                          : Standardizer{Vector::Zero(x_raw.cols()), Vector::Ones(x_raw.cols())};
    const Matrix x = fit.standardizer.apply(x_raw);
    const auto m = static_cast<Index>(p.task_names.size());
    const auto n = static_cast<Index>(train.size());

    Matrix y = Matrix::Zero(n, m);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask(n, m);
    Vector means = Vector::Zero(m);
    std::vector<TaskData> tasks(static_cast<std::size_t>(m));
    std::vector<TaskData> plain(static_cast<std::size_t>(m));
    for (Index t = 0; t < m; ++t) {
        std::vector<Index> rows;
        for (Index r = 0; r < n; ++r) {
            mask(r, t) = p.mask(train[static_cast<std::size_t>(r)], t);
            if (mask(r, t))
                rows.push_back(r);
        }
        if (rows.empty())
            throw Error(ErrorKind::Domain, "task '" + p.task_names[static_cast<std::size_t>(t)] +
                                               "' has no training rows in a fold");
        double sum = 0.0;
        for (Index r : rows)
            sum += p.targets(train[static_cast<std::size_t>(r)], t);
        means(t) = sum / static_cast<double>(rows.size());
        Vector yt(static_cast<Index>(rows.size()));
        Vector psi_t(p.psi.size() ? static_cast<Index>(rows.size()) : 0);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const Index src = train[static_cast<std::size_t>(rows[k])];
            yt(static_cast<Index>(k)) = p.targets(src, t) - means(t);
            y(rows[k], t) = yt(static_cast<Index>(k));
            if (p.psi.size())
                psi_t(static_cast<Index>(k)) = p.psi(src, t);
        }
        const Matrix xt = select_rows(x, rows);
        tasks[static_cast<std::size_t>(t)] = TaskData{xt, yt, psi_t};
        plain[static_cast<std::size_t>(t)] = TaskData{xt, yt, Vector()};
    }

    if (m >= 2)
        fit.structure = estimate_structure(x, y, config.rho2, config.corr_threshold, config.optimizer, mask);
    else
        fit.structure.structure = StructureMatrix::from_edges(m, {});
    fit.graph = fit_graph_sparse_mtl(tasks, fit.structure.structure, config.rho1, config.rho2, p.task_names,
                                     config.optimizer);
    fit.graph.intercepts = means;
    fit.objective = graph_mtl_objective(tasks, fit.structure.structure, config.rho1, config.rho2, fit.graph.w);

    if (test.empty())
        return fit;
    const Matrix x_test = fit.standardizer.apply(select_rows(p.features.data, test));
    const auto& primary_name = p.task_names[static_cast<std::size_t>(p.primary)];
    fit.graph_predictions = predict_scores(x_test, fit.graph, primary_name);
    const TaskData& prim = plain[static_cast<std::size_t>(p.primary)];
    const double offset = means(p.primary);
    for (const auto& b : baselines) {
        Vector pred;
        if (b == "lasso") {
            pred = x_test * fit_lasso(prim.x, prim.y, config.rho2, config.optimizer);
        } else if (b == "ridge") {
            pred = x_test * fit_ridge(prim.x, prim.y, config.rho2);
        } else {
            const WeightMatrix tw = fit_trace_mtl(plain, config.rho_trace, p.task_names, config.optimizer);
            pred = x_test * tw.w.col(p.primary);
        }
        fit.baseline_predictions[b] = pred.array() + offset;
    }
    return fit;
}

void append_fold(MethodRun& run, const MtlProblem& p, const std::vector<Index>& test, const Vector& pred, int fold) {
    std::vector<double> fold_pred, fold_truth;
    for (std::size_t k = 0; k < test.size(); ++k) {
        const Index r = test[k];
        run.ids.push_back(p.features.sample_ids[static_cast<std::size_t>(r)]);
        run.folds.push_back(fold);
        run.predictions.push_back(pred(static_cast<Index>(k)));
        run.truth.push_back(p.primary_scores(r, 0));
        fold_pred.push_back(pred(static_cast<Index>(k)));
        fold_truth.push_back(p.primary_scores(r, 0));
    }
    run.fold_reports.push_back(regression_report(fold_pred, fold_truth));
}

// ---- train-propsvm ---------------------------------------------------------

struct PropSvmFold {
    std::vector<int> predicted_clusters;
    std::map<std::string, std::vector<int>> baseline_clusters;
    Json diagnostics;
};

Json bag_summary(const BagSet& bags) {
    Json out = Json::array();
    for (std::size_t v = 0; v < bags.bags.size(); ++v) {
        const auto [lo, hi] = bags.positive_count_range(v);
        out.push_back(Json{{"size", bags.bags[v].size()},
                           {"proportion", bags.proportions[v]},
                           {"global_fraction", bags.global_fractions[v]},
                           {"positive_count_range", Json::array({lo, hi})}});
    }
    return out;
}

struct PropSvmFit {
    Standardizer standardizer;
    ClusterModel clusters;
    BagSet bags;
    PropSvmResult result;
    Index synthetic = 0;
};

// Clustering, bag construction and the proportion SVM on unlabeled rows.
PropSvmFit fit_propsvm_unlabeled(const Matrix& x_raw, const RunConfig& config) {
    PropSvmFit fit;
    fit.standardizer = config.standardize ? Standardizer::fit(x_raw)
                                          : Standardizer{Vector::Zero(x_raw.cols()), Vector::Ones(x_raw.cols())};
    Matrix x = fit.standardizer.apply(x_raw);
    fit.clusters = kmeans(x, 2, config.seed);
    std::vector<int> assignment = fit.clusters.assignment;
    Labels init = cluster_labels(assignment, 1);
    if (config.adasyn) {
        FeatureMatrix fm;
        fm.data = x;
        for (Index i = 0; i < x.rows(); ++i)
            fm.sample_ids.push_back(std::to_string(i));
        const Resampled res = adasyn_rebalance(fm, init, config.adasyn_k, config.seed);
        x = res.features.data;
        init = res.labels;
        fit.synthetic = res.synthetic_count;
        assignment.clear();
        for (int c : init)
            assignment.push_back(c == 1 ? 1 : 0);
    }
    fit.bags = label_proportions(assignment, 1, config.epsilon);
    fit.result = fit_propsvm_multistart(x, fit.bags, init, config.cost, config.max_outer_iters, config.restart_levels);
    return fit;
}

Json propsvm_diagnostics(const PropSvmFit& fit) {
    Json trace = Json::array();
    for (double v : fit.result.objective_trace)
        trace.push_back(v);
    return Json{{"cluster_inertia", fit.clusters.inertia},
                {"kmeans_iterations", fit.clusters.iterations},
                {"bags", bag_summary(fit.bags)},
                {"synthetic_samples", fit.synthetic},
                {"outer_iterations", fit.result.outer_iterations},
                {"converged", fit.result.converged},
                {"start_index", fit.result.start_index},
                {"starts_tried", fit.result.starts_tried},
                {"objective_trace", trace}};
}

std::vector<int> to_clusters(const Labels& labels) {
    std::vector<int> out;
    for (int l : labels)
        out.push_back(l == 1 ? 1 : 0);
    return out;
}

} // namespace

// ---- RunConfig -------------------------------------------------------------

void RunConfig::validate() const {
    if (!(rho1 >= 0.0) || !(rho2 >= 0.0) || !(rho_trace >= 0.0))
        throw Error(ErrorKind::Domain, "regularization weights must be non-negative");
    if (!(corr_threshold >= 0.0 && corr_threshold <= 1.0))
        throw Error(ErrorKind::Domain, "corr_threshold must lie in [0, 1]");
    if (!(cost > 0.0) || !std::isfinite(cost))
        throw Error(ErrorKind::Domain, "cost must be positive");
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw Error(ErrorKind::Domain, "epsilon must lie in [0, 1]");
    if (folds < 2)
        throw Error(ErrorKind::Domain, "folds must be at least 2");
    if (max_outer_iters < 1)
        throw Error(ErrorKind::Domain, "max_outer_iters must be at least 1");
    if (min_raters < 1)
        throw Error(ErrorKind::Domain, "min_raters must be at least 1");
    if (adasyn_k < 1)
        throw Error(ErrorKind::Domain, "adasyn_k must be at least 1");
    if (default_scale.min >= default_scale.max)
        throw Error(ErrorKind::Domain, "default_scale must have min < max");
    for (const auto& [task, s] : scales)
        if (s.min >= s.max)
            throw Error(ErrorKind::Domain, "scale for '" + task + "' must have min < max");
    if (!mode.empty() && mode != "regression" && mode != "binary")
        throw Error(ErrorKind::Parse, "mode must be 'regression' or 'binary'");
    if (synth_kind != "mtl" && synth_kind != "llp")
        throw Error(ErrorKind::Parse, "synth kind must be 'mtl' or 'llp'");
    optimizer.validate();
}

Json to_json(const RunConfig& c) {
    Json scales = Json::object();
    for (const auto& [task, s] : c.scales)
        scales[task] = scale_json(s);
    Json j;
    j["command"] = c.command;
    j["features"] = c.features;
    j["raters"] = c.raters;
    j["targets"] = c.targets;
    j["truth"] = c.truth;
    j["predictions"] = c.predictions;
    j["out"] = c.out;
    j["rho1"] = c.rho1;
    j["rho2"] = c.rho2;
    j["rho_trace"] = c.rho_trace;
    j["corr_threshold"] = c.corr_threshold;
    j["cost"] = c.cost;
    j["epsilon"] = c.epsilon;
    j["max_outer_iters"] = c.max_outer_iters;
    j["restart_levels"] = c.restart_levels;
    j["folds"] = c.folds;
    j["seed"] = c.seed;
    j["stratified"] = c.stratified;
    j["standardize"] = c.standardize;
    j["baselines"] = c.baselines ? Json(*c.baselines) : Json(nullptr);
    j["primary_task"] = c.primary_task;
    j["min_raters"] = c.min_raters;
    j["exclude_primary_pivot"] = c.exclude_primary_pivot;
    j["use_psi"] = c.use_psi;
    j["default_scale"] = scale_json(c.default_scale);
    j["scales"] = scales;
    j["adasyn"] = c.adasyn;
    j["adasyn_k"] = c.adasyn_k;
    j["optimizer"] = optimizer_json(c.optimizer);
    j["mode"] = c.mode;
    j["method"] = c.method;
    j["synth"] = Json{{"kind", c.synth_kind}, {"mtl", mtl_synth_json(c.synth_mtl)}, {"llp", llp_synth_json(c.synth_llp)}};
    return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
    try {
        Reader r(j, "config");
        r.get("command", c.command);
        r.get("features", c.features);
        r.get("raters", c.raters);
        r.get("targets", c.targets);
        r.get("truth", c.truth);
        r.get("predictions", c.predictions);
        r.get("out", c.out);
        r.get("rho1", c.rho1);
        r.get("rho2", c.rho2);
        r.get("rho_trace", c.rho_trace);
        r.get("corr_threshold", c.corr_threshold);
        r.get("cost", c.cost);
        r.get("epsilon", c.epsilon);
        r.get("max_outer_iters", c.max_outer_iters);
        r.get("restart_levels", c.restart_levels);
        r.get("folds", c.folds);
        r.get("seed", c.seed);
        r.get("stratified", c.stratified);
        r.get("standardize", c.standardize);
        r.custom("baselines", [&](const Json& v) {
            if (v.is_null())
                c.baselines.reset();
            else
                c.baselines = v.get<std::vector<std::string>>();
        });
        r.get("primary_task", c.primary_task);
        r.get("min_raters", c.min_raters);
        r.get("exclude_primary_pivot", c.exclude_primary_pivot);
        r.get("use_psi", c.use_psi);
        r.custom("default_scale", [&](const Json& v) { c.default_scale = scale_from_json(v); });
        r.custom("scales", [&](const Json& v) {
            for (const auto& item : v.items())
                c.scales[item.key()] = scale_from_json(item.value());
        });
        r.get("adasyn", c.adasyn);
        r.get("adasyn_k", c.adasyn_k);
        r.custom("optimizer", [&](const Json& v) {
            Reader o(v, "config.optimizer");
            o.get("max_iters", c.optimizer.max_iters);
            o.get("tol", c.optimizer.tol);
            o.get("initial_step", c.optimizer.initial_step);
            o.get("backtrack_factor", c.optimizer.backtrack_factor);
            o.get("accelerated", c.optimizer.accelerated);
            o.finish();
        });
        r.get("mode", c.mode);
        r.get("method", c.method);
        r.custom("synth", [&](const Json& v) {
            Reader s(v, "config.synth");
            s.get("kind", c.synth_kind);
            s.custom("mtl", [&](const Json& m) {
                Reader q(m, "config.synth.mtl");
                q.get("n", c.synth_mtl.n);
                q.get("d", c.synth_mtl.d);
                q.get("tasks", c.synth_mtl.tasks);
                q.get("support_fraction", c.synth_mtl.support_fraction);
                q.get("rank", c.synth_mtl.rank);
                q.get("groups", c.synth_mtl.groups);
                q.get("task_spread", c.synth_mtl.task_spread);
                q.get("noise", c.synth_mtl.noise);
                q.get("offset", c.synth_mtl.offset);
                q.finish();
            });
            s.custom("llp", [&](const Json& m) {
                Reader q(m, "config.synth.llp");
                q.get("n", c.synth_llp.n);
                q.get("d", c.synth_llp.d);
                q.get("separation", c.synth_llp.separation);
                q.get("spread", c.synth_llp.spread);
                q.get("negative_spread", c.synth_llp.negative_spread);
                q.get("positive_fraction", c.synth_llp.positive_fraction);
                q.get("flip", c.synth_llp.flip);
                q.finish();
            });
            s.finish();
        });
        r.finish();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed config: ") + e.what());
    }
    return c;
}

Json strip_timestamp(Json report) {
    report.erase("generated_at");
    return report;
}

// ---- commands --------------------------------------------------------------

Json run_synth(const RunConfig& config) {
    config.validate();
    const fs::path dir = out_dir(config);
    Json manifest{{"command", "synth"}, {"kind", config.synth_kind}, {"seed", config.seed}};
    if (config.synth_kind == "mtl") {
        const MtlSynthData data = synth_mtl(config.synth_mtl, config.seed);
        save_features(dir / "features.csv", data.features);
        save_targets(dir / "targets.csv", data.features.sample_ids, data.task_names, data.targets);
        write_matrix_csv(dir / "planted_W.csv", data.planted_w, data.task_names, data.features.feature_names);
        manifest["params"] = mtl_synth_json(config.synth_mtl);
        manifest["support"] = data.support;
        manifest["files"] = {"features.csv", "targets.csv", "planted_W.csv"};
    } else {
        const LlpSynthData data = synth_llp(config.synth_llp, config.seed);
        save_features(dir / "features.csv", data.features);
        save_values(dir / "truth.csv", data.features.sample_ids,
                    std::vector<double>(data.truth.begin(), data.truth.end()), "label");
        manifest["params"] = llp_synth_json(config.synth_llp);
        manifest["files"] = {"features.csv", "truth.csv"};
    }
    write_json(dir / "manifest.json", manifest);
    return manifest;
}

Json run_train_mtl(const RunConfig& input) {
    RunConfig config = input;
    config.command = "train-mtl";
    config.validate();
    config.baselines = resolve_baselines(config, kMtlBaselines);
    const fs::path dir = out_dir(config);

    MtlProblem p = load_mtl_problem(config, config.primary_task);
    const auto n = p.features.rows();
    if (n < config.folds)
        throw Error(ErrorKind::Domain, "only " + std::to_string(n) + " samples pass the inclusion rules; need at least " +
                                           std::to_string(config.folds) + " for cross-validation");
    const bool stratify = config.stratified && !p.strata.empty();
    const Labels strata = stratify ? p.strata : Labels(static_cast<std::size_t>(n), 1);
    const CvPlan plan = make_cv_plan(strata, config.folds, config.seed, stratify,
                                     stratify ? std::optional<std::string>(config.primary_task) : std::nullopt);

    std::vector<MethodRun> runs;
    runs.push_back(MethodRun{"graph-mtl", {}, {}, {}, {}, {}});
    for (const auto& b : *config.baselines)
        runs.push_back(MethodRun{b, {}, {}, {}, {}, {}});

    Json folds = Json::array();
    for (int f = 0; f < plan.n_folds; ++f) {
        const auto train = plan.train_indices(f);
        const auto test = plan.test_indices(f);
        const FoldFit fit = fit_mtl_fold(p, config, *config.baselines, train, test);
        append_fold(runs[0], p, test, fit.graph_predictions, f);
        for (std::size_t b = 1; b < runs.size(); ++b)
            append_fold(runs[b], p, test, fit.baseline_predictions.at(runs[b].name), f);
        folds.push_back(Json{{"fold", f},
                             {"train_size", train.size()},
                             {"test_size", test.size()},
                             {"edges", edges_json(fit.structure.structure)},
                             {"objective", fit.objective}});
    }

    std::vector<Index> everything(static_cast<std::size_t>(n));
    std::iota(everything.begin(), everything.end(), Index{0});
    const FoldFit final_fit = fit_mtl_fold(p, config, {}, everything, {});
    Json hyper{{"rho1", config.rho1},
               {"rho2", config.rho2},
               {"corr_threshold", config.corr_threshold},
               {"use_psi", config.use_psi && p.psi.size() != 0}};
    write_weights(dir / "model.csv", dir / "model.json", final_fit.graph, hyper);
    {
        Json meta = read_json(dir / "model.json");
        meta["feature_names"] = p.features.feature_names;
        meta["standardizer"] = Json{{"mean", weights_to_rows(final_fit.standardizer.mean)},
                                    {"scale", weights_to_rows(final_fit.standardizer.scale)}};
        meta["edges"] = edges_json(final_fit.structure.structure);
        write_json(dir / "model.json", meta);
    }
    write_structure(dir / "structure.csv", dir / "structure.json", final_fit.structure.structure, p.task_names, hyper);

    Json methods = Json::object();
    Json headline;
    for (const auto& run : runs) {
        const EvalReport report = direct_report(run, EvalReport::Mode::Regression);
        write_method_files(dir, run);
        methods[run.name] = method_json(run, report, "predictions_" + run.name + ".csv");
        if (run.name == "graph-mtl")
            headline = to_json(report);
    }
    save_values(dir / "truth_eval.csv", runs[0].ids, runs[0].truth, "truth");

    Json task_summary = Json::array();
    for (Index t = 0; t < static_cast<Index>(p.task_names.size()); ++t) {
        const bool binary = p.source == "raters" && t != p.primary;
        Index rows = 0, positives = 0;
        for (Index r = 0; r < n; ++r) {
            if (!p.mask(r, t))
                continue;
            ++rows;
            positives += p.targets(r, t) > 0.0;
        }
        Json entry{{"name", p.task_names[static_cast<std::size_t>(t)]},
                   {"kind", binary ? "binary" : "score"},
                   {"rows", rows}};
        entry["positives"] = binary ? Json(positives) : Json(nullptr);
        task_summary.push_back(entry);
    }

    Json body;
    body["data"] = Json{{"source", p.source},
                        {"samples", n + static_cast<Index>(p.excluded.size())},
                        {"features", p.features.cols()},
                        {"supervised_samples", n},
                        {"excluded_ids", p.excluded},
                        {"tasks", task_summary},
                        {"primary_task", config.primary_task},
                        {"stratified", stratify}};
    body["evaluation"] = headline;
    body["methods"] = methods;
    body["folds"] = folds;
    body["model"] = Json{{"weights", "model.csv"}, {"metadata", "model.json"}, {"structure", "structure.csv"}};
    return finish_report(config, body, dir);
}

Json run_train_propsvm(const RunConfig& input) {
    RunConfig config = input;
    config.command = "train-propsvm";
    config.validate();
    config.baselines = resolve_baselines(config, kPropSvmBaselines);
    if (config.features.empty())
        throw Error(ErrorKind::Domain, "train-propsvm needs --features");
    const fs::path dir = out_dir(config);
    const FeatureMatrix features = load_features(config.features);

    // Final model on every row; truth never enters this fit.
    const PropSvmFit final_fit = fit_propsvm_unlabeled(features.data, config);
    Json model = to_json(final_fit.result.model);
    model["epsilon"] = config.epsilon;
    model["bags"] = bag_summary(final_fit.bags);
    model["feature_names"] = features.feature_names;
    model["standardizer"] = Json{{"mean", weights_to_rows(final_fit.standardizer.mean)},
                                 {"scale", weights_to_rows(final_fit.standardizer.scale)}};
    write_json(dir / "model.json", model);

    Json body;
    body["data"] = Json{{"samples", features.rows()}, {"features", features.cols()}, {"truth", !config.truth.empty()}};
    body["model"] = Json{{"metadata", "model.json"}, {"diagnostics", propsvm_diagnostics(final_fit)}};
    if (config.truth.empty()) {
        body["evaluation"] = nullptr;
        return finish_report(config, body, dir);
    }

    const ValueTable truth_table = load_values(config.truth);
    if (truth_table.ids.size() < features.sample_ids.size())
        throw Error(ErrorKind::Domain, "truth file has " + std::to_string(truth_table.ids.size()) +
                                           " rows but features have " + std::to_string(features.rows()));
    const auto order = align_ids(features.sample_ids, truth_table.ids, "features", "truth");
    const Labels raw_truth = to_binary_labels(truth_table);
    Labels truth;
    for (Index i : order)
        truth.push_back(raw_truth[static_cast<std::size_t>(i)]);

    const CvPlan plan = make_cv_plan(truth, config.folds, config.seed, config.stratified,
                                     config.stratified ? std::optional<std::string>("truth") : std::nullopt);
    std::vector<MethodRun> runs;
    runs.push_back(MethodRun{"propsvm", {}, {}, {}, {}, {}});
    for (const auto& b : *config.baselines)
        runs.push_back(MethodRun{b, {}, {}, {}, {}, {}});

    auto record = [&](MethodRun& run, const std::vector<Index>& test, const std::vector<int>& clusters, int fold) {
        Labels test_truth;
        for (Index r : test)
            test_truth.push_back(truth[static_cast<std::size_t>(r)]);
        // Evaluation only: pick the cluster->class mapping against held-out truth.
        const ClusterOrientation orientation = orient_clusters(clusters, test_truth);
        const Labels predicted = orientation.apply(clusters);
        for (std::size_t k = 0; k < test.size(); ++k) {
            run.ids.push_back(features.sample_ids[static_cast<std::size_t>(test[k])]);
            run.folds.push_back(fold);
            run.predictions.push_back(predicted[k]);
            run.truth.push_back(test_truth[k]);
        }
        run.fold_reports.push_back(binary_report(predicted, test_truth));
    };

    Json folds = Json::array();
    for (int f = 0; f < plan.n_folds; ++f) {
        const auto train = plan.train_indices(f);
        const auto test = plan.test_indices(f);
        const Matrix x_train = select_rows(features.data, train);
        const Matrix x_test_raw = select_rows(features.data, test);
        const PropSvmFit fit = fit_propsvm_unlabeled(x_train, config);
        const Matrix x_test = fit.standardizer.apply(x_test_raw);
        record(runs[0], test, to_clusters(fit.result.model.predict(x_test)), f);
        const Matrix x_train_std = fit.standardizer.apply(x_train);
        for (std::size_t b = 1; b < runs.size(); ++b) {
            const auto clusters = baseline_cluster_classify(x_train_std, x_test, parse_baseline_mode(runs[b].name),
                                                            config.seed, config.cost);
            record(runs[b], test, clusters, f);
        }
        Json diag = propsvm_diagnostics(fit);
        diag["fold"] = f;
        diag["train_size"] = train.size();
        diag["test_size"] = test.size();
        folds.push_back(diag);
    }

    Json methods = Json::object();
    for (const auto& run : runs) {
        const EvalReport report = direct_report(run, EvalReport::Mode::Binary);
        write_method_files(dir, run);
        methods[run.name] = method_json(run, report, "predictions_" + run.name + ".csv");
        if (run.name == "propsvm")
            body["evaluation"] = to_json(report);
    }
    save_values(dir / "truth_eval.csv", runs[0].ids, runs[0].truth, "truth");
    body["methods"] = methods;
    body["folds"] = folds;
    return finish_report(config, body, dir);
}

Json run_evaluate(const RunConfig& input) {
    RunConfig config = input;
    config.command = "evaluate";
    config.validate();
    if (config.predictions.empty())
        throw Error(ErrorKind::Domain, "evaluate needs --predictions");

    std::vector<std::string> ids;
    std::vector<double> pred;
    std::vector<double> truth_values;
    std::vector<std::string> truth_ids;
    std::string mode = config.mode;

    if (fs::path(config.predictions).extension() == ".json") {
        const Json report = read_json(config.predictions);
        try {
            const Json& methods = report.at("methods");
            if (methods.empty())
                throw Error(ErrorKind::Domain, "report has no methods");
            if (config.method.empty())
                config.method = methods.begin().key();
            if (!methods.contains(config.method))
                throw Error(ErrorKind::Domain, "report has no method '" + config.method + "'");
            const Json& m = methods.at(config.method);
            for (const auto& rec : m.at("predictions")) {
                ids.push_back(rec.at("id").get<std::string>());
                pred.push_back(rec.at("prediction").get<double>());
                truth_ids.push_back(ids.back());
                truth_values.push_back(rec.at("truth").get<double>());
            }
            if (mode.empty())
                mode = m.at("evaluation").at("mode").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, "malformed report '" + config.predictions + "': " + e.what());
        }
    } else {
        const ValueTable p = load_values(config.predictions);
        ids = p.ids;
        pred = p.values;
    }
    if (!config.truth.empty()) {
        const ValueTable t = load_values(config.truth);
        truth_ids = t.ids;
        truth_values = t.values;
    }
    if (truth_ids.empty())
        throw Error(ErrorKind::Domain, "evaluate needs --truth");
    if (mode.empty())
        mode = "regression";
    config.mode = mode;

    const auto order = align_ids(ids, truth_ids, "predictions", "truth");
    std::vector<double> truth;
    for (Index i : order)
        truth.push_back(truth_values[static_cast<std::size_t>(i)]);

    EvalReport report;
    if (mode == "regression") {
        report = regression_report(pred, truth);
    } else {
        const Labels p = to_binary_labels(ValueTable{ids, pred, "prediction"});
        const Labels t = to_binary_labels(ValueTable{ids, truth, "truth"});
        report = binary_report(p, t);
    }
    const fs::path dir = out_dir(config);
    Json body;
    body["evaluation"] = to_json(report);
    return finish_report(config, body, dir);
}

} // namespace grmtl
