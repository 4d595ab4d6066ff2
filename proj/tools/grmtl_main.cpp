// grmtl: synthetic data, graph-regularized MTL and proportion-SVM training,
// and evaluation from the command line.

#include "grmtl/error.hpp"
#include "grmtl/pipeline.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

using grmtl::RunConfig;

// Options are parsed into temporaries and copied onto the config only when
// given, so a --config file supplies the defaults and flags override it.
class Overrides {
public:
    template <typename T, typename Apply>
    void add(CLI::App& app, const std::string& name, const std::string& help, Apply apply) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app.add_option(name, *value, help);
        actions_.push_back([opt, value, apply](RunConfig& c) {
            if (opt->count() > 0)
                apply(c, *value);
        });
    }

    void flag(CLI::App& app, const std::string& name, const std::string& help,
              std::function<void(RunConfig&, bool)> apply) {
        auto value = std::make_shared<bool>(false);
        CLI::Option* opt = app.add_flag(name, *value, help);
        actions_.push_back([opt, value, apply](RunConfig& c) {
            if (opt->count() > 0)
                apply(c, *value);
        });
    }

    void apply(RunConfig& c) const {
        for (const auto& a : actions_)
            a(c);
    }

private:
    std::vector<std::function<void(RunConfig&)>> actions_;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    if (text == "none" || text.empty())
        return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

void add_common(CLI::App& app, Overrides& o, std::string& config_path) {
    app.add_option("--config", config_path, "JSON run config; flags override its values");
    o.add<std::string>(app, "--out", "Output directory", [](RunConfig& c, const std::string& v) { c.out = v; });
    o.add<std::uint64_t>(app, "--seed", "Random seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
}

void add_training(CLI::App& app, Overrides& o) {
    o.add<std::string>(app, "--features", "Feature CSV (id,f1,...)",
                       [](RunConfig& c, const std::string& v) { c.features = v; });
    o.add<int>(app, "--folds", "Cross-validation folds", [](RunConfig& c, int v) { c.folds = v; });
    o.add<std::string>(app, "--baselines", "Comma-separated baselines, or 'none'",
                       [](RunConfig& c, const std::string& v) { c.baselines = split_list(v); });
    o.flag(app, "--no-stratify", "Unstratified folds", [](RunConfig& c, bool v) { c.stratified = !v; });
    o.flag(app, "--no-standardize", "Skip feature z-scoring", [](RunConfig& c, bool v) { c.standardize = !v; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-regularized sparse multi-task regression and proportion-SVM toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    Overrides o;

    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic data set");
    add_common(*synth, o, config_path);
    o.add<std::string>(*synth, "--kind", "mtl or llp", [](RunConfig& c, const std::string& v) { c.synth_kind = v; });
    o.add<long>(*synth, "--n", "Samples", [](RunConfig& c, long v) { c.synth_mtl.n = c.synth_llp.n = v; });
    o.add<long>(*synth, "--d", "Features", [](RunConfig& c, long v) { c.synth_mtl.d = c.synth_llp.d = v; });
    o.add<long>(*synth, "--tasks", "mtl: tasks", [](RunConfig& c, long v) { c.synth_mtl.tasks = v; });
    o.add<double>(*synth, "--support-fraction", "mtl: shared support fraction",
                  [](RunConfig& c, double v) { c.synth_mtl.support_fraction = v; });
    o.add<long>(*synth, "--rank", "mtl: 1 for a rank-one W*, 0 otherwise",
                [](RunConfig& c, long v) { c.synth_mtl.rank = v; });
    o.add<long>(*synth, "--groups", "mtl: task groups", [](RunConfig& c, long v) { c.synth_mtl.groups = v; });
    o.add<double>(*synth, "--task-spread", "mtl: per-task deviation from the group base",
                  [](RunConfig& c, double v) { c.synth_mtl.task_spread = v; });
    o.add<double>(*synth, "--noise", "mtl: target noise sd", [](RunConfig& c, double v) { c.synth_mtl.noise = v; });
    o.add<double>(*synth, "--offset", "mtl: constant added to targets",
                  [](RunConfig& c, double v) { c.synth_mtl.offset = v; });
    o.add<double>(*synth, "--separation", "llp: distance between blob centres",
                  [](RunConfig& c, double v) { c.synth_llp.separation = v; });
    o.add<double>(*synth, "--spread", "llp: positive blob sd", [](RunConfig& c, double v) { c.synth_llp.spread = v; });
    o.add<double>(*synth, "--negative-spread", "llp: negative blob sd",
                  [](RunConfig& c, double v) { c.synth_llp.negative_spread = v; });
    o.add<double>(*synth, "--positive-fraction", "llp: share of positives",
                  [](RunConfig& c, double v) { c.synth_llp.positive_fraction = v; });
    o.add<double>(*synth, "--flip", "llp: fraction of truth labels flipped",
                  [](RunConfig& c, double v) { c.synth_llp.flip = v; });

    CLI::App* mtl = app.add_subcommand("train-mtl", "Cross-validated graph-regularized sparse MTL");
    add_common(*mtl, o, config_path);
    add_training(*mtl, o);
    o.add<std::string>(*mtl, "--raters", "Rater scores CSV (id,task,score...)",
                       [](RunConfig& c, const std::string& v) { c.raters = v; });
    o.add<std::string>(*mtl, "--targets", "Per-task target CSV (id,task...)",
                       [](RunConfig& c, const std::string& v) { c.targets = v; });
    o.add<double>(*mtl, "--rho1", "Graph penalty weight", [](RunConfig& c, double v) { c.rho1 = v; });
    o.add<double>(*mtl, "--rho2", "l1 weight (also lasso/ridge baselines)", [](RunConfig& c, double v) { c.rho2 = v; });
    o.add<double>(*mtl, "--rho-trace", "Trace-norm baseline weight", [](RunConfig& c, double v) { c.rho_trace = v; });
    o.add<double>(*mtl, "--corr-threshold", "Task-graph correlation threshold",
                  [](RunConfig& c, double v) { c.corr_threshold = v; });
    o.add<std::string>(*mtl, "--primary-task", "Evaluated task",
                       [](RunConfig& c, const std::string& v) { c.primary_task = v; });
    o.add<int>(*mtl, "--min-raters", "Minimum raters for the primary task", [](RunConfig& c, int v) { c.min_raters = v; });
    o.flag(*mtl, "--keep-pivot", "Keep primary samples whose mean equals the scale midpoint",
           [](RunConfig& c, bool v) { c.exclude_primary_pivot = !v; });
    o.flag(*mtl, "--no-psi", "Drop the rater-inconsistency offsets", [](RunConfig& c, bool v) { c.use_psi = !v; });
    o.add<int>(*mtl, "--max-iters", "Solver iteration cap", [](RunConfig& c, int v) { c.optimizer.max_iters = v; });
    o.add<double>(*mtl, "--tol", "Solver relative tolerance", [](RunConfig& c, double v) { c.optimizer.tol = v; });

    CLI::App* prop = app.add_subcommand("train-propsvm", "Clustering + proportion-SVM with optional evaluation");
    add_common(*prop, o, config_path);
    add_training(*prop, o);
    o.add<std::string>(*prop, "--truth", "Evaluation labels (id,label in -1/+1)",
                       [](RunConfig& c, const std::string& v) { c.truth = v; });
    o.add<double>(*prop, "--cost", "SVM cost K", [](RunConfig& c, double v) { c.cost = v; });
    o.add<double>(*prop, "--epsilon", "Proportion slack", [](RunConfig& c, double v) { c.epsilon = v; });
    o.add<int>(*prop, "--max-outer-iters", "Alternating iterations",
               [](RunConfig& c, int v) { c.max_outer_iters = v; });
    o.add<int>(*prop, "--restart-levels", "Admissible-count levels per bag for restarts (<2: single start)",
               [](RunConfig& c, int v) { c.restart_levels = v; });
    o.flag(*prop, "--adasyn", "Rebalance the clusters with ADASYN inside each training fold",
           [](RunConfig& c, bool v) { c.adasyn = v; });

    CLI::App* eval = app.add_subcommand("evaluate", "Score predictions against truth");
    add_common(*eval, o, config_path);
    o.add<std::string>(*eval, "--predictions", "Predictions CSV (id,prediction) or a report.json",
                       [](RunConfig& c, const std::string& v) { c.predictions = v; });
    o.add<std::string>(*eval, "--truth", "Truth CSV (id,value)", [](RunConfig& c, const std::string& v) { c.truth = v; });
    o.add<std::string>(*eval, "--mode", "regression or binary", [](RunConfig& c, const std::string& v) { c.mode = v; });
    o.add<std::string>(*eval, "--method", "Method inside a report.json",
                       [](RunConfig& c, const std::string& v) { c.method = v; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << "grmtl:error:usage: " << e.what() << '\n';
        return 2;
    }

    try {
        RunConfig config;
        if (!config_path.empty())
            config = grmtl::run_config_from_json(grmtl::read_json(config_path));
        o.apply(config);
        grmtl::Json report;
        if (synth->parsed())
            report = grmtl::run_synth(config);
        else if (mtl->parsed())
            report = grmtl::run_train_mtl(config);
        else if (prop->parsed())
            report = grmtl::run_train_propsvm(config);
        else
            report = grmtl::run_evaluate(config);
        std::cout << "wrote " << config.out << '\n';
        return 0;
    } catch (const grmtl::Error& e) {
        std::cerr << "grmtl:error:" << grmtl::to_string(e.kind()) << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "grmtl:error:internal: " << e.what() << '\n';
    }
    return 1;
}
