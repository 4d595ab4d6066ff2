#pragma once

#include "grmtl/apg.hpp"
#include "grmtl/dataset.hpp"
#include "grmtl/serialize.hpp"
#include "grmtl/synth.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace grmtl {

/// Every knob of every subcommand. A report embeds the config it ran with,
/// after defaults have been resolved.
struct RunConfig {
    std::string command;

    std::string features;
    std::string raters;
    std::string targets;
    std::string truth;
    std::string predictions;
    std::string out = "out";

    double rho1 = 1.0;
    double rho2 = 10.0;
    double rho_trace = 1.0;
    double corr_threshold = 0.5;
    double cost = 1.0;
    double epsilon = 0.1;
    int max_outer_iters = 50;
    // Admissible-count levels per bag for the proportion-SVM restarts; < 2 is a single start.
    int restart_levels = 3;
    int folds = 10;
    std::uint64_t seed = 42;
    bool stratified = true;
    bool standardize = true;
    // Unset means the command's default list; an empty list runs no baselines.
    std::optional<std::vector<std::string>> baselines;

    // Empty: "malignancy" when the raters file has it, else the first task.
    std::string primary_task;
    int min_raters = 3;
    bool exclude_primary_pivot = true;
    bool use_psi = true;
    ScoreScale default_scale;
    std::map<std::string, ScoreScale> scales;

    bool adasyn = false;
    int adasyn_k = 5;

    OptimizerConfig optimizer;

    // evaluate: "regression" or "binary"; empty means take it from the report.
    std::string mode;
    // evaluate on a report.json: which method's embedded predictions to use.
    std::string method;

    // synth
    std::string synth_kind = "mtl";
    MtlSynthParams synth_mtl;
    LlpSynthParams synth_llp;

    void validate() const;
};

Json to_json(const RunConfig& config);
// Keys absent from `j` keep their value from `base`; unknown keys are an error.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

// Each command writes its outputs under config.out and returns the report it
// wrote to <out>/report.json (synth returns its manifest).
Json run_synth(const RunConfig& config);
Json run_train_mtl(const RunConfig& config);
Json run_train_propsvm(const RunConfig& config);
Json run_evaluate(const RunConfig& config);

// The report without its wall-clock field, for reproducibility checks.
Json strip_timestamp(Json report);

} // namespace grmtl
