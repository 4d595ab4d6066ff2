#pragma once

#include "grmtl/dataset.hpp"
#include "grmtl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace grmtl {

/// Y = X W* + noise with a shared sparse support across tasks.
struct MtlSynthParams {
    Index n = 200;
    Index d = 50;
    Index tasks = 4;
    // Fraction of features in the shared support (at least one feature).
    double support_fraction = 0.1;
    // 1 plants W* = u v^T; 0 gives each task its own perturbation of a group base.
    Index rank = 0;
    // Tasks are dealt round robin into this many groups; each group has its own base vector.
    Index groups = 1;
    // Standard deviation of a task's deviation from its group base, on the support.
    double task_spread = 0.1;
    double noise = 0.5;
    // Added to every target so the values look like scores.
    double offset = 0.0;
};

struct MtlSynthData {
    FeatureMatrix features;
    std::vector<std::string> task_names;
    Matrix targets;
    Matrix planted_w;
    std::vector<Index> support;
};

MtlSynthData synth_mtl(const MtlSynthParams& params, std::uint64_t seed);

/// Two Gaussian blobs along the first feature. Positives sit at `separation`
/// with per-coordinate spread `spread`; negatives sit at 0 with `negative_spread`.
struct LlpSynthParams {
    Index n = 400;
    Index d = 2;
    double separation = 4.0;
    double spread = 1.0;
    double negative_spread = 1.0;
    double positive_fraction = 0.5;
    // Fraction of truth labels flipped after generation.
    double flip = 0.0;
};

struct LlpSynthData {
    FeatureMatrix features;
    Labels truth;
    // Labels before flipping.
    Labels generating;
};

LlpSynthData synth_llp(const LlpSynthParams& params, std::uint64_t seed);

// Targets table: header `id,<task>...`, empty cell for a missing value.
void save_targets(const std::filesystem::path& path, const std::vector<std::string>& ids,
                  const std::vector<std::string>& task_names, const Matrix& targets,
                  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask = {});

struct TargetTable {
    std::vector<std::string> sample_ids;
    std::vector<std::string> task_names;
    Matrix targets;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
};

TargetTable load_targets(const std::filesystem::path& path);

// Two-column `id,<value>` tables used for truth labels and predictions.
struct ValueTable {
    std::vector<std::string> ids;
    std::vector<double> values;
    std::string value_name;
};

ValueTable load_values(const std::filesystem::path& path);
void save_values(const std::filesystem::path& path, const std::vector<std::string>& ids,
                 const std::vector<double>& values, const std::string& value_name);

// Values must be exactly -1 or +1.
Labels to_binary_labels(const ValueTable& table);

} // namespace grmtl
