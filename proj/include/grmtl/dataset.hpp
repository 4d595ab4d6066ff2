#pragma once

#include "grmtl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grmtl {

struct CsvOptions {
    bool has_header = true;
    // First column holds the sample id. Without it ids are "0", "1", ...
    bool has_id_column = true;
};

/// Dense n x d feature matrix with one id per row.
struct FeatureMatrix {
    Matrix data;
    std::vector<std::string> sample_ids;
    std::vector<std::string> feature_names;

    Index rows() const noexcept { return data.rows(); }
    Index cols() const noexcept { return data.cols(); }

    // Throws if the matrix is empty, holds a non-finite entry, or the ids do
    // not line up 1:1 with unique rows.
    void validate() const;
    std::map<std::string, Index> id_index() const;
    FeatureMatrix subset(const std::vector<Index>& rows) const;
};

FeatureMatrix parse_features(std::istream& in, const CsvOptions& options,
                             std::string_view source = "<stream>");
FeatureMatrix load_features(const std::filesystem::path& path, const CsvOptions& options = {});
// Writes header + id column with 17 significant digits so values round trip.
void save_features(const std::filesystem::path& path, const FeatureMatrix& features);

/// Closed integer range of an ordinal rating scale.
struct ScoreScale {
    int min = 1;
    int max = 5;

    double pivot() const noexcept { return 0.5 * (min + max); }
};

/// Ordinal scores from R raters for one task. Missing cells have present == false.
struct RaterScores {
    std::string task_name;
    ScoreScale scale;
    std::vector<std::string> sample_ids;
    Matrix scores;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> present;

    Index rows() const noexcept { return scores.rows(); }
    std::vector<double> row_scores(Index row) const;
    Index present_count(Index row) const;
    void validate() const;
};

// raters.csv rows are `id,task,score_1,...,score_R` with empty cells for
// missing raters. Tasks come back in order of first appearance; rows shorter
// than the widest row are padded with missing cells.
std::vector<RaterScores> parse_raters(std::istream& in, const std::map<std::string, ScoreScale>& scales,
                                      const ScoreScale& default_scale, bool has_header,
                                      std::string_view source = "<stream>");
std::vector<RaterScores> load_raters(const std::filesystem::path& path,
                                     const std::map<std::string, ScoreScale>& scales = {},
                                     const ScoreScale& default_scale = {}, bool has_header = true);

struct RaterAggregate {
    Vector targets;
    std::vector<bool> mask;
};

// Mean of the present scores per row. A row is masked out when it has fewer
// than `min_raters` scores, or when `exclude_at_pivot` is set and its mean is
// exactly the scale midpoint.
RaterAggregate aggregate_raters(const RaterScores& raw, bool exclude_at_pivot, int min_raters = 1);

enum class TieRule {
    Reject,   // a kept target equal to the pivot is an error
    Negative, // a kept target equal to the pivot maps to -1
};

// +1 above the scale midpoint, -1 below. Masked rows get -1 and are not
// inspected. An empty mask keeps every row.
Labels binarize(const Vector& targets, const ScoreScale& scale, const std::vector<bool>& mask = {},
                TieRule tie = TieRule::Reject);

/// Per-task mean scores, binary labels and inclusion flags, rows aligned to a
/// feature matrix.
struct TaskTargets {
    std::vector<std::string> task_names;
    std::vector<ScoreScale> scales;
    std::vector<std::string> sample_ids;
    Matrix targets;
    Eigen::MatrixXi binary_labels;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
    // Per-task rater rows aligned to sample_ids (missing rows have no present cells).
    std::vector<RaterScores> raters;

    Index task_index(std::string_view name) const;
    Index num_tasks() const noexcept { return static_cast<Index>(task_names.size()); }
};

struct TargetOptions {
    std::string primary_task = "malignancy";
    // Samples with fewer primary-task raters are dropped from the supervised set.
    int min_raters = 3;
    bool exclude_primary_pivot = true;
    TieRule attribute_tie = TieRule::Negative;
};

// Aligns rater tables to `sample_ids`, aggregates, applies the inclusion
// rules and binarizes every task. Throws when a rater id is unknown or a
// sample has no primary-task row; the message lists the offending ids.
TaskTargets build_task_targets(const std::vector<RaterScores>& raters,
                               const std::vector<std::string>& sample_ids,
                               const TargetOptions& options = {});

struct Resampled {
    FeatureMatrix features;
    Labels labels;
    Index synthetic_count = 0;
};

// ADASYN oversampling of the minority class up to the majority count.
// Synthetic rows are appended after the originals with ids "adasyn-<i>".
Resampled adasyn_rebalance(const FeatureMatrix& features, const Labels& labels, int k_neighbors = 5,
                           std::uint64_t seed = 42);

struct CvPlan {
    int n_folds = 0;
    std::vector<int> assignments;
    std::optional<std::string> stratify_on;
    std::uint64_t seed = 0;

    std::vector<Index> test_indices(int fold) const;
    std::vector<Index> train_indices(int fold) const;
};

// Stratified plans shuffle each class separately and deal the concatenated
// sequence round robin, so both the fold sizes and the per-class fold counts
// differ by at most one.
CvPlan make_cv_plan(const Labels& labels, int n_folds, std::uint64_t seed, bool stratified = true,
                    std::optional<std::string> stratify_on = std::nullopt);

/// Column z-scoring with statistics frozen from a training set.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
};

} // namespace grmtl
