#pragma once

#include "grmtl/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace grmtl {

struct Confusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const Confusion&) const = default;
};

/// Rates without per-fold detail; used for the macro average across folds.
struct RateSummary {
    double accuracy = 0.0;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> mean_abs_diff;
};

/// Evaluation of one fold or of pooled folds. Rates that are undefined for the
/// evaluated data (e.g. sensitivity without positives) are left empty.
struct EvalReport {
    enum class Mode { Regression, Binary };

    Mode mode = Mode::Binary;
    std::int64_t n = 0;
    double accuracy = 0.0;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> mean_abs_diff;
    std::optional<Confusion> confusion;
    // Samples within the +-1 band (regression mode).
    std::optional<std::int64_t> hits;
    // Sum of |pred - truth| (regression mode), pooled across folds.
    std::optional<double> abs_diff_total;
    std::vector<EvalReport> per_fold;
    std::optional<RateSummary> macro_average;
};

// Fraction of |pred - truth| <= tolerance; the boundary counts as a hit.
double regression_accuracy(std::span<const double> pred, std::span<const double> truth, double tolerance = 1.0);
double mean_abs_score_diff(std::span<const double> pred, std::span<const double> truth);

EvalReport regression_report(std::span<const double> pred, std::span<const double> truth);
EvalReport binary_report(std::span<const int> pred, std::span<const int> truth);

// Pools counts across folds and recomputes the rates; the unweighted mean of
// the per-fold rates goes into macro_average.
EvalReport aggregate_cv(const std::vector<EvalReport>& folds);

std::string to_string(EvalReport::Mode mode);

} // namespace grmtl
