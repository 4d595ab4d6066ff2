#include "grmtl/metrics.hpp"
#include "grmtl/error.hpp"

#include <cmath>

namespace grmtl {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw Error(ErrorKind::Shape, std::string(what) + ": prediction and truth lengths differ");
    if (a == 0)
        throw Error(ErrorKind::Domain, std::string(what) + ": empty input");
}

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
    if (den == 0)
        return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

void fill_rates(EvalReport& r, const Confusion& c) {
    r.n = c.total();
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    r.sensitivity = ratio(c.tp, c.tp + c.fn);
    r.specificity = ratio(c.tn, c.tn + c.fp);
    r.confusion = c;
}

} // namespace

double regression_accuracy(std::span<const double> pred, std::span<const double> truth, double tolerance) {
    check_pair(pred.size(), truth.size(), "regression_accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hits += std::abs(pred[i] - truth[i]) <= tolerance;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double mean_abs_score_diff(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred.size(), truth.size(), "mean_abs_score_diff");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        total += std::abs(pred[i] - truth[i]);
    return total / static_cast<double>(pred.size());
}

EvalReport regression_report(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred.size(), truth.size(), "regression_report");
    EvalReport r;
    r.mode = EvalReport::Mode::Regression;
    r.n = static_cast<std::int64_t>(pred.size());
    std::int64_t hits = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diff = std::abs(pred[i] - truth[i]);
        hits += diff <= 1.0;
        total += diff;
    }
    r.hits = hits;
    r.abs_diff_total = total;
    r.accuracy = static_cast<double>(hits) / static_cast<double>(r.n);
    r.mean_abs_diff = total / static_cast<double>(r.n);
    return r;
}

EvalReport binary_report(std::span<const int> pred, std::span<const int> truth) {
    check_pair(pred.size(), truth.size(), "binary_report");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        const int t = truth[i];
        if ((p != 1 && p != -1) || (t != 1 && t != -1))
            throw Error(ErrorKind::Domain, "binary_report: labels must be -1 or +1");
        if (t == 1)
            (p == 1 ? c.tp : c.fn) += 1;
        else
            (p == 1 ? c.fp : c.tn) += 1;
    }
    EvalReport r;
    r.mode = EvalReport::Mode::Binary;
    fill_rates(r, c);
    return r;
}

EvalReport aggregate_cv(const std::vector<EvalReport>& folds) {
    if (folds.empty())
        throw Error(ErrorKind::Domain, "aggregate_cv: no fold reports");
    const auto mode = folds.front().mode;
    EvalReport out;
    out.mode = mode;
    RateSummary macro;
    std::int64_t total_n = 0;
    std::size_t sens_count = 0, spec_count = 0;
    double sens_sum = 0.0, spec_sum = 0.0, mad_sum = 0.0;

    if (mode == EvalReport::Mode::Binary) {
        Confusion pooled;
        for (const auto& f : folds) {
            if (f.mode != mode || !f.confusion)
                throw Error(ErrorKind::Domain, "aggregate_cv: fold reports must share a mode");
            pooled.tp += f.confusion->tp;
            pooled.fp += f.confusion->fp;
            pooled.tn += f.confusion->tn;
            pooled.fn += f.confusion->fn;
        }
        if (pooled.total() == 0)
            throw Error(ErrorKind::Domain, "aggregate_cv: folds are empty");
        fill_rates(out, pooled);
    } else {
        std::int64_t hits = 0;
        double abs_total = 0.0;
        for (const auto& f : folds) {
            if (f.mode != mode || !f.hits || !f.abs_diff_total)
                throw Error(ErrorKind::Domain, "aggregate_cv: fold reports must share a mode");
            hits += *f.hits;
            total_n += f.n;
            abs_total += *f.abs_diff_total;
        }
        if (total_n == 0)
            throw Error(ErrorKind::Domain, "aggregate_cv: folds are empty");
        out.n = total_n;
        out.hits = hits;
        out.accuracy = static_cast<double>(hits) / static_cast<double>(total_n);
        out.abs_diff_total = abs_total;
        out.mean_abs_diff = abs_total / static_cast<double>(total_n);
    }

    for (const auto& f : folds) {
        macro.accuracy += f.accuracy;
        if (f.sensitivity) {
            sens_sum += *f.sensitivity;
            ++sens_count;
        }
        if (f.specificity) {
            spec_sum += *f.specificity;
            ++spec_count;
        }
        if (f.mean_abs_diff)
            mad_sum += *f.mean_abs_diff;
    }
    const auto k = static_cast<double>(folds.size());
    macro.accuracy /= k;
    if (sens_count)
        macro.sensitivity = sens_sum / static_cast<double>(sens_count);
    if (spec_count)
        macro.specificity = spec_sum / static_cast<double>(spec_count);
    if (mode == EvalReport::Mode::Regression)
        macro.mean_abs_diff = mad_sum / k;
    out.macro_average = macro;
    out.per_fold = folds;
    for (auto& f : out.per_fold)
        f.per_fold.clear();
    return out;
}

std::string to_string(EvalReport::Mode mode) {
    return mode == EvalReport::Mode::Regression ? "regression" : "binary";
}

} // namespace grmtl
