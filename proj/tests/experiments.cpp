#include "experiments.hpp"

#include "grmtl/metrics.hpp"
#include "grmtl/rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace experiment {

namespace {

double simulated_threshold(const Matrix& x, const Matrix& y, std::uint64_t seed, double quantile, int draws,
                           const std::function<double(const Matrix&)>& dual_norm) {
    const Matrix b = x.colPivHouseholderQr().solve(y);
    const double dof = static_cast<double>((x.rows() - x.cols()) * y.cols());
    const double sigma = std::sqrt((x * b - y).squaredNorm() / dof);
    grmtl::Rng rng(seed);
    std::vector<double> stats;
    for (int s = 0; s < draws; ++s) {
        Matrix e(x.rows(), y.cols());
        for (grmtl::Index i = 0; i < e.size(); ++i)
            e.data()[i] = sigma * rng.normal();
        stats.push_back(dual_norm(2.0 * x.transpose() * e));
    }
    std::sort(stats.begin(), stats.end());
    const auto k = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(draws - 1)));
    return stats[k];
}

} // namespace

double qut_l1(const Matrix& x, const Matrix& y, std::uint64_t seed, double quantile, int draws) {
    return simulated_threshold(x, y, seed, quantile, draws, [](const Matrix& g) { return g.cwiseAbs().maxCoeff(); });
}

double qut_nuclear(const Matrix& x, const Matrix& y, std::uint64_t seed, double quantile, int draws) {
    return simulated_threshold(x, y, seed, quantile, draws, [](const Matrix& g) {
        return Eigen::JacobiSVD<Matrix>(g).singularValues()(0);
    });
}

int numerical_rank(const Matrix& w) {
    const auto sv = Eigen::JacobiSVD<Matrix>(w).singularValues();
    if (sv.size() == 0 || sv(0) == 0.0)
        return 0;
    return static_cast<int>((sv.array() > 1e-6 * sv(0)).count());
}

std::vector<std::string> metric_example_failures() {
    using namespace grmtl;
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok)
            failed.push_back(what);
    };
    const std::vector<double> pred{1, 2, 5}, truth{2, 2, 3};
    expect(regression_accuracy(pred, truth) == 2.0 / 3.0, "regression_accuracy([1,2,5],[2,2,3]) == 2/3");
    expect(regression_accuracy(truth, truth) == 1.0, "regression_accuracy(pred == truth) == 1");
    const std::vector<double> shifted{3, 3, 4};
    expect(regression_accuracy(shifted, truth) == 1.0, "boundary |pred - truth| == 1 counts as a hit");
    expect(mean_abs_score_diff(pred, truth) == 1.0, "mean_abs_score_diff([1,2,5],[2,2,3]) == 1");
    expect(mean_abs_score_diff(truth, truth) == 0.0, "mean_abs_score_diff(pred == truth) == 0");
    const std::vector<double> pred_up{11, 12, 15}, truth_up{12, 12, 13};
    expect(mean_abs_score_diff(pred_up, truth_up) == mean_abs_score_diff(pred, truth),
           "mean_abs_score_diff is translation invariant");

    // tp=3, fn=1, tn=4, fp=2
    const std::vector<int> bp{1, 1, 1, -1, -1, -1, -1, -1, 1, 1};
    const std::vector<int> bt{1, 1, 1, 1, -1, -1, -1, -1, -1, -1};
    const EvalReport b = binary_report(bp, bt);
    expect(b.confusion && *b.confusion == Confusion{3, 2, 4, 1}, "confusion counts tp=3 fp=2 tn=4 fn=1");
    expect(b.accuracy == 0.7, "accuracy == 0.7");
    expect(b.sensitivity && *b.sensitivity == 0.75, "sensitivity == 0.75");
    expect(b.specificity && *b.specificity == 2.0 / 3.0, "specificity == 2/3");
    const EvalReport same = binary_report(bt, bt);
    expect(same.accuracy == 1.0 && same.sensitivity == 1.0 && same.specificity == 1.0, "pred == truth gives 1,1,1");
    std::vector<int> flipped(bt.size());
    for (std::size_t i = 0; i < bt.size(); ++i)
        flipped[i] = -bt[i];
    const EvalReport opposite = binary_report(flipped, bt);
    expect(opposite.accuracy == 0.0 && opposite.sensitivity == 0.0 && opposite.specificity == 0.0,
           "pred == -truth gives 0,0,0");
    const std::vector<int> ones{1, 1};
    const EvalReport one_class = binary_report(ones, ones);
    expect(!one_class.specificity && one_class.sensitivity == 1.0, "one-class truth leaves specificity undefined");

    const EvalReport single = aggregate_cv({b});
    expect(single.accuracy == b.accuracy && single.sensitivity == b.sensitivity &&
               single.specificity == b.specificity && single.confusion == b.confusion,
           "aggregate_cv of one fold equals the fold");
    const EvalReport twice = aggregate_cv({b, b});
    expect(twice.accuracy == b.accuracy && twice.sensitivity == b.sensitivity && twice.specificity == b.specificity,
           "aggregate_cv of two identical folds keeps the rates");
    const EvalReport r = regression_report(pred, truth);
    const EvalReport r1 = aggregate_cv({r});
    expect(r1.accuracy == r.accuracy && r1.mean_abs_diff == r.mean_abs_diff,
           "aggregate_cv of one regression fold equals the fold");
    return failed;
}

std::vector<std::string> pooled_cv_failures(std::uint64_t seed, int trials) {
    using namespace grmtl;
    std::vector<std::string> failed;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        const int folds = 2 + static_cast<int>(rng.below(9));
        std::vector<EvalReport> binary, regression;
        std::int64_t correct = 0, total = 0, tp = 0, pos = 0, tn = 0, neg = 0, hits = 0;
        long double abs_total = 0;
        for (int f = 0; f < folds; ++f) {
            const std::size_t n = 1 + rng.below(30);
            std::vector<int> p(n), y(n);
            std::vector<double> ps(n), ys(n);
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = rng.uniform() < 0.4 ? 1 : -1;
                p[i] = rng.uniform() < 0.75 ? y[i] : -y[i];
                ys[i] = static_cast<double>(1 + rng.below(5));
                ps[i] = ys[i] + 3.0 * (rng.uniform() - 0.5);
                correct += p[i] == y[i];
                tp += p[i] == 1 && y[i] == 1;
                pos += y[i] == 1;
                tn += p[i] == -1 && y[i] == -1;
                neg += y[i] == -1;
                hits += std::abs(ps[i] - ys[i]) <= 1.0;
                abs_total += std::abs(ps[i] - ys[i]);
            }
            total += static_cast<std::int64_t>(n);
            binary.push_back(binary_report(p, y));
            regression.push_back(regression_report(ps, ys));
        }
        const EvalReport b = aggregate_cv(binary);
        const EvalReport r = aggregate_cv(regression);
        const std::string tag = "trial " + std::to_string(t) + ": ";
        if (b.accuracy != static_cast<double>(correct) / static_cast<double>(total))
            failed.push_back(tag + "pooled accuracy");
        if (pos > 0 && b.sensitivity != static_cast<double>(tp) / static_cast<double>(pos))
            failed.push_back(tag + "pooled sensitivity");
        if (neg > 0 && b.specificity != static_cast<double>(tn) / static_cast<double>(neg))
            failed.push_back(tag + "pooled specificity");
        if (b.n != total || b.per_fold.size() != binary.size())
            failed.push_back(tag + "pooled counts");
        if (r.accuracy != static_cast<double>(hits) / static_cast<double>(total))
            failed.push_back(tag + "pooled regression accuracy");
        if (std::abs(*r.mean_abs_diff - static_cast<double>(abs_total / total)) > 1e-12)
            failed.push_back(tag + "pooled mean_abs_diff");
    }
    return failed;
}

} // namespace experiment
