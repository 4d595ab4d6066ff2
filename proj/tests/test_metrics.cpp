#include "experiments.hpp"

#include "grmtl/error.hpp"
#include "grmtl/metrics.hpp"
#include "grmtl/rng.hpp"
#include "grmtl/serialize.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace grmtl;

TEST_CASE("metrics: worked examples hold exactly") {
    for (const auto& f : experiment::metric_example_failures())
        FAIL_CHECK(f);
}

TEST_CASE("metrics: pooled rates equal a recount") {
    for (const auto& f : experiment::pooled_cv_failures(1, 200))
        FAIL_CHECK(f);
}

TEST_CASE("metrics: empty or mismatched input is an error") {
    const std::vector<double> empty;
    CHECK_THROWS_AS(regression_accuracy(empty, empty), Error);
    CHECK_THROWS_AS(mean_abs_score_diff(empty, empty), Error);
    const std::vector<double> a{1, 2}, b{1};
    CHECK_THROWS_AS(mean_abs_score_diff(a, b), Error);
    CHECK_THROWS_AS(aggregate_cv({}), Error);
    const std::vector<int> bad{0, 1};
    CHECK_THROWS_AS(binary_report(bad, bad), Error);
}

TEST_CASE("metrics: rates are fractions and counts add up") {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<int> p(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = rng.uniform() < 0.5 ? 1 : -1;
            y[i] = rng.uniform() < 0.5 ? 1 : -1;
        }
        const auto r = binary_report(p, y);
        CHECK(r.confusion->total() == static_cast<std::int64_t>(n));
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
        if (r.sensitivity)
            CHECK((*r.sensitivity >= 0.0 && *r.sensitivity <= 1.0));

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        std::vector<int> pp(n), yp(n);
        for (std::size_t i = 0; i < n; ++i) {
            pp[i] = p[perm[i]];
            yp[i] = y[perm[i]];
        }
        CHECK(binary_report(pp, yp).confusion == r.confusion);
    }
}

TEST_CASE("metrics: narrower band never raises accuracy") {
    Rng rng(3);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> p(20), y(20);
        for (std::size_t i = 0; i < 20; ++i) {
            y[i] = static_cast<double>(1 + rng.below(5));
            p[i] = y[i] + 4.0 * (rng.uniform() - 0.5);
        }
        CHECK(regression_accuracy(p, y, 0.5) <= regression_accuracy(p, y, 1.0));
    }
}

TEST_CASE("metrics: undefined rates survive serialization as null") {
    const std::vector<int> ones{1, 1, 1};
    const auto r = binary_report(ones, ones);
    const Json j = to_json(r);
    CHECK(j["specificity"].is_null());
    CHECK(j["undefined_rates"] == Json::array({"specificity"}));
    const auto back = eval_report_from_json(j);
    CHECK_FALSE(back.specificity.has_value());
    CHECK(back.confusion == r.confusion);
    CHECK(back.accuracy == r.accuracy);
}

TEST_CASE("metrics: macro average is the mean of fold rates") {
    const std::vector<int> p1{1, -1}, y1{1, 1};
    const std::vector<int> p2{1, 1, -1, -1}, y2{1, 1, -1, 1};
    const auto a = binary_report(p1, y1);
    const auto b = binary_report(p2, y2);
    const auto pooled = aggregate_cv({a, b});
    CHECK(pooled.macro_average->accuracy == (a.accuracy + b.accuracy) / 2);
    CHECK(pooled.accuracy == 4.0 / 6.0);
    // Fold one has no negatives, so only fold two contributes a specificity.
    CHECK(pooled.macro_average->specificity == b.specificity);
}
