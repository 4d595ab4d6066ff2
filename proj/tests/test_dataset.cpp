#include "oracles.hpp"

#include "grmtl/dataset.hpp"
#include "grmtl/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace grmtl;

namespace {

FeatureMatrix parse(const std::string& text, CsvOptions options = {}) {
    std::istringstream in(text);
    return parse_features(in, options, "test.csv");
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    FAIL("expected an error");
    return {};
}

RaterScores one_row(std::vector<double> scores, ScoreScale scale = {}) {
    RaterScores r;
    r.task_name = "malignancy";
    r.scale = scale;
    r.sample_ids = {"a"};
    r.scores.resize(1, static_cast<Index>(scores.size()));
    r.present.resize(1, static_cast<Index>(scores.size()));
    for (std::size_t k = 0; k < scores.size(); ++k) {
        r.scores(0, static_cast<Index>(k)) = scores[k];
        r.present(0, static_cast<Index>(k)) = true;
    }
    return r;
}

} // namespace

TEST_CASE("features: small csv parses") {
    const auto f = parse("id,a,b\ns1,1,2\ns2,3,4\ns3,5,6.5\n");
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 2);
    CHECK(f.data(2, 1) == 6.5);
    CHECK(f.sample_ids[1] == "s2");
    CHECK(f.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("features: headerless, id-less input gets positional ids") {
    CsvOptions o;
    o.has_header = false;
    o.has_id_column = false;
    const auto f = parse("1,2\n3,4\n", o);
    CHECK(f.rows() == 2);
    CHECK(f.sample_ids == std::vector<std::string>{"0", "1"});
}

TEST_CASE("features: malformed input is rejected") {
    CHECK(message_of([] { parse(""); }).find("no rows") != std::string::npos);
    const std::string inf = message_of([] { parse("id,a,b\ns1,1,inf\n"); });
    CHECK(inf.find("'inf'") != std::string::npos);
    CHECK(inf.find("line 2") != std::string::npos);
    CHECK(kind_of([] { parse("id,a,b\ns1,1\n"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse("id,a\ns1,x\n"); }) == ErrorKind::Parse);
    CHECK(kind_of([] { parse("id,a\ns1,1\ns1,2\n"); }) == ErrorKind::Domain);
}

TEST_CASE("features: save/load round trip is bit-exact") {
    Rng rng(3);
    FeatureMatrix f;
    f.data = oracle::random_matrix(rng, 7, 4, 1e3);
    f.data(0, 0) = 1.0 / 3.0;
    f.data(1, 1) = -5e-300;
    for (int i = 0; i < 7; ++i)
        f.sample_ids.push_back("r" + std::to_string(i));
    f.feature_names = {"a", "b", "c", "d"};
    const auto dir = oracle::scratch_dir("roundtrip");
    save_features(dir / "f.csv", f);
    const auto g = load_features(dir / "f.csv");
    CHECK(g.sample_ids == f.sample_ids);
    CHECK(g.feature_names == f.feature_names);
    CHECK((g.data.array() == f.data.array()).all());
}

TEST_CASE("raters: aggregation examples") {
    auto a = aggregate_raters(one_row({5, 5, 4}), true, 1);
    CHECK(a.targets(0) == doctest::Approx(14.0 / 3.0));
    CHECK(a.mask[0]);

    a = aggregate_raters(one_row({2, 3, 4}), true, 1);
    CHECK(a.targets(0) == 3.0);
    CHECK_FALSE(a.mask[0]);

    a = aggregate_raters(one_row({2, 3, 4}), false, 1);
    CHECK(a.mask[0]);

    a = aggregate_raters(one_row({1}), false, 3);
    CHECK_FALSE(a.mask[0]);
}

TEST_CASE("raters: aggregation ignores rater order") {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> s;
        for (int k = 0; k < 4; ++k)
            s.push_back(static_cast<double>(1 + rng.below(5)));
        const double m1 = aggregate_raters(one_row(s), false, 1).targets(0);
        rng.shuffle(s);
        const double m2 = aggregate_raters(one_row(s), false, 1).targets(0);
        CHECK(m1 == doctest::Approx(m2).epsilon(1e-15));
    }
}

TEST_CASE("raters: parsing with missing cells and padding") {
    std::istringstream in("id,task,r1,r2,r3,r4\n"
                          "a,malignancy,5,4,,\n"
                          "b,malignancy,1,2,2,1\n"
                          "a,spiculation,1\n");
    const auto tables = parse_raters(in, {}, ScoreScale{}, true);
    REQUIRE(tables.size() == 2);
    CHECK(tables[0].task_name == "malignancy");
    CHECK(tables[0].present_count(0) == 2);
    CHECK(tables[0].present_count(1) == 4);
    CHECK(tables[1].present_count(0) == 1);
}

TEST_CASE("raters: out-of-scale score is rejected") {
    std::istringstream in("id,task,r1\na,malignancy,7\n");
    CHECK_THROWS_AS(parse_raters(in, {}, ScoreScale{}, true), Error);
}

TEST_CASE("binarize: midpoint rule") {
    Vector t(2);
    t << 4.0, 1.5;
    CHECK(binarize(t, ScoreScale{1, 5}) == Labels{1, -1});

    Vector tie(1);
    tie << 3.5;
    CHECK(kind_of([&] { binarize(tie, ScoreScale{1, 6}); }) == ErrorKind::Domain);
    CHECK(binarize(tie, ScoreScale{1, 6}, {}, TieRule::Negative) == Labels{-1});
    // A masked row is never inspected.
    CHECK(binarize(tie, ScoreScale{1, 6}, {false}) == Labels{-1});
}

TEST_CASE("build_task_targets: unknown ids are listed") {
    std::istringstream in("id,task,r1,r2,r3\na,malignancy,5,5,5\nzz,malignancy,1,1,1\n");
    const auto tables = parse_raters(in, {}, ScoreScale{}, true);
    const std::string msg = message_of([&] { build_task_targets(tables, {"a"}); });
    CHECK(msg.find("zz") != std::string::npos);
}

TEST_CASE("adasyn: balanced input is unchanged") {
    FeatureMatrix f;
    f.data = Matrix::Identity(4, 2);
    f.sample_ids = {"a", "b", "c", "d"};
    f.feature_names = {"x", "y"};
    const auto r = adasyn_rebalance(f, {1, -1, 1, -1}, 1, 1);
    CHECK(r.synthetic_count == 0);
    CHECK(r.features.data == f.data);
    CHECK(r.labels == Labels{1, -1, 1, -1});
}

TEST_CASE("adasyn: 2 vs 4 with k=1 appends two minority points") {
    FeatureMatrix f;
    f.data.resize(6, 2);
    f.data << 0, 0, 1, 1, 5, 5, 6, 5, 5, 6, 6, 6;
    f.sample_ids = {"p1", "p2", "n1", "n2", "n3", "n4"};
    f.feature_names = {"x", "y"};
    const Labels labels{1, 1, -1, -1, -1, -1};
    const auto r = adasyn_rebalance(f, labels, 1, 7);
    CHECK(r.synthetic_count == 2);
    REQUIRE(r.features.rows() == 8);
    CHECK(r.labels[6] == 1);
    CHECK(r.labels[7] == 1);
    CHECK(r.features.sample_ids[6] == "adasyn-0");
}

TEST_CASE("adasyn: synthetic points lie on minority segments") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        FeatureMatrix f;
        f.data = oracle::random_matrix(rng, 40, 3);
        Labels labels(40, -1);
        for (int i = 0; i < 9; ++i) {
            labels[static_cast<std::size_t>(i)] = 1;
            f.data.row(i).array() += 2.0;
        }
        for (int i = 0; i < 40; ++i)
            f.sample_ids.push_back("s" + std::to_string(i));
        f.feature_names = {"a", "b", "c"};
        const auto r = adasyn_rebalance(f, labels, 5, seed);
        CHECK(r.synthetic_count == 22);
        for (Index s = 40; s < r.features.rows(); ++s) {
            const Vector p = r.features.data.row(s).transpose();
            bool on_segment = false;
            for (int a = 0; a < 9 && !on_segment; ++a)
                for (int b = 0; b < 9 && !on_segment; ++b) {
                    if (a == b)
                        continue;
                    const Vector xa = f.data.row(a).transpose(), xb = f.data.row(b).transpose();
                    const Vector dir = xb - xa;
                    const double t = (p - xa).dot(dir) / dir.squaredNorm();
                    on_segment = t >= -1e-12 && t <= 1 + 1e-12 && (xa + t * dir - p).norm() < 1e-9;
                }
            CHECK(on_segment);
        }
    }
}

TEST_CASE("adasyn: degenerate inputs") {
    FeatureMatrix f;
    f.data = Matrix::Zero(3, 1);
    f.sample_ids = {"a", "b", "c"};
    f.feature_names = {"x"};
    CHECK_THROWS_AS(adasyn_rebalance(f, {1, 1, 1}, 1), Error);
    CHECK_THROWS_AS(adasyn_rebalance(f, {1, -1, -1}, 1), Error);
}

TEST_CASE("cv: leave-one-out and exact stratification") {
    const auto loo = make_cv_plan(Labels(10, 1), 10, 1, false);
    for (int f = 0; f < 10; ++f)
        CHECK(loo.test_indices(f).size() == 1);

    Labels y(20, -1);
    std::fill(y.begin(), y.begin() + 10, 1);
    const auto plan = make_cv_plan(y, 10, 5, true);
    for (int f = 0; f < 10; ++f) {
        const auto t = plan.test_indices(f);
        REQUIRE(t.size() == 2);
        CHECK(y[static_cast<std::size_t>(t[0])] + y[static_cast<std::size_t>(t[1])] == 0);
    }
    CHECK(make_cv_plan(y, 10, 5, true).assignments == plan.assignments);
    CHECK_THROWS_AS(make_cv_plan(y, 1, 5), Error);
}

TEST_CASE("cv: folds partition the rows and respect class ratios") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 30 + rng.below(70);
        Labels y(n);
        for (auto& v : y)
            v = rng.uniform() < 0.3 ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const int k = 2 + static_cast<int>(rng.below(9));
        const auto plan = make_cv_plan(y, k, rep, true);
        std::multiset<Index> seen;
        const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
        for (int f = 0; f < k; ++f) {
            const auto test = plan.test_indices(f);
            const auto train = plan.train_indices(f);
            CHECK(test.size() + train.size() == n);
            seen.insert(test.begin(), test.end());
            double fold_pos = 0;
            for (auto i : test)
                fold_pos += y[static_cast<std::size_t>(i)] == 1;
            const double expected = pos * static_cast<double>(test.size()) / static_cast<double>(n);
            CHECK(std::abs(fold_pos - expected) <= 1.0 + 1e-9);
        }
        CHECK(seen.size() == n);
        for (Index i = 0; i < static_cast<Index>(n); ++i)
            CHECK(seen.count(i) == 1);
    }
}

TEST_CASE("standardizer: train statistics are frozen") {
    Matrix x(3, 2);
    x << 1, 10, 2, 20, 3, 30;
    const auto s = Standardizer::fit(x);
    const Matrix z = s.apply(x);
    CHECK(z.col(0).mean() == doctest::Approx(0.0));
    CHECK(z(2, 0) == doctest::Approx(z(2, 1)));
    Matrix t(1, 2);
    t << 2, 20;
    CHECK(s.apply(t).norm() == doctest::Approx(0.0));
}
