#include "oracles.hpp"

#include "grmtl/error.hpp"
#include "grmtl/propsvm.hpp"
#include "grmtl/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <cmath>

using namespace grmtl;

namespace {

double accuracy(const Labels& a, const Labels& b) {
    double hits = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        hits += a[i] == b[i];
    return hits / static_cast<double>(a.size());
}

BagSet single_bag(Index n, Index positives, double epsilon = 0.0) {
    BagSet bags;
    bags.epsilon = epsilon;
    bags.bags.resize(1);
    for (Index i = 0; i < n; ++i)
        bags.bags[0].push_back(i);
    bags.proportions = {static_cast<double>(positives) / static_cast<double>(n)};
    bags.global_fractions = {1.0};
    return bags;
}

Matrix blobs(Rng& rng, const Labels& labels, double separation) {
    Matrix x(static_cast<Index>(labels.size()), 2);
    for (Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = rng.normal() + (labels[static_cast<std::size_t>(i)] == 1 ? separation : 0.0);
        x(i, 1) = rng.normal();
    }
    return x;
}

} // namespace

TEST_CASE("kmeans: separated 1-D points") {
    Matrix x(4, 1);
    x << 0, 0.1, 10, 10.1;
    const auto c = kmeans(x, 2, 1);
    CHECK(c.assignment[0] == c.assignment[1]);
    CHECK(c.assignment[2] == c.assignment[3]);
    CHECK(c.assignment[0] != c.assignment[2]);
    const int low = c.assignment[0];
    CHECK(c.centroids(low, 0) == doctest::Approx(0.05));
    CHECK(c.centroids(1 - low, 0) == doctest::Approx(10.05));
    CHECK_THROWS_AS(kmeans(x, 4, 1), Error);
}

TEST_CASE("kmeans: well separated blobs are recovered exactly") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        LlpSynthParams p;
        p.separation = 10;
        const auto d = synth_llp(p, seed);
        const auto c = kmeans(d.features.data, 2, seed);
        std::vector<int> truth(d.truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i)
            truth[i] = d.truth[i] == 1;
        CHECK(oracle::adjusted_rand_index(c.assignment, truth) == doctest::Approx(1.0));
    }
}

TEST_CASE("kmeans: inertia matches a recomputation") {
    Rng rng(3);
    const Matrix x = oracle::random_matrix(rng, 60, 3);
    const auto c = kmeans(x, 3, 7);
    double total = 0;
    for (Index i = 0; i < x.rows(); ++i)
        total += (x.row(i) - c.centroids.row(c.assignment[static_cast<std::size_t>(i)])).squaredNorm();
    CHECK(std::abs(total - c.inertia) < 1e-8);
    for (std::size_t k = 1; k < c.inertia_trace.size(); ++k)
        CHECK(c.inertia_trace[k] <= c.inertia_trace[k - 1] + 1e-12);
}

TEST_CASE("label proportions: counting") {
    const auto bags = label_proportions({0, 0, 1, 1, 1}, 1);
    CHECK(bags.bags[0].size() == 2);
    CHECK(bags.bags[1].size() == 3);
    CHECK(bags.proportions == std::vector<double>{0.0, 1.0});
    CHECK(bags.global_fractions[0] == doctest::Approx(0.4));
    CHECK(bags.global_fractions[1] == doctest::Approx(0.6));
    CHECK_THROWS_AS(label_proportions({1, 1, 1}, 1), Error);
    CHECK(positive_fraction({1, 1, -1, 1}, {0, 1, 2, 3}) == 0.75);
}

TEST_CASE("svm: separable 1-D pair") {
    Matrix x(2, 1);
    x << -2, 2;
    const auto m = fit_linear_svm(x, {-1, 1}, 100.0);
    const Vector s = m.decision(x);
    CHECK(s(0) <= -1 + 1e-6);
    CHECK(s(1) >= 1 - 1e-6);
    CHECK(m.predict(x) == Labels{-1, 1});
}

TEST_CASE("svm: never worse than the zero classifier") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = oracle::random_matrix(rng, 30, 3);
        Labels y(30);
        for (auto& v : y)
            v = rng.uniform() < 0.5 ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const auto m = fit_linear_svm(x, y, 1.0);
        CHECK(svm_objective(m, x, y) <= 30.0);
    }
}

TEST_CASE("svm: matches a numeric oracle on 20 points in 2-D") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Labels y(20);
        for (std::size_t i = 0; i < 20; ++i)
            y[i] = i < 10 ? 1 : -1;
        const Matrix x = blobs(rng, y, 1.5);
        const auto m = fit_linear_svm(x, y, 1.0);
        const double reference = oracle::svm_objective_2d(x, y, 1.0);
        CHECK(std::abs(svm_objective(m, x, y) - reference) <= 1e-3 * std::max(1.0, reference));
    }
}

TEST_CASE("svm: row order does not change the predictions") {
    Rng rng(5);
    Labels y(40);
    for (std::size_t i = 0; i < 40; ++i)
        y[i] = i % 3 == 0 ? 1 : -1;
    const Matrix x = blobs(rng, y, 1.0);
    std::vector<Index> perm(40);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    Labels yp(40);
    for (std::size_t i = 0; i < 40; ++i)
        yp[i] = y[static_cast<std::size_t>(perm[i])];
    const auto a = fit_linear_svm(x, y, 1.0);
    const auto b = fit_linear_svm(select_rows(x, perm), yp, 1.0);
    const Matrix probe = oracle::random_matrix(rng, 200, 2, 2.0);
    const Vector da = a.decision(probe), db = b.decision(probe);
    for (Index i = 0; i < probe.rows(); ++i)
        if (std::abs(da(i)) > 1e-3)
            CHECK((da(i) > 0) == (db(i) > 0));
}

TEST_CASE("svm: single class is rejected") {
    CHECK_THROWS_AS(fit_linear_svm(Matrix::Ones(3, 1), {1, 1, 1}, 1.0), Error);
}

TEST_CASE("propsvm: fixpoint start stops after one step") {
    Matrix x(4, 1);
    x << -2, -1, 1, 2;
    const Labels init{-1, -1, 1, 1};
    const auto r = fit_propsvm(x, single_bag(4, 2), init, 1.0);
    CHECK(r.outer_iterations == 1);
    CHECK(r.converged);
    CHECK(r.labels == init);
}

TEST_CASE("propsvm: infeasible start is rejected") {
    Matrix x(4, 1);
    x << -2, -1, 1, 2;
    try {
        fit_propsvm(x, single_bag(4, 2), {1, 1, 1, -1}, 1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Infeasible);
    }
}

TEST_CASE("propsvm: matches exhaustive enumeration on a 4-point bag") {
    Matrix x(4, 1);
    x << -1.5, 0.3, -0.2, 2.0;
    const std::vector<double> xs{-1.5, 0.3, -0.2, 2.0};
    double best = 1e300;
    for (int mask = 0; mask < 16; ++mask) {
        if (__builtin_popcount(static_cast<unsigned>(mask)) != 2)
            continue;
        Labels l(4);
        for (int i = 0; i < 4; ++i)
            l[static_cast<std::size_t>(i)] = (mask >> i & 1) ? 1 : -1;
        best = std::min(best, oracle::svm_objective_1d(xs, l, 1.0));
    }
    const auto r = fit_propsvm_multistart(x, single_bag(4, 2), {1, 1, -1, -1}, 1.0);
    CHECK(std::abs(r.objective_trace.back() - best) <= 1e-3);
}

TEST_CASE("propsvm: objective is monotone and bags stay feasible") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LlpSynthParams p;
        p.separation = 2.5;
        p.spread = 1.5;
        const auto d = synth_llp(p, seed);
        const auto clusters = kmeans(d.features.data, 2, seed);
        const auto bags = label_proportions(clusters.assignment, 1, 0.2);
        const auto r = fit_propsvm(d.features.data, bags, cluster_labels(clusters.assignment, 1), 1.0);
        for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
            CHECK(r.objective_trace[k] <= r.objective_trace[k - 1] + 1e-6);
        for (std::size_t v = 0; v < 2; ++v) {
            const double pt = positive_fraction(r.labels, bags.bags[v]);
            CHECK(std::abs(pt - bags.proportions[v]) <= bags.epsilon + 1e-12);
        }
    }
}

TEST_CASE("propsvm: label step with full slack is the sign of the decision") {
    Rng rng(6);
    const Vector scores = oracle::random_matrix(rng, 50, 1);
    const Labels current(50, -1);
    const auto next = propsvm_label_step(scores, single_bag(50, 25, 1.0), current);
    for (Index i = 0; i < 50; ++i)
        CHECK(next[static_cast<std::size_t>(i)] == (scores(i) > 0 ? 1 : -1));
}

TEST_CASE("propsvm: label step picks the cheapest admissible count") {
    Vector scores(5);
    scores << 3, -3, 0.5, -0.5, 2;
    const auto next = propsvm_label_step(scores, single_bag(5, 2), Labels(5, -1));
    CHECK(next == Labels{1, -1, -1, -1, 1});
}

TEST_CASE("propsvm: beats an SVM trained on noisy labels") {
    // One bag with its known proportion; 20% of the starting labels are wrong
    // but swapped in pairs, so the start still honours the proportion.
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LlpSynthParams p;
        p.separation = 3;
        p.positive_fraction = 0.7;
        const auto d = synth_llp(p, seed);
        std::vector<Index> train, test;
        for (Index i = 0; i < d.features.rows(); ++i)
            (i % 2 ? test : train).push_back(i);
        const Matrix xt = select_rows(d.features.data, train), xe = select_rows(d.features.data, test);
        Labels yt, ye;
        for (auto i : train)
            yt.push_back(d.truth[static_cast<std::size_t>(i)]);
        for (auto i : test)
            ye.push_back(d.truth[static_cast<std::size_t>(i)]);

        const auto n = static_cast<Index>(yt.size());
        const auto positives = static_cast<Index>(std::count(yt.begin(), yt.end(), 1));
        Rng rng(seed + 100);
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < yt.size(); ++i)
            (yt[i] == 1 ? pos : neg).push_back(i);
        rng.shuffle(pos);
        rng.shuffle(neg);
        Labels noisy = yt;
        for (std::size_t k = 0; k < yt.size() / 10; ++k) {
            noisy[pos[k]] = -1;
            noisy[neg[k]] = 1;
        }

        const auto svm = fit_linear_svm(xt, noisy, 1.0);
        const auto prop = fit_propsvm(xt, single_bag(n, positives), noisy, 1.0);
        wins += accuracy(prop.model.predict(xe), ye) > accuracy(svm.predict(xe), ye);
    }
    CHECK(wins >= 8);
}

TEST_CASE("baselines: separable blobs are classified perfectly") {
    LlpSynthParams p;
    p.separation = 12;
    const auto d = synth_llp(p, 2);
    std::vector<Index> train, test;
    for (Index i = 0; i < d.features.rows(); ++i)
        (i % 4 == 0 ? test : train).push_back(i);
    Labels truth;
    for (auto i : test)
        truth.push_back(d.truth[static_cast<std::size_t>(i)]);
    for (auto mode : {BaselineMode::Clustering, BaselineMode::ClusteringSvm}) {
        const auto pred = baseline_cluster_classify(select_rows(d.features.data, train),
                                                    select_rows(d.features.data, test), mode, 3);
        const auto o = orient_clusters(pred, truth);
        CHECK(o.agreement == 1.0);
    }
}

TEST_CASE("baselines: clustering is nearest centroid") {
    Rng rng(7);
    const Matrix train = oracle::random_matrix(rng, 50, 2);
    const Matrix test = oracle::random_matrix(rng, 20, 2);
    const auto pred = baseline_cluster_classify(train, test, BaselineMode::Clustering, 11);
    const auto c = kmeans(train, 2, 11);
    for (Index i = 0; i < test.rows(); ++i) {
        const double d0 = (test.row(i) - c.centroids.row(0)).squaredNorm();
        const double d1 = (test.row(i) - c.centroids.row(1)).squaredNorm();
        CHECK(pred[static_cast<std::size_t>(i)] == (d1 < d0 ? 1 : 0));
    }
    CHECK(parse_baseline_mode("clustering+svm") == BaselineMode::ClusteringSvm);
    CHECK_THROWS_AS(parse_baseline_mode("kmeans"), Error);
}

TEST_CASE("orientation: relabelled truth, ties and null agreement") {
    const Labels truth{1, 1, -1, -1, 1};
    const auto o = orient_clusters({0, 0, 1, 1, 0}, truth);
    CHECK(o.agreement == 1.0);
    CHECK(o.apply({0, 0, 1, 1, 0}) == truth);

    const auto tie = orient_clusters({0, 1}, {1, 1});
    CHECK(tie.cluster_to_class[0] == -1);

    // Independent assignment: either mapping agrees with probability
    // q * pi + (1 - q)(1 - pi) or its complement, q = share of cluster 1.
    Rng rng(8);
    std::vector<int> assignment(4000);
    Labels labels(4000);
    for (std::size_t i = 0; i < 4000; ++i) {
        assignment[i] = rng.uniform() < 0.9 ? 1 : 0;
        labels[i] = rng.uniform() < 0.7 ? 1 : -1;
    }
    const double q = 0.9, pi = 0.7;
    const double same = q * pi + (1 - q) * (1 - pi);
    const auto null = orient_clusters(assignment, labels);
    CHECK(std::abs(null.agreement - std::max(same, 1 - same)) < 0.03);
}
