#include "grmtl/error.hpp"
#include "grmtl/propsvm.hpp"
#include "svm_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grmtl {

std::pair<Index, Index> BagSet::positive_count_range(std::size_t bag) const {
    const auto size = static_cast<double>(bags.at(bag).size());
    const double p = proportions.at(bag);
    // Slack of 1e-9 keeps exact proportions such as 0.9 * 10 from rounding away.
    const double lo = std::ceil((p - epsilon) * size - 1e-9);
    const double hi = std::floor((p + epsilon) * size + 1e-9);
    return {static_cast<Index>(std::max(lo, 0.0)), static_cast<Index>(std::min(hi, size))};
}

BagSet label_proportions(const std::vector<int>& assignment, int positive_cluster, double epsilon) {
    if (positive_cluster != 0 && positive_cluster != 1)
        throw Error(ErrorKind::Domain, "label_proportions: positive cluster must be 0 or 1");
    if (!(epsilon >= 0.0))
        throw Error(ErrorKind::Domain, "label_proportions: epsilon must be non-negative");
    BagSet set;
    set.epsilon = epsilon;
    set.bags.resize(2);
    for (std::size_t u = 0; u < assignment.size(); ++u) {
        const int v = assignment[u];
        if (v != 0 && v != 1)
            throw Error(ErrorKind::Domain, "label_proportions: expected a two-cluster assignment");
        set.bags[static_cast<std::size_t>(v)].push_back(static_cast<Index>(u));
    }
    const auto n = static_cast<double>(assignment.size());
    for (int v = 0; v < 2; ++v) {
        const auto& bag = set.bags[static_cast<std::size_t>(v)];
        if (bag.empty())
            throw Error(ErrorKind::Domain, "label_proportions: empty bag for cluster " + std::to_string(v));
        set.proportions.push_back(v == positive_cluster ? 1.0 : 0.0);
        set.global_fractions.push_back(static_cast<double>(bag.size()) / n);
    }
    return set;
}

double positive_fraction(const Labels& labels, const std::vector<Index>& members) {
    if (members.empty())
        throw Error(ErrorKind::Domain, "positive_fraction: empty bag");
    const auto positives = std::count_if(members.begin(), members.end(), [&](Index u) {
        return labels.at(static_cast<std::size_t>(u)) == 1;
    });
    return static_cast<double>(positives) / static_cast<double>(members.size());
}

Labels cluster_labels(const std::vector<int>& assignment, int positive_cluster) {
    Labels out(assignment.size());
    for (std::size_t u = 0; u < assignment.size(); ++u)
        out[u] = assignment[u] == positive_cluster ? 1 : -1;
    return out;
}

namespace {

void check_bags(const BagSet& bags, std::size_t n) {
    if (bags.bags.size() != bags.proportions.size())
        throw Error(ErrorKind::Shape, "propsvm: bag and proportion counts differ");
    if (!(bags.epsilon >= 0.0))
        throw Error(ErrorKind::Domain, "propsvm: epsilon must be non-negative");
    std::vector<int> seen(n, 0);
    for (std::size_t v = 0; v < bags.bags.size(); ++v) {
        const double p = bags.proportions[v];
        if (!(p >= 0.0 && p <= 1.0))
            throw Error(ErrorKind::Domain, "propsvm: bag proportion outside [0, 1]");
        if (bags.bags[v].empty())
            throw Error(ErrorKind::Domain, "propsvm: empty bag " + std::to_string(v));
        for (Index u : bags.bags[v]) {
            if (u < 0 || static_cast<std::size_t>(u) >= n)
                throw Error(ErrorKind::Shape, "propsvm: bag index out of range");
            ++seen[static_cast<std::size_t>(u)];
        }
        const auto [lo, hi] = bags.positive_count_range(v);
        if (lo > hi)
            throw Error(ErrorKind::Infeasible, "propsvm: bag " + std::to_string(v) +
                                                   " admits no positive count within epsilon");
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
        throw Error(ErrorKind::Shape, "propsvm: bags must partition the training rows");
}

double joint_objective(const SvmModel& model, const Matrix& x, const Labels& labels) {
    return svm_objective(model, x, labels);
}

} // namespace

Labels propsvm_label_step(const Vector& scores, const BagSet& bags, const Labels& current) {
    Labels next = current;
    for (std::size_t v = 0; v < bags.bags.size(); ++v) {
        const auto& bag = bags.bags[v];
        struct Item {
            double delta;
            int current;
            Index index;
        };
        std::vector<Item> items;
        items.reserve(bag.size());
        Index prefer_positive = 0;
        for (Index u : bag) {
            const double s = scores(u);
            const double delta = hinge_loss(1, s) - hinge_loss(-1, s);
            items.push_back({delta, current[static_cast<std::size_t>(u)], u});
            prefer_positive += delta < 0.0;
        }
        // Cheapest positives first; ties keep the current labels stable.
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.delta != b.delta)
                return a.delta < b.delta;
            if (a.current != b.current)
                return a.current > b.current;
            return a.index < b.index;
        });
        const auto [lo, hi] = bags.positive_count_range(v);
        if (lo > hi)
            throw Error(ErrorKind::Infeasible, "propsvm: bag " + std::to_string(v) +
                                                   " admits no positive count within epsilon");
        // Zero-cost instances keep their current label when the count allows it.
        Index zero_positive = 0;
        for (const auto& it : items)
            zero_positive += it.delta == 0.0 && it.current == 1;
        const Index count = std::clamp(prefer_positive + zero_positive, lo, hi);
        for (std::size_t r = 0; r < items.size(); ++r)
            next[static_cast<std::size_t>(items[r].index)] = static_cast<Index>(r) < count ? 1 : -1;
    }
    return next;
}

PropSvmResult fit_propsvm(const Matrix& x, const BagSet& bags, const Labels& init_labels, double cost,
                          int max_outer_iters, const SvmOptions& options) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (init_labels.size() != n)
        throw Error(ErrorKind::Shape, "fit_propsvm: label count differs from rows");
    if (max_outer_iters < 1)
        throw Error(ErrorKind::Domain, "fit_propsvm: max_outer_iters must be at least 1");
    if (!(cost > 0.0))
        throw Error(ErrorKind::Domain, "fit_propsvm: cost must be positive");
    if (!x.allFinite())
        throw Error(ErrorKind::Numeric, "fit_propsvm: non-finite input");
    check_bags(bags, n);
    for (std::size_t v = 0; v < bags.bags.size(); ++v) {
        Index positives = 0;
        for (Index u : bags.bags[v]) {
            const int y = init_labels[static_cast<std::size_t>(u)];
            if (y != 1 && y != -1)
                throw Error(ErrorKind::Domain, "fit_propsvm: labels must be -1 or +1");
            positives += y == 1;
        }
        const auto [lo, hi] = bags.positive_count_range(v);
        if (positives < lo || positives > hi)
            throw Error(ErrorKind::Infeasible, "fit_propsvm: initial labels violate the proportion of bag " +
                                                   std::to_string(v));
    }

    PropSvmResult result;
    result.labels = init_labels;
    result.model = fit_linear_svm_any(x, result.labels, cost, options);
    double current = joint_objective(result.model, x, result.labels);
    result.objective_trace.push_back(current);

    for (int outer = 1; outer <= max_outer_iters; ++outer) {
        result.outer_iterations = outer;
        const Labels next = propsvm_label_step(result.model.decision(x), bags, result.labels);
        if (next == result.labels) {
            result.converged = true;
            break;
        }
        // The relabelled objective at the old classifier bounds the refit from above;
        // keep the old classifier if the inexact refit does not beat it.
        const double relabelled = joint_objective(result.model, x, next);
        SvmModel refit = fit_linear_svm_any(x, next, cost, options);
        const double refit_value = joint_objective(refit, x, next);
        result.labels = next;
        if (refit_value <= relabelled) {
            result.model = std::move(refit);
            current = refit_value;
        } else {
            current = relabelled;
        }
        result.objective_trace.push_back(current);
    }
    return result;
}

PropSvmResult fit_propsvm_multistart(const Matrix& x, const BagSet& bags, const Labels& init_labels, double cost,
                                     int max_outer_iters, int levels, const SvmOptions& options) {
    PropSvmResult best = fit_propsvm(x, bags, init_labels, cost, max_outer_iters, options);
    if (levels < 2)
        return best;

    // Score ranking from the SVM on the given labels, best first within each bag.
    const Vector scores = fit_linear_svm_any(x, init_labels, cost, options).decision(x);
    std::vector<std::vector<Index>> ranked;
    std::vector<std::vector<Index>> counts;
    for (std::size_t v = 0; v < bags.bags.size(); ++v) {
        std::vector<Index> order = bags.bags[v];
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
        ranked.push_back(std::move(order));
        const auto [lo, hi] = bags.positive_count_range(v);
        std::vector<Index> c;
        for (int l = 0; l < levels; ++l) {
            const Index value = lo + static_cast<Index>(std::llround(static_cast<double>(l) * static_cast<double>(hi - lo) /
                                                                     static_cast<double>(levels - 1)));
            if (c.empty() || c.back() != value)
                c.push_back(value);
        }
        counts.push_back(std::move(c));
    }

    std::vector<Labels> tried{init_labels};
    int start = 0;
    // Counts are filled from the top of the ranking first, then from the bottom.
    for (const bool reversed : {false, true}) {
        std::vector<std::size_t> pick(bags.bags.size(), 0);
        for (;;) {
            Labels labels(init_labels.size(), -1);
            for (std::size_t v = 0; v < bags.bags.size(); ++v) {
                const auto& order = ranked[v];
                for (Index r = 0; r < counts[v][pick[v]]; ++r) {
                    const auto pos = reversed ? order.size() - 1 - static_cast<std::size_t>(r) : static_cast<std::size_t>(r);
                    labels[static_cast<std::size_t>(order[pos])] = 1;
                }
            }
            if (std::find(tried.begin(), tried.end(), labels) == tried.end()) {
                ++start;
                PropSvmResult run = fit_propsvm(x, bags, labels, cost, max_outer_iters, options);
                const double incumbent = best.objective_trace.back();
                if (run.objective_trace.back() < incumbent - 1e-12 * std::max(1.0, std::abs(incumbent))) {
                    run.start_index = start;
                    best = std::move(run);
                }
                tried.push_back(std::move(labels));
            }
            // Odometer over the per-bag count grids.
            std::size_t v = 0;
            while (v < pick.size() && ++pick[v] == counts[v].size())
                pick[v++] = 0;
            if (v == pick.size())
                break;
        }
    }
    best.starts_tried = start + 1;
    return best;
}

BaselineMode parse_baseline_mode(std::string_view text) {
    if (text == "clustering")
        return BaselineMode::Clustering;
    if (text == "clustering+svm")
        return BaselineMode::ClusteringSvm;
    throw Error(ErrorKind::Parse, "unknown baseline '" + std::string(text) + "'");
}

std::string_view to_string(BaselineMode mode) noexcept {
    return mode == BaselineMode::Clustering ? "clustering" : "clustering+svm";
}

std::vector<int> baseline_cluster_classify(const Matrix& x_train, const Matrix& x_test, BaselineMode mode,
                                           std::uint64_t seed, double cost) {
    const ClusterModel clusters = kmeans(x_train, 2, seed);
    if (mode == BaselineMode::Clustering)
        return assign_to_centroids(x_test, clusters.centroids);
    const SvmModel svm = fit_linear_svm(x_train, cluster_labels(clusters.assignment, 1), cost);
    const Labels predicted = svm.predict(x_test);
    std::vector<int> out(predicted.size());
    for (std::size_t u = 0; u < predicted.size(); ++u)
        out[u] = predicted[u] == 1 ? 1 : 0;
    return out;
}

Labels ClusterOrientation::apply(const std::vector<int>& assignment) const {
    Labels out(assignment.size());
    for (std::size_t u = 0; u < assignment.size(); ++u)
        out[u] = cluster_to_class.at(static_cast<std::size_t>(assignment[u]));
    return out;
}

ClusterOrientation orient_clusters(const std::vector<int>& assignment, const Labels& truth) {
    if (assignment.size() != truth.size())
        throw Error(ErrorKind::Shape, "orient_clusters: assignment and truth lengths differ");
    std::size_t identity = 0;
    for (std::size_t u = 0; u < assignment.size(); ++u) {
        const int v = assignment[u];
        if (v != 0 && v != 1)
            throw Error(ErrorKind::Domain, "orient_clusters: expected a two-cluster assignment");
        identity += (v == 0 ? -1 : 1) == truth[u];
    }
    const std::size_t flipped = assignment.size() - identity;
    const double n = std::max<double>(1.0, static_cast<double>(assignment.size()));
    if (flipped > identity)
        return {{1, -1}, static_cast<double>(flipped) / n};
    return {{-1, 1}, static_cast<double>(identity) / n};
}

} // namespace grmtl
