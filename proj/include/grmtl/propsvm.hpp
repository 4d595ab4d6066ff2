#pragma once

#include "grmtl/types.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace grmtl {

/// k-means partition. assignment[u] is the cluster of row u.
struct ClusterModel {
    int k = 0;
    Matrix centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
    // Inertia after each Lloyd iteration.
    std::vector<double> inertia_trace;
    int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing or max_iters is reached. A cluster that empties is re-seeded at the
// point farthest from its current centroid.
ClusterModel kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iters = 300);

// Nearest centroid per row; ties go to the lower cluster index.
std::vector<int> assign_to_centroids(const Matrix& x, const Matrix& centroids);

// Sum of squared distances to the assigned centroids.
double clustering_inertia(const Matrix& x, const Matrix& centroids, const std::vector<int>& assignment);

/// Disjoint bags with a target positive proportion each.
struct BagSet {
    std::vector<std::vector<Index>> bags;
    std::vector<double> proportions;
    double epsilon = 0.1;
    // |bag| / n for every bag, reported alongside the within-bag targets.
    std::vector<double> global_fractions;

    // Admissible number of positives in `bag` under |p~ - p| <= epsilon.
    std::pair<Index, Index> positive_count_range(std::size_t bag) const;
};

// Two bags from a two-cluster assignment: the positive cluster's bag targets
// proportion 1, the other 0.
BagSet label_proportions(const std::vector<int>& assignment, int positive_cluster, double epsilon = 0.1);

// Fraction of +1 labels among `members`.
double positive_fraction(const Labels& labels, const std::vector<Index>& members);

// +1 for rows in the positive cluster, -1 otherwise.
Labels cluster_labels(const std::vector<int>& assignment, int positive_cluster);

/// Linear SVM: decision(x) = weights . x + bias.
struct SvmModel {
    Vector weights;
    double bias = 0.0;
    double cost = 1.0;

    Vector decision(const Matrix& x) const;
    // +1 where the decision value is >= 0.
    Labels predict(const Matrix& x) const;
};

struct SvmOptions {
    // Stop when the duality gap is below tol times the primal objective.
    double tol = 1e-5;
    long max_iterations = 50'000'000;
};

double hinge_loss(int label, double score) noexcept;
// 1/2 ||w||^2 + cost * sum_u hinge(c_u, w . x_u + b)
double svm_objective(const SvmModel& model, const Matrix& x, const Labels& labels);

// Exact dual solve (pairwise SMO) of the soft-margin problem with an
// unregularized bias; the bias is then set by exact line search on the primal.
SvmModel fit_linear_svm(const Matrix& x, const Labels& labels, double cost, const SvmOptions& options = {});

struct PropSvmResult {
    SvmModel model;
    Labels labels;
    // Joint objective after every SVM fit, starting with the fit on the initial labels.
    std::vector<double> objective_trace;
    int outer_iterations = 0;
    bool converged = false;
    // Multi-start bookkeeping: which start won (0 = the given labels) and how many ran.
    int start_index = 0;
    int starts_tried = 1;
};

// Alternating minimization over the SVM and the bag-feasible instance labels.
// The label step sorts each bag by L(+1, s) - L(-1, s) and makes the cheapest
// admissible count positive.
PropSvmResult fit_propsvm(const Matrix& x, const BagSet& bags, const Labels& init_labels, double cost,
                          int max_outer_iters = 50, const SvmOptions& options = {});

// Runs fit_propsvm from the given labels and from `levels` admissible positive
// counts per bag, each filled from the top and then from the bottom of the
// first SVM's decision ranking, and keeps the run with the lowest final
// objective. levels < 2 is a single start.
PropSvmResult fit_propsvm_multistart(const Matrix& x, const BagSet& bags, const Labels& init_labels, double cost,
                                     int max_outer_iters = 50, int levels = 3, const SvmOptions& options = {});

// One label step for a fixed classifier (exposed for testing).
Labels propsvm_label_step(const Vector& scores, const BagSet& bags, const Labels& current);

enum class BaselineMode { Clustering, ClusteringSvm };

BaselineMode parse_baseline_mode(std::string_view text);
std::string_view to_string(BaselineMode mode) noexcept;

// Test-set cluster indices (0/1) predicted by a two-cluster baseline fitted on
// the training rows: nearest centroid, or a linear SVM trained on the cluster
// labels (cluster 1 = +1).
std::vector<int> baseline_cluster_classify(const Matrix& x_train, const Matrix& x_test, BaselineMode mode,
                                           std::uint64_t seed, double cost = 1.0);

/// Mapping from cluster index to class label chosen by agreement with truth.
struct ClusterOrientation {
    std::array<int, 2> cluster_to_class{-1, 1};
    double agreement = 0.0;

    Labels apply(const std::vector<int>& assignment) const;
};

// Picks whichever of the two cluster->class mappings agrees more with truth;
// on a tie cluster 0 maps to -1.
ClusterOrientation orient_clusters(const std::vector<int>& assignment, const Labels& truth);

} // namespace grmtl
