#include "grmtl/error.hpp"
#include "grmtl/propsvm.hpp"
#include "grmtl/rng.hpp"

#include <limits>

namespace grmtl {

std::vector<int> assign_to_centroids(const Matrix& x, const Matrix& centroids) {
    if (x.cols() != centroids.cols())
        throw Error(ErrorKind::Shape, "assign_to_centroids: dimension mismatch");
    std::vector<int> out(static_cast<std::size_t>(x.rows()), 0);
    for (Index u = 0; u < x.rows(); ++u) {
        double best = std::numeric_limits<double>::infinity();
        for (Index v = 0; v < centroids.rows(); ++v) {
            const double d = (x.row(u) - centroids.row(v)).squaredNorm();
            if (d < best) {
                best = d;
                out[static_cast<std::size_t>(u)] = static_cast<int>(v);
            }
        }
    }
    return out;
}

double clustering_inertia(const Matrix& x, const Matrix& centroids, const std::vector<int>& assignment) {
    double total = 0.0;
    for (Index u = 0; u < x.rows(); ++u)
        total += (x.row(u) - centroids.row(assignment[static_cast<std::size_t>(u)])).squaredNorm();
    return total;
}

namespace {

Matrix seed_centroids(const Matrix& x, int k, Rng& rng) {
    const Index n = x.rows();
    Matrix c(k, x.cols());
    c.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
    Vector dist = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
    for (int v = 1; v < k; ++v) {
        const double total = dist.sum();
        Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double running = 0.0;
            pick = n - 1;
            for (Index u = 0; u < n; ++u) {
                running += dist(u);
                if (running > target) {
                    pick = u;
                    break;
                }
            }
        } else {
            pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        c.row(v) = x.row(pick);
        dist = dist.cwiseMin((x.rowwise() - c.row(v)).rowwise().squaredNorm());
    }
    return c;
}

} // namespace

ClusterModel kmeans(const Matrix& x, int k, std::uint64_t seed, int max_iters) {
    const Index n = x.rows();
    if (k < 2 || k >= n)
        throw Error(ErrorKind::Domain, "kmeans: need 2 <= k < n (k = " + std::to_string(k) +
                                           ", n = " + std::to_string(n) + ")");
    if (max_iters < 1)
        throw Error(ErrorKind::Domain, "kmeans: max_iters must be at least 1");
    if (!x.allFinite())
        throw Error(ErrorKind::Numeric, "kmeans: non-finite input");

    Rng rng(seed);
    ClusterModel model;
    model.k = k;
    model.centroids = seed_centroids(x, k, rng);
    model.assignment = assign_to_centroids(x, model.centroids);

    for (int iter = 1; iter <= max_iters; ++iter) {
        model.iterations = iter;
        Matrix sums = Matrix::Zero(k, x.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index u = 0; u < n; ++u) {
            const int v = model.assignment[static_cast<std::size_t>(u)];
            sums.row(v) += x.row(u);
            ++counts[static_cast<std::size_t>(v)];
        }
        for (int v = 0; v < k; ++v) {
            if (counts[static_cast<std::size_t>(v)] > 0) {
                model.centroids.row(v) = sums.row(v) / static_cast<double>(counts[static_cast<std::size_t>(v)]);
                continue;
            }
            // Empty cluster: move it onto the worst-fitting point.
            Index far = 0;
            double far_dist = -1.0;
            for (Index u = 0; u < n; ++u) {
                const double d =
                    (x.row(u) - model.centroids.row(model.assignment[static_cast<std::size_t>(u)])).squaredNorm();
                if (d > far_dist) {
                    far_dist = d;
                    far = u;
                }
            }
            model.centroids.row(v) = x.row(far);
            model.assignment[static_cast<std::size_t>(far)] = v;
        }
        model.inertia_trace.push_back(clustering_inertia(x, model.centroids, model.assignment));

        auto next = assign_to_centroids(x, model.centroids);
        if (next == model.assignment)
            break;
        model.assignment = std::move(next);
    }
    model.inertia = clustering_inertia(x, model.centroids, model.assignment);
    return model;
}

} // namespace grmtl
