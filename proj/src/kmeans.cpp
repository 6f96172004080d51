#include "capire/kmeans.hpp"

#include "capire/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace capire {

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n) throw PreconditionError("kmeans: k must be in [1, n]");
    Rng rng(seed);

    // k-means++ seeding
    Matrix centroids(k, points.cols());
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = (points.row(i) - centroids.row(c - 1)).squaredNorm();
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
            total += d2[static_cast<std::size_t>(i)];
        }
        double pickpoint = rng.uniform() * total;
        Eigen::Index chosen = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            pickpoint -= d2[static_cast<std::size_t>(i)];
            if (pickpoint <= 0.0) {
                chosen = i;
                break;
            }
        }
        centroids.row(c) = points.row(chosen);
    }

    KMeansResult res;
    res.labels.assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (points.row(i) - centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (res.labels[static_cast<std::size_t>(i)] != best) {
                res.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        Matrix sums = Matrix::Zero(k, points.cols());
        std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(res.labels[static_cast<std::size_t>(i)]) += points.row(i);
            counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])] += 1.0;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0.0)
                centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        }
        if (!changed) break;
    }
    res.centroids = centroids;
    res.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        res.inertia += (points.row(i) - centroids.row(res.labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return res;
}

std::vector<int> agglomerative_average(const Matrix& points, int k) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n) throw PreconditionError("agglomerative: k must be in [1, n]");

    std::vector<std::vector<Eigen::Index>> clusters;
    for (Eigen::Index i = 0; i < n; ++i) clusters.push_back({i});

    Matrix dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            dist(i, j) = (points.row(i) - points.row(j)).norm();
        }
    }
    // average linkage between current clusters, recomputed from the point
    // distances (Lance-Williams would be faster; n here is small)
    auto linkage = [&](const std::vector<Eigen::Index>& a, const std::vector<Eigen::Index>& b) {
        double s = 0.0;
        for (const Eigen::Index i : a) {
            for (const Eigen::Index j : b) s += dist(i, j);
        }
        return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };

    while (static_cast<int>(clusters.size()) > k) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (const Eigen::Index i : clusters[c]) labels[static_cast<std::size_t>(i)] = static_cast<int>(c);
    }
    return labels;
}

}  // namespace capire
