#include "capire/embedding.hpp"

#include "capire/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace capire {

void EmbeddingParams::check(Eigen::Index n_samples) const {
    if (dims != 2 && dims != 3) throw ConfigError("embedding.dims must be 2 or 3");
    if (n_neighbors < 2) throw ConfigError("embedding.n_neighbors must be >= 2");
    if (n_samples <= n_neighbors)
        throw PreconditionError("embedding needs more samples than n_neighbors");
    if (epochs < 1) throw ConfigError("embedding.epochs must be >= 1");
    if (min_dist <= 0 || spread <= 0) throw ConfigError("embedding.min_dist/spread must be > 0");
}

void fit_attraction_curve(double min_dist, double spread, double& a, double& b) {
    // target psi(d) over a fixed grid, then Gauss-Newton on (a, b)
    constexpr int kGrid = 300;
    std::vector<double> xs(kGrid), ys(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        const double x = 3.0 * spread * static_cast<double>(i) / (kGrid - 1);
        xs[i] = x;
        ys[i] = x < min_dist ? 1.0 : std::exp(-(x - min_dist) / spread);
    }
    a = 1.5;
    b = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        double j11 = 0, j12 = 0, j22 = 0, g1 = 0, g2 = 0;
        for (int i = 0; i < kGrid; ++i) {
            const double x = xs[i];
            if (x <= 0.0) continue;
            const double xp = std::pow(x, 2.0 * b);
            const double denom = 1.0 + a * xp;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            const double dfda = -xp / (denom * denom);
            const double dfdb = -2.0 * a * xp * std::log(x) / (denom * denom);
            j11 += dfda * dfda;
            j12 += dfda * dfdb;
            j22 += dfdb * dfdb;
            g1 += dfda * r;
            g2 += dfdb * r;
        }
        const double det = j11 * j22 - j12 * j12;
        if (std::abs(det) < 1e-18) break;
        const double da = -(j22 * g1 - j12 * g2) / det;
        const double db = -(-j12 * g1 + j11 * g2) / det;
        a += da;
        b += db;
        a = std::max(1e-3, a);
        b = std::max(1e-3, b);
        if (std::abs(da) + std::abs(db) < 1e-12) break;
    }
}

void knn_exact(const Matrix& points, int k, Eigen::MatrixXi& indices, Matrix& distances) {
    const Eigen::Index n = points.rows();
    if (k >= n) throw PreconditionError("knn_exact: k must be < n");

    // pairwise squared distances via the Gram expansion
    const Vector sq = points.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * points * points.transpose());
    d2.colwise() += sq;
    d2.rowwise() += sq.transpose();

    indices.resize(n, k);
    distances.resize(n, k);
    std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            order[static_cast<std::size_t>(j)] = {j == i ? std::numeric_limits<double>::infinity()
                                                         : std::max(0.0, d2(i, j)),
                                                  j};
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        for (int j = 0; j < k; ++j) {
            indices(i, j) = static_cast<int>(order[static_cast<std::size_t>(j)].second);
            distances(i, j) = std::sqrt(order[static_cast<std::size_t>(j)].first);
        }
    }
}

namespace {

struct Edge {
    int from;
    int to;
    double weight;
};

// Per-point bandwidth: smallest positive neighbor distance is the offset rho;
// sigma solves sum_j exp(-max(0, d_ij - rho) / sigma) = log2(k) by bisection.
void smooth_knn(const Matrix& distances, std::vector<double>& rho, std::vector<double>& sigma) {
    const Eigen::Index n = distances.rows();
    const int k = static_cast<int>(distances.cols());
    const double target = std::log2(static_cast<double>(k));
    rho.assign(static_cast<std::size_t>(n), 0.0);
    sigma.assign(static_cast<std::size_t>(n), 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            if (distances(i, j) > 0.0) {
                rho[static_cast<std::size_t>(i)] = distances(i, j);
                break;
            }
        }
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
        for (int it = 0; it < 64; ++it) {
            double sum = 0.0;
            for (int j = 0; j < k; ++j) {
                const double d = distances(i, j) - rho[static_cast<std::size_t>(i)];
                sum += d <= 0.0 ? 1.0 : std::exp(-d / mid);
            }
            if (std::abs(sum - target) < 1e-5) break;
            if (sum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        sigma[static_cast<std::size_t>(i)] = std::max(mid, 1e-10);
    }
}

}  // namespace

Matrix embed(const Matrix& standardized, const EmbeddingParams& params) {
    const Eigen::Index n = standardized.rows();
    params.check(n);

    // degenerate input: every row identical
    bool all_same = true;
    for (Eigen::Index r = 1; r < n && all_same; ++r) {
        if ((standardized.row(r) - standardized.row(0)).cwiseAbs().maxCoeff() > 0.0)
            all_same = false;
    }
    if (all_same) throw PreconditionError("embed: degenerate input, all rows identical");

    const int k = params.n_neighbors;
    Eigen::MatrixXi knn_idx;
    Matrix knn_dist;
    knn_exact(standardized, k, knn_idx, knn_dist);

    std::vector<double> rho, sigma;
    smooth_knn(knn_dist, rho, sigma);

    // directed membership strengths, then fuzzy union P + P^T - P o P^T
    std::vector<std::vector<std::pair<int, double>>> directed(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            const double d = knn_dist(i, j) - rho[static_cast<std::size_t>(i)];
            const double w = d <= 0.0 ? 1.0 : std::exp(-d / sigma[static_cast<std::size_t>(i)]);
            directed[static_cast<std::size_t>(i)].push_back({knn_idx(i, j), w});
        }
    }
    auto directed_weight = [&](int from, int to) -> double {
        for (const auto& [t, w] : directed[static_cast<std::size_t>(from)]) {
            if (t == to) return w;
        }
        return 0.0;
    };
    // both directions of every pair carry the union weight, so each endpoint
    // drives its own attraction/negative-sampling stream
    std::vector<Edge> edges;
    edges.reserve(2 * static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    for (int i = 0; i < static_cast<int>(n); ++i) {
        for (const auto& [j, w_ij] : directed[static_cast<std::size_t>(i)]) {
            const double w_ji = directed_weight(j, i);
            const double w = w_ij + w_ji - w_ij * w_ji;
            if (w <= 0.0) continue;
            edges.push_back({i, j, w});
            if (w_ji == 0.0) edges.push_back({j, i, w});  // pair absent from j's list
        }
    }

    // PCA initialization: deterministic, keeps macro structure before SGD
    Matrix coords(n, params.dims);
    {
        Matrix centered = standardized.rowwise() - standardized.colwise().mean();
        Matrix cov = centered.transpose() * centered / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        const Eigen::Index d = cov.rows();
        Matrix components(d, params.dims);
        for (int c = 0; c < params.dims; ++c) {
            Vector v = eig.eigenvectors().col(d - 1 - c);
            // sign convention: largest |loading| coordinate positive
            Eigen::Index arg = 0;
            v.cwiseAbs().maxCoeff(&arg);
            if (v(arg) < 0) v = -v;
            components.col(c) = v;
        }
        coords = centered * components;
        const double scale = coords.cwiseAbs().maxCoeff();
        if (scale > 0) coords *= 10.0 / scale;
    }

    double a, b;
    fit_attraction_curve(params.min_dist, params.spread, a, b);

    // epochs-per-sample schedule from the reference method: an edge with
    // weight w fires every max_w / w epochs
    double max_w = 0.0;
    for (const auto& e : edges) max_w = std::max(max_w, e.weight);
    std::vector<double> epochs_per_sample(edges.size());
    std::vector<double> next_sample(edges.size());
    std::vector<double> epochs_per_negative(edges.size());
    std::vector<double> next_negative(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        epochs_per_sample[e] = max_w / edges[e].weight;
        next_sample[e] = epochs_per_sample[e];
        epochs_per_negative[e] = epochs_per_sample[e] / params.negative_sample_rate;
        next_negative[e] = epochs_per_negative[e];
    }

    Rng rng(params.seed);
    const double move_clip = 4.0;
    auto clip = [&](double x) { return std::max(-move_clip, std::min(move_clip, x)); };

    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        const double alpha =
            params.learning_rate * (1.0 - static_cast<double>(epoch - 1) / params.epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_sample[e] > epoch) continue;
            const int i = edges[e].from;
            const int j = edges[e].to;

            double dist_sq = 0.0;
            for (int d = 0; d < params.dims; ++d) {
                const double diff = coords(i, d) - coords(j, d);
                dist_sq += diff * diff;
            }
            if (dist_sq > 0.0) {
                const double pd = std::pow(dist_sq, b);
                const double grad_coeff = (-2.0 * a * b * pd / dist_sq) / (a * pd + 1.0);
                for (int d = 0; d < params.dims; ++d) {
                    const double g = clip(grad_coeff * (coords(i, d) - coords(j, d))) * alpha;
                    coords(i, d) += g;
                    coords(j, d) -= g;
                }
            }
            next_sample[e] += epochs_per_sample[e];

            const int n_neg =
                std::max(0, static_cast<int>((epoch - next_negative[e]) / epochs_per_negative[e]));
            for (int neg = 0; neg < n_neg; ++neg) {
                const int other = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
                if (other == i) continue;
                double nd_sq = 0.0;
                for (int d = 0; d < params.dims; ++d) {
                    const double diff = coords(i, d) - coords(other, d);
                    nd_sq += diff * diff;
                }
                if (nd_sq > 0.0) {
                    const double pd = std::pow(nd_sq, b);
                    const double grad_coeff = (2.0 * b) / ((0.001 + nd_sq) * (a * pd + 1.0));
                    for (int d = 0; d < params.dims; ++d) {
                        const double g =
                            clip(grad_coeff * (coords(i, d) - coords(other, d))) * alpha;
                        coords(i, d) += g;
                    }
                } else {
                    for (int d = 0; d < params.dims; ++d) coords(i, d) += move_clip * alpha;
                }
            }
            next_negative[e] += n_neg * epochs_per_negative[e];
        }
    }
    return coords;
}

}  // namespace capire
