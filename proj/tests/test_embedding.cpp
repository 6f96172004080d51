#include "capire/embedding.hpp"

#include "capire/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

using namespace capire;

namespace {

// three well-separated gaussian blobs in high dimension
Matrix blobs(int per_blob, int dims, double separation, std::uint64_t seed) {
    Rng rng(seed);
    Matrix pts(3 * per_blob, dims);
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            for (int d = 0; d < dims; ++d) {
                const double center = d % 3 == b ? separation : 0.0;
                pts(b * per_blob + i, d) = center + rng.normal(0.0, 1.0);
            }
        }
    }
    return pts;
}

double blob_separation_ratio(const Matrix& coords, int per_blob) {
    // min inter-centroid distance over max intra-blob diameter-ish spread
    std::vector<Vector> centroids;
    double max_spread = 0.0;
    for (int b = 0; b < 3; ++b) {
        Vector c = Vector::Zero(coords.cols());
        for (int i = 0; i < per_blob; ++i) c += coords.row(b * per_blob + i).transpose();
        c /= per_blob;
        centroids.push_back(c);
        double spread = 0.0;
        for (int i = 0; i < per_blob; ++i) {
            spread = std::max(spread, (coords.row(b * per_blob + i).transpose() - c).norm());
        }
        max_spread = std::max(max_spread, spread);
    }
    double min_dist = 1e300;
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            min_dist = std::min(min_dist, (centroids[static_cast<std::size_t>(a)] -
                                           centroids[static_cast<std::size_t>(b)])
                                              .norm());
        }
    }
    return min_dist / max_spread;
}

}  // namespace

TEST_CASE("attraction curve fit reproduces the reference coefficients") {
    double a, b;
    fit_attraction_curve(0.1, 1.0, a, b);
    CHECK(a == doctest::Approx(1.5769434602697652).epsilon(1e-3));
    CHECK(b == doctest::Approx(0.8950608778515733).epsilon(1e-3));
    fit_attraction_curve(0.5, 1.0, a, b);
    CHECK(a == doctest::Approx(0.5830300203414425).epsilon(1e-3));
    CHECK(b == doctest::Approx(1.3341669924314914).epsilon(1e-3));
}

TEST_CASE("exact knn: indices, distances, tie-by-index") {
    Matrix pts(4, 1);
    pts << 0.0, 1.0, 2.0, 3.0;
    Eigen::MatrixXi idx;
    Matrix dist;
    knn_exact(pts, 2, idx, dist);
    CHECK(idx(0, 0) == 1);
    CHECK(idx(0, 1) == 2);
    CHECK(dist(0, 0) == doctest::Approx(1.0));
    // point 1 ties between 0 and 2 at distance 1; lower index first
    CHECK(idx(1, 0) == 0);
    CHECK(idx(1, 1) == 2);
    CHECK_THROWS_AS(knn_exact(pts, 4, idx, dist), PreconditionError);
}

TEST_CASE("same seed gives identical coordinates, different seed does not") {
    const Matrix x = blobs(40, 10, 8.0, 5);
    EmbeddingParams p;
    p.n_neighbors = 10;
    p.epochs = 60;
    p.seed = 9;
    const Matrix a = embed(x, p);
    const Matrix b = embed(x, p);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    p.seed = 10;
    const Matrix c = embed(x, p);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("degenerate input (all rows identical) is rejected") {
    Matrix x = Matrix::Ones(50, 5);
    EmbeddingParams p;
    p.n_neighbors = 5;
    CHECK_THROWS_AS(embed(x, p), PreconditionError);
}

TEST_CASE("needs more samples than neighbors") {
    Matrix x = Matrix::Random(10, 4);
    EmbeddingParams p;
    p.n_neighbors = 15;
    CHECK_THROWS_AS(embed(x, p), PreconditionError);
}

TEST_CASE("duplicated rows land on near-coincident embedded points") {
    Matrix x = blobs(30, 8, 6.0, 6);
    x.row(1) = x.row(0);  // exact duplicate pair
    EmbeddingParams p;
    p.n_neighbors = 10;
    p.epochs = 120;
    p.seed = 3;
    const Matrix y = embed(x, p);
    const double pair_dist = (y.row(0) - y.row(1)).norm();
    // typical scale of the layout
    double scale = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) scale = std::max(scale, y.row(i).norm());
    CHECK(pair_dist < 0.15 * scale);
}

TEST_CASE("well-separated blobs stay separated in the embedding") {
    const Matrix x = blobs(60, 12, 10.0, 7);
    EmbeddingParams p;
    p.n_neighbors = 15;
    p.epochs = 200;
    p.seed = 11;
    p.dims = 3;
    const Matrix y = embed(x, p);
    CHECK(blob_separation_ratio(y, 60) > 1.0);
}

TEST_CASE("trustworthiness: embedded neighborhoods preserve input neighborhoods") {
    // blobs of intrinsic dimension 3 (collinear centers + 2 noise axes), so a
    // 3-d layout can genuinely preserve neighbor sets
    const int per_blob = 50;
    Rng rng(8);
    Matrix x = Matrix::Zero(3 * per_blob, 10);
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            const int row = b * per_blob + i;
            x(row, 0) = 16.0 * b;
            x(row, 7) = rng.normal(0.0, 1.0);
            x(row, 8) = rng.normal(0.0, 1.0);
        }
    }
    EmbeddingParams p;
    p.n_neighbors = 15;
    p.epochs = 300;
    p.seed = 13;
    const Matrix y = embed(x, p);

    const int k = p.n_neighbors;
    Eigen::MatrixXi idx_in, idx_out;
    Matrix d_in, d_out;
    knn_exact(x, k, idx_in, d_in);
    knn_exact(y, k, idx_out, d_out);
    double overlap = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::set<int> in_set;
        for (int j = 0; j < k; ++j) in_set.insert(idx_in(i, j));
        int hits = 0;
        for (int j = 0; j < k; ++j) hits += in_set.count(idx_out(i, j));
        overlap += static_cast<double>(hits) / k;
    }
    overlap /= static_cast<double>(x.rows());
    CHECK(overlap > 0.8);
}
