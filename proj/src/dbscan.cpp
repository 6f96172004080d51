#include "capire/dbscan.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>

namespace capire {

namespace {

std::vector<int> region_query(const Matrix& pts, Eigen::Index i, double eps_sq) {
    std::vector<int> out;
    for (Eigen::Index j = 0; j < pts.rows(); ++j) {
        if ((pts.row(i) - pts.row(j)).squaredNorm() <= eps_sq) out.push_back(static_cast<int>(j));
    }
    return out;
}

}  // namespace

std::vector<int> dbscan(const Matrix& coordinates, double eps, int min_pts) {
    if (eps <= 0.0) throw PreconditionError("dbscan: eps must be > 0");
    if (min_pts < 1) throw PreconditionError("dbscan: min_pts must be >= 1");
    const Eigen::Index n = coordinates.rows();
    const double eps_sq = eps * eps;

    constexpr int kUnvisited = -2;
    std::vector<int> labels(static_cast<std::size_t>(n), kUnvisited);
    int cluster = 0;

    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != kUnvisited) continue;
        std::vector<int> neighbors = region_query(coordinates, i, eps_sq);
        if (static_cast<int>(neighbors.size()) < min_pts) {
            labels[static_cast<std::size_t>(i)] = -1;  // noise unless claimed as border later
            continue;
        }
        labels[static_cast<std::size_t>(i)] = cluster;
        std::deque<int> seeds(neighbors.begin(), neighbors.end());
        while (!seeds.empty()) {
            const int q = seeds.front();
            seeds.pop_front();
            int& lq = labels[static_cast<std::size_t>(q)];
            if (lq == -1) lq = cluster;  // border point
            if (lq != kUnvisited) continue;
            lq = cluster;
            std::vector<int> qn = region_query(coordinates, q, eps_sq);
            if (static_cast<int>(qn.size()) >= min_pts) {
                seeds.insert(seeds.end(), qn.begin(), qn.end());
            }
        }
        ++cluster;
    }
    return labels;
}

std::vector<double> kdistance(const Matrix& coordinates, int k) {
    const Eigen::Index n = coordinates.rows();
    if (n < 2) throw PreconditionError("kdistance: need at least 2 points");
    if (k >= n) throw PreconditionError("kdistance: k must be < n");
    std::vector<double> kd(static_cast<std::size_t>(n));
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            row[static_cast<std::size_t>(j)] =
                j == i ? std::numeric_limits<double>::infinity()
                       : (coordinates.row(i) - coordinates.row(j)).norm();
        }
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        kd[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(k - 1)];
    }
    std::sort(kd.begin(), kd.end());
    return kd;
}

double suggest_eps(const std::vector<double>& sorted_kdist) {
    const std::size_t n = sorted_kdist.size();
    if (n < 5) return sorted_kdist.empty() ? 0.0 : sorted_kdist.back();

    // Knee of the curve on normalized axes, the top percentile excluded so a
    // few extreme stragglers cannot pose as the density transition. The knee
    // is the maximum-curvature point in the normalized sense: the rank where
    // the curve sags furthest below the chord.
    const std::size_t hi = n - 1 - std::max<std::size_t>(1, n / 100);
    const double v_lo = sorted_kdist.front();
    const double v_hi = sorted_kdist[hi];
    if (v_hi <= v_lo) return v_hi > 0.0 ? v_hi : 1.0;

    std::size_t knee = hi;
    double max_sag = 0.0;
    for (std::size_t i = 1; i < hi; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(hi);
        const double y = (sorted_kdist[i] - v_lo) / (v_hi - v_lo);
        const double sag = x - y;  // distance below the chord
        if (sag > max_sag) {
            max_sag = sag;
            knee = i;
        }
    }
    // A flat-then-rising curve (clusters + sparse residue) sags deeply; a
    // featureless curve hugs its chord. Without a pronounced knee there is no
    // density transition to read off, so fall back to a conservative low
    // quantile: only genuinely dense regions then produce core points.
    constexpr double kMinSag = 0.15;
    if (max_sag < kMinSag) {
        return sorted_kdist[static_cast<std::size_t>(0.03 * static_cast<double>(n - 1))];
    }
    return sorted_kdist[knee];
}

FilterResult filter_archetypes(const std::vector<int>& labels, std::size_t min_size) {
    FilterResult out;
    std::map<int, std::size_t> sizes;
    for (int l : labels) {
        if (l >= 0) ++sizes[l];
    }
    // order: size desc, then original label asc
    std::vector<std::pair<int, std::size_t>> retained;
    for (const auto& [label, size] : sizes) {
        if (size >= min_size) retained.push_back({label, size});
        else ++out.merged_cluster_count;
    }
    std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::map<int, int> renumber;
    for (std::size_t i = 0; i < retained.size(); ++i) {
        renumber[retained[i].first] = static_cast<int>(i);
        out.retained_ids.push_back(static_cast<int>(i));
        out.retained_sizes.push_back(retained[i].second);
    }
    out.labels.reserve(labels.size());
    for (int l : labels) {
        const auto it = renumber.find(l);
        if (it == renumber.end()) {
            out.labels.push_back(-1);
            ++out.residual_count;
        } else {
            out.labels.push_back(it->second);
        }
    }
    return out;
}

double silhouette_mean(const Matrix& coordinates, const std::vector<int>& labels) {
    const Eigen::Index n = coordinates.rows();
    std::map<int, std::vector<Eigen::Index>> clusters;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] >= 0)
            clusters[labels[static_cast<std::size_t>(i)]].push_back(i);
    }
    if (clusters.size() < 2)
        throw PreconditionError("silhouette: need at least 2 clusters (single cluster undefined)");

    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& [label, members] : clusters) {
        for (const Eigen::Index i : members) {
            if (members.size() == 1) {
                ++counted;  // singleton: s = 0
                continue;
            }
            double a = 0.0;
            for (const Eigen::Index j : members) {
                if (j != i) a += (coordinates.row(i) - coordinates.row(j)).norm();
            }
            a /= static_cast<double>(members.size() - 1);
            double b = std::numeric_limits<double>::infinity();
            for (const auto& [other_label, other_members] : clusters) {
                if (other_label == label) continue;
                double mean = 0.0;
                for (const Eigen::Index j : other_members)
                    mean += (coordinates.row(i) - coordinates.row(j)).norm();
                mean /= static_cast<double>(other_members.size());
                b = std::min(b, mean);
            }
            const double denom = std::max(a, b);
            total += denom > 0.0 ? (b - a) / denom : 0.0;
            ++counted;
        }
    }
    return total / static_cast<double>(counted);
}

ValidityIndices validity_indices(const Matrix& coordinates, const std::vector<int>& labels) {
    std::map<int, std::vector<Eigen::Index>> clusters;
    for (Eigen::Index i = 0; i < coordinates.rows(); ++i) {
        if (labels[static_cast<std::size_t>(i)] >= 0)
            clusters[labels[static_cast<std::size_t>(i)]].push_back(i);
    }
    if (clusters.size() < 2)
        throw PreconditionError("validity_indices: need at least 2 clusters");

    ValidityIndices out;
    out.silhouette = silhouette_mean(coordinates, labels);

    const Eigen::Index dims = coordinates.cols();
    std::size_t n = 0;
    Vector global = Vector::Zero(dims);
    std::map<int, Vector> centroid;
    for (const auto& [label, members] : clusters) {
        Vector c = Vector::Zero(dims);
        for (const Eigen::Index i : members) c += coordinates.row(i).transpose();
        global += c;
        c /= static_cast<double>(members.size());
        centroid[label] = c;
        n += members.size();
    }
    global /= static_cast<double>(n);

    double between = 0.0, within = 0.0;
    for (const auto& [label, members] : clusters) {
        between += static_cast<double>(members.size()) * (centroid[label] - global).squaredNorm();
        for (const Eigen::Index i : members)
            within += (coordinates.row(i).transpose() - centroid[label]).squaredNorm();
    }
    const double k = static_cast<double>(clusters.size());
    out.calinski_harabasz =
        within > 0.0 ? (between / (k - 1.0)) / (within / (static_cast<double>(n) - k))
                     : std::numeric_limits<double>::infinity();

    std::map<int, double> scatter;
    for (const auto& [label, members] : clusters) {
        double s = 0.0;
        for (const Eigen::Index i : members)
            s += (coordinates.row(i).transpose() - centroid[label]).norm();
        scatter[label] = s / static_cast<double>(members.size());
    }
    double db = 0.0;
    for (const auto& [li, ci] : centroid) {
        double worst = 0.0;
        for (const auto& [lj, cj] : centroid) {
            if (li == lj) continue;
            const double d = (ci - cj).norm();
            if (d > 0.0) worst = std::max(worst, (scatter[li] + scatter[lj]) / d);
        }
        db += worst;
    }
    out.davies_bouldin = db / k;
    return out;
}

}  // namespace capire
