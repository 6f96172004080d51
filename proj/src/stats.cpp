#include "capire/stats.hpp"

#include "capire/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace capire::stats {

double adjusted_rand_index(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw PreconditionError("adjusted_rand_index: length mismatch");
    if (labels_a.size() < 2)
        throw PreconditionError("adjusted_rand_index: need at least 2 items");

    std::map<std::pair<int, int>, double> contingency;
    std::map<int, double> row_sum, col_sum;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        contingency[{labels_a[i], labels_b[i]}] += 1.0;
        row_sum[labels_a[i]] += 1.0;
        col_sum[labels_b[i]] += 1.0;
    }
    auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, count] : contingency) index += choose2(count);
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& [label, count] : row_sum) sum_a += choose2(count);
    for (const auto& [label, count] : col_sum) sum_b += choose2(count);
    const double total_pairs = choose2(static_cast<double>(labels_a.size()));
    const double expected = sum_a * sum_b / total_pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (std::abs(denom) < 1e-12) {
        // both partitions trivial (all-one-cluster or all-singletons)
        return contingency.size() == row_sum.size() && contingency.size() == col_sum.size() ? 1.0
                                                                                            : 0.0;
    }
    return (index - expected) / denom;
}

std::vector<double> rank_with_ties(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = midrank;
        i = j + 1;
    }
    return ranks;
}

namespace {

double u_statistic_direct(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double xv : x) {
        for (double yv : y) {
            if (xv > yv) u += 1.0;
            else if (xv == yv) u += 0.5;
        }
    }
    return u;
}

// exact two-sided p by enumerating all C(n1+n2, n1) splits of the pooled
// sample; feasible for the small-group regime where it is used
void enumerate_u(const std::vector<double>& pooled, std::size_t n1, std::vector<double>& u_values) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> pick(n1);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
        std::vector<double> x, y;
        std::size_t p = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (p < n1 && pick[p] == i) {
                x.push_back(pooled[i]);
                ++p;
            } else {
                y.push_back(pooled[i]);
            }
        }
        u_values.push_back(u_statistic_direct(x, y));
        // next combination
        std::size_t k = n1;
        while (k > 0) {
            --k;
            if (pick[k] != k + n - n1) {
                ++pick[k];
                for (std::size_t j = k + 1; j < n1; ++j) pick[j] = pick[j - 1] + 1;
                break;
            }
            if (k == 0) return;
        }
        if (n1 == 0) return;
    }
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw PreconditionError("mann_whitney_u: empty sample");
    MannWhitneyResult res;
    const double n1 = static_cast<double>(x.size());
    const double n2 = static_cast<double>(y.size());
    res.u = u_statistic_direct(x, y);

    if (std::min(x.size(), y.size()) < 10 && x.size() + y.size() <= 22) {
        res.exact = true;
        std::vector<double> pooled = x;
        pooled.insert(pooled.end(), y.begin(), y.end());
        std::sort(pooled.begin(), pooled.end());
        std::vector<double> u_values;
        enumerate_u(pooled, x.size(), u_values);
        double le = 0.0, ge = 0.0;
        for (double u : u_values) {
            if (u <= res.u + 1e-12) le += 1.0;
            if (u >= res.u - 1e-12) ge += 1.0;
        }
        const double total = static_cast<double>(u_values.size());
        res.p_value = std::min(1.0, 2.0 * std::min(le / total, ge / total));
        return res;
    }

    // normal approximation, tie-corrected variance, continuity correction
    std::vector<double> pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    const double n = n1 + n2;
    std::map<double, double> tie_counts;
    for (double v : pooled) tie_counts[v] += 1.0;
    double tie_term = 0.0;
    for (const auto& [value, t] : tie_counts) tie_term += t * t * t - t;
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        res.p_value = 1.0;  // all values tied
        return res;
    }
    const double z = (std::abs(res.u - mu) - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::max(0.0, z))));
    return res;
}

LeveneResult levene_median(const std::vector<std::vector<double>>& groups) {
    const std::size_t k = groups.size();
    if (k < 2) throw PreconditionError("levene: need at least 2 groups");
    std::size_t n_total = 0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw PreconditionError("levene: every group needs >= 2 values");
        n_total += g.size();
    }

    std::vector<std::vector<double>> z(k);
    std::vector<double> z_mean(k, 0.0);
    double z_grand = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        std::vector<double> sorted = groups[g];
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        for (double v : groups[g]) {
            const double d = std::abs(v - median);
            z[g].push_back(d);
            z_mean[g] += d;
            z_grand += d;
        }
        z_mean[g] /= static_cast<double>(m);
    }
    z_grand /= static_cast<double>(n_total);

    double between = 0.0, within = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        between += static_cast<double>(groups[g].size()) * (z_mean[g] - z_grand) * (z_mean[g] - z_grand);
        for (double v : z[g]) within += (v - z_mean[g]) * (v - z_mean[g]);
    }
    LeveneResult res;
    if (within <= 0.0) {
        res.statistic = between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        res.p_value = between > 0.0 ? 0.0 : 1.0;
        return res;
    }
    const double d1 = static_cast<double>(k - 1);
    const double d2 = static_cast<double>(n_total - k);
    res.statistic = (d2 / d1) * (between / within);
    res.p_value = f_sf(res.statistic, d1, d2);
    return res;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Lentz continued fraction for the incomplete beta.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_beta =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

double f_sf(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw PreconditionError("percentile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace capire::stats
