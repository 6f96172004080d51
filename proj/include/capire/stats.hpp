#pragma once

#include <cstddef>
#include <vector>

namespace capire::stats {

// Chance-corrected partition agreement from the pair-counting contingency
// table. Noise labels (-1) are treated as a regular class. When the
// correction denominator vanishes (both partitions trivial) the value is 1
// for identical partitions and 0 otherwise.
double adjusted_rand_index(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

// Midranks for tied values.
std::vector<double> rank_with_ties(const std::vector<double>& values);

struct MannWhitneyResult {
    double u = 0.0;        // U statistic of the first sample
    double p_value = 1.0;  // two-sided
    bool exact = false;    // exact enumeration (small samples) vs normal approx
};

// Two-sided Mann-Whitney U. Normal approximation with tie correction and
// continuity correction when min(n1, n2) >= 10, otherwise exact enumeration
// over all pooled assignments.
MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y);

struct LeveneResult {
    double statistic = 0.0;  // Brown-Forsythe W (center = median)
    double p_value = 1.0;    // upper tail of F(k-1, N-k)
};

LeveneResult levene_median(const std::vector<std::vector<double>>& groups);

// ---- special functions ------------------------------------------------------

double normal_cdf(double z);
// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// Upper tail of the F distribution.
double f_sf(double f, double d1, double d2);

double percentile(std::vector<double> values, double q);  // q in [0,1], linear interp

}  // namespace capire::stats
