#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "eqstream/errors.hpp"

namespace eqstream {

/// Average ranks (1-based), ties share the mean of their rank range.
inline std::vector<double> fractional_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

/// Spearman rank correlation: Pearson correlation of the fractional ranks.
/// Returns 0 when either side is constant (undefined correlation).
inline double spearman_rank_correlation(const std::vector<double>& a,
                                        const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
    if (a.size() < 2) throw ShapeError("spearman: need at least two samples");
    const std::vector<double> ra = fractional_ranks(a);
    const std::vector<double> rb = fractional_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - mean_a, db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace eqstream
