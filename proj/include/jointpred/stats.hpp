#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "jointpred/errors.hpp"

namespace jointpred::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw EmptyInput("mean of empty sequence");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n-1); zero for a single element.
inline double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw EmptyInput("median of empty sequence");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Percentile with linear interpolation between order statistics, q in [0,1].
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw EmptyInput("quantile of empty sequence");
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

/// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw LengthMismatch("pearson: length mismatch");
    if (x.size() < 2) return std::nullopt;
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw LengthMismatch("spearman: length mismatch");
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    return pearson(rx, ry);
}

/// Two-sided p-value of a correlation r over n pairs, t-approximation.
double correlation_p_value(double r, std::size_t n);

/// |r| above which a correlation over n pairs is significant at `alpha`
/// (two-sided, t-approximation).
double critical_correlation(double alpha, std::size_t n);

}  // namespace jointpred::stats

#include <boost/math/distributions/students_t.hpp>

namespace jointpred::stats {

inline double correlation_p_value(double r, std::size_t n) {
    if (n < 3) return 1.0;
    double df = static_cast<double>(n - 2);
    double rr = std::min(std::abs(r), 1.0 - 1e-15);
    double t = rr * std::sqrt(df / (1.0 - rr * rr));
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

inline double critical_correlation(double alpha, std::size_t n) {
    if (n < 3) return 1.0;
    double df = static_cast<double>(n - 2);
    boost::math::students_t dist(df);
    double t = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
    return t / std::sqrt(df + t * t);
}

}  // namespace jointpred::stats
