#pragma once

// Brute-force reference implementations used to check the library.

#include <cmath>
#include <cstdint>
#include <optional>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// P(next | context) for every context seen in `seq`, counted window by window.
inline std::map<std::vector<int>, std::map<int, double>> hon_probabilities(const std::vector<int>& seq, int order) {
    std::map<std::vector<int>, std::map<int, double>> counts;
    std::map<std::vector<int>, double> totals;
    const auto n = static_cast<std::size_t>(order);
    for (std::size_t start = 0; start + n < seq.size(); ++start) {
        std::vector<int> ctx;
        for (std::size_t i = 0; i < n; ++i) ctx.push_back(seq[start + i]);
        counts[ctx][seq[start + n]] += 1.0;
        totals[ctx] += 1.0;
    }
    for (auto& [ctx, nexts] : counts)
        for (auto& [nx, c] : nexts) c /= totals[ctx];
    return counts;
}

/// Kendall tau-b by enumerating every pair.
inline std::optional<double> kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    std::int64_t concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) ++tie_x;
            else if (dy == 0) ++tie_y;
            else if ((dx > 0) == (dy > 0)) ++concordant;
            else ++discordant;
        }
    const double a = static_cast<double>(concordant + discordant + tie_x);
    const double b = static_cast<double>(concordant + discordant + tie_y);
    if (a == 0 || b == 0) return std::nullopt;
    return static_cast<double>(concordant - discordant) / std::sqrt(a * b);
}

/// OLS coefficients [intercept, beta...] from the normal equations.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::MatrixXd a(x.rows(), x.cols() + 1);
    a.col(0).setOnes();
    a.rightCols(x.cols()) = x;
    Eigen::MatrixXd ata = a.transpose() * a;
    return ata.ldlt().solve(a.transpose() * y);
}

}  // namespace oracle
