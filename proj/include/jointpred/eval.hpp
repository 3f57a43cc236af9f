#pragma once

// Evaluation battery: SMAPE, Kendall's tau-b, monotone composite scoring,
// incremental-validity differences, discriminant matrix and reliability
// intervals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointpred/core.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::eval {

/// Symmetric MAPE in percent, bounded to [0, 200]: the denominator is the mean
/// of magnitudes and a term with both values zero contributes 0.
inline double smape(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw LengthMismatch("smape: length mismatch");
    if (pred.empty()) throw EmptyInput("smape: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(actual[i]) || !std::isfinite(pred[i]))
            throw NonFiniteValue("smape: non-finite input");
        double denom = 0.5 * (std::abs(pred[i]) + std::abs(actual[i]));
        if (denom > 0.0) total += std::abs(pred[i] - actual[i]) / denom;
    }
    return 100.0 * total / static_cast<double>(pred.size());
}

namespace detail {

// Merge sort on `v` returning the number of inversions (pairs i<j, v[i]>v[j]).
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf,
                                      std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            buf[k++] = v[j++];
            inv += mid - i;
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

template <class Range, class Key>
std::uint64_t tied_pairs(const Range& sorted, Key key) {
    std::uint64_t ties = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        while (j < sorted.size() && key(sorted[j]) == key(sorted[i])) ++j;
        std::uint64_t t = j - i;
        ties += t * (t - 1) / 2;
        i = j;
    }
    return ties;
}

}  // namespace detail

/// Tie-corrected Kendall tau-b in O(n log n) (sort + merge inversion count).
/// Returns nullopt when either vector is entirely tied.
inline std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw LengthMismatch("kendall_tau: length mismatch");
    if (x.size() < 2) throw EmptyInput("kendall_tau: need at least 2 pairs");
    const std::size_t n = x.size();
    std::vector<std::pair<double, double>> xy(n);
    for (std::size_t i = 0; i < n; ++i) xy[i] = {x[i], y[i]};
    std::sort(xy.begin(), xy.end());

    const std::uint64_t n0 = std::uint64_t{n} * (n - 1) / 2;
    const std::uint64_t n1 = detail::tied_pairs(xy, [](const auto& p) { return p.first; });
    const std::uint64_t n3 = detail::tied_pairs(xy, [](const auto& p) { return p; });

    std::vector<double> ys(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = xy[i].second;
    const std::uint64_t swaps = detail::count_inversions(ys, buf, 0, n);
    const std::uint64_t n2 = detail::tied_pairs(ys, [](double v) { return v; });

    if (n0 == n1 || n0 == n2) return std::nullopt;
    const auto numerator = static_cast<std::int64_t>(n0 - n1 - n2 + n3) -
                           2 * static_cast<std::int64_t>(swaps);
    return static_cast<double>(numerator) /
           std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

// ---------------------------------------------------------------------------
// Monotone composite (GeMM-style) scoring
// ---------------------------------------------------------------------------

struct GemmConfig {
    int restarts = 20;
    int iterations = 200;
    std::uint64_t seed = 0;
};

struct GemmFit {
    std::vector<double> weights;  // on standardized predictors
    std::vector<double> center;
    std::vector<double> scale;
    std::optional<double> tau;

    std::vector<double> composite(const Eigen::MatrixXd& predictors) const {
        std::vector<double> out(static_cast<std::size_t>(predictors.rows()), 0.0);
        for (Eigen::Index i = 0; i < predictors.rows(); ++i)
            for (std::size_t j = 0; j < weights.size(); ++j)
                out[static_cast<std::size_t>(i)] +=
                    weights[j] * (predictors(i, static_cast<Eigen::Index>(j)) - center[j]) / scale[j];
        return out;
    }
};

/// Finds weights of a linear composite of `predictors` (rows = cases) that
/// maximize Kendall's tau with `actual`. Seeded coordinate search: every unit
/// weight vector is a start, the remaining starts are random directions.
/// A single predictor is scored as-is, so the result equals kendall_tau.
inline GemmFit gemm_fit(const Eigen::MatrixXd& predictors, std::span<const double> actual,
                        const GemmConfig& cfg = {}) {
    const auto n = static_cast<std::size_t>(predictors.rows());
    const auto m = static_cast<std::size_t>(predictors.cols());
    if (n != actual.size()) throw LengthMismatch("gemm: length mismatch");
    if (m == 0) throw EmptyInput("gemm: no predictors");

    GemmFit fit;
    fit.center.assign(m, 0.0);
    fit.scale.assign(m, 1.0);
    fit.weights.assign(m, 0.0);
    if (m == 1) {
        fit.weights[0] = 1.0;
        std::vector<double> x(predictors.col(0).data(), predictors.col(0).data() + n);
        fit.tau = kendall_tau(x, actual);
        return fit;
    }

    Eigen::MatrixXd z = predictors;
    for (std::size_t j = 0; j < m; ++j) {
        auto col = predictors.col(static_cast<Eigen::Index>(j));
        double c = col.mean();
        double s = std::sqrt((col.array() - c).square().sum() / std::max<double>(1.0, double(n) - 1));
        fit.center[j] = c;
        fit.scale[j] = s > 0.0 ? s : 1.0;
        z.col(static_cast<Eigen::Index>(j)) = (col.array() - c) / fit.scale[j];
    }

    std::vector<double> comp(n);
    auto score = [&](const std::vector<double>& w) -> double {
        Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(m));
        Eigen::VectorXd c = z * wv;
        for (std::size_t i = 0; i < n; ++i) comp[i] = c[static_cast<Eigen::Index>(i)];
        auto t = kendall_tau(comp, actual);
        return t ? *t : -INFINITY;
    };

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> starts;
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> w(m, 0.0);
        w[j] = 1.0;
        starts.push_back(std::move(w));
    }
    while (starts.size() < static_cast<std::size_t>(cfg.restarts)) {
        std::vector<double> w(m);
        for (auto& v : w) v = gauss(rng);
        starts.push_back(std::move(w));
    }

    double best = -INFINITY;
    for (auto w : starts) {
        double cur = score(w);
        double step = 0.5;
        std::size_t since_improve = 0;
        for (int it = 0; it < cfg.iterations && step > 1e-6; ++it) {
            std::size_t j = static_cast<std::size_t>(it) % m;
            bool improved = false;
            for (double dir : {1.0, -1.0}) {
                auto trial = w;
                trial[j] += dir * step;
                double s = score(trial);
                if (s > cur) {
                    cur = s;
                    w = std::move(trial);
                    improved = true;
                    break;
                }
            }
            since_improve = improved ? 0 : since_improve + 1;
            if (since_improve >= m) {
                step *= 0.5;
                since_improve = 0;
            }
        }
        if (cur > best) {
            best = cur;
            fit.weights = w;
        }
    }
    fit.tau = std::isfinite(best) ? std::optional<double>(best) : std::nullopt;
    return fit;
}

inline std::optional<double> gemm_tau(const Eigen::MatrixXd& predictors,
                                      std::span<const double> actual, const GemmConfig& cfg = {}) {
    return gemm_fit(predictors, actual, cfg).tau;
}

// ---------------------------------------------------------------------------
// Baseline, incremental validity, discriminant validity, reliability
// ---------------------------------------------------------------------------

/// Constant predictor equal to the mean of the training targets.
struct ExpectedValueBaseline {
    double value = 0.0;
    std::vector<double> predict(std::size_t rows) const { return std::vector<double>(rows, value); }
};

inline ExpectedValueBaseline expected_value_baseline(std::span<const double> train_targets) {
    if (train_targets.empty()) throw EmptyInput("baseline needs at least one training target");
    return {stats::mean(train_targets)};
}

struct DeltaTauSummary {
    std::vector<double> samples;
    double mean = 0.0;
    int mode_sign = 0;  // sign shared by most samples; 0 on a tie
    double fraction_positive = 0.0;
};

inline DeltaTauSummary delta_tau(std::span<const double> model_taus,
                                 std::span<const double> theory_taus) {
    if (model_taus.size() != theory_taus.size())
        throw LengthMismatch("delta_tau: model and theory sample counts differ");
    if (model_taus.empty()) throw EmptyInput("delta_tau: no samples");
    DeltaTauSummary s;
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < model_taus.size(); ++i) {
        double d = model_taus[i] - theory_taus[i];
        s.samples.push_back(d);
        s.mean += d;
        pos += d > 0.0;
        neg += d < 0.0;
    }
    s.mean /= static_cast<double>(s.samples.size());
    s.mode_sign = pos > neg ? 1 : (neg > pos ? -1 : 0);
    s.fraction_positive = static_cast<double>(pos) / static_cast<double>(s.samples.size());
    return s;
}

struct DiscriminantCell {
    std::optional<double> r;
    std::size_t n = 0;
    double p_value = 1.0;
    std::string stars() const {
        if (!r) return "";
        if (p_value < 0.001) return "***";
        if (p_value < 0.01) return "**";
        if (p_value < 0.05) return "*";
        return "";
    }
};

/// Upper triangle (row < col): correlations among predictions. Lower triangle
/// (row > col): correlations among ground-truth values. Diagonal undefined.
struct DiscriminantMatrix {
    std::array<std::array<DiscriminantCell, kConstructCount>, kConstructCount> cells{};
    const DiscriminantCell& at(ConstructId row, ConstructId col) const {
        return cells[index_of(row)][index_of(col)];
    }
};

using ConstructColumns = std::map<ConstructId, std::vector<std::optional<double>>>;

inline DiscriminantCell pairwise_cell(const std::vector<std::optional<double>>& a,
                                      const std::vector<std::optional<double>>& b) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        if (a[i] && b[i]) {
            x.push_back(*a[i]);
            y.push_back(*b[i]);
        }
    DiscriminantCell cell;
    cell.n = x.size();
    if (x.size() < 3) return cell;
    cell.r = stats::pearson(x, y);
    if (cell.r) cell.p_value = stats::correlation_p_value(*cell.r, cell.n);
    return cell;
}

inline DiscriminantMatrix discriminant_matrix(const ConstructColumns& predictions,
                                              const ConstructColumns& truths) {
    DiscriminantMatrix m;
    for (auto ri : kAllConstructs)
        for (auto ci : kAllConstructs) {
            if (ri == ci) continue;
            const bool upper = index_of(ri) < index_of(ci);
            const auto& src = upper ? predictions : truths;
            auto a = src.find(ri), b = src.find(ci);
            if (a == src.end() || b == src.end()) continue;
            m.cells[index_of(ri)][index_of(ci)] = pairwise_cell(a->second, b->second);
        }
    return m;
}

struct ReliabilitySummary {
    double min = 0.0, max = 0.0, mean = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    std::size_t samples = 0;
};

/// min/max/mean of fold taus and a percentile-bootstrap 95% interval for the
/// mean. Returns nullopt if no fold produced a defined tau.
inline std::optional<ReliabilitySummary> reliability_report(
    std::span<const std::optional<double>> fold_taus, int resamples = 2000, std::uint64_t seed = 0) {
    std::vector<double> v;
    for (const auto& t : fold_taus)
        if (t) v.push_back(*t);
    if (v.empty()) return std::nullopt;
    ReliabilitySummary r;
    r.samples = v.size();
    r.min = *std::min_element(v.begin(), v.end());
    r.max = *std::max_element(v.begin(), v.end());
    r.mean = stats::mean(v);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) s += v[pick(rng)];
        m = s / static_cast<double>(v.size());
    }
    r.ci_lo = std::max(r.min, stats::quantile(means, 0.025));
    r.ci_hi = std::min(r.max, stats::quantile(means, 0.975));
    return r;
}

}  // namespace jointpred::eval
