#pragma once

// PCA and correlation-ranked feature selection. Both are fitted on training
// rows only; callers pass the training block explicitly.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jointpred/data.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::reduce {

struct PcaModel {
    std::vector<std::string> columns;
    Vector mean;
    Matrix components;                 // k x p, orthonormal rows
    std::vector<double> explained_variance;
    std::vector<double> explained_variance_ratio;
    std::size_t rank = 0;              // components with nonzero variance

    std::size_t n_components() const { return static_cast<std::size_t>(components.rows()); }
};

namespace detail {

// Flips each row so its largest-magnitude loading is positive.
inline void fix_signs(Matrix& comps) {
    for (Eigen::Index i = 0; i < comps.rows(); ++i) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < comps.cols(); ++j)
            if (std::abs(comps(i, j)) > best + 1e-12) {
                best = std::abs(comps(i, j));
                arg = j;
            }
        if (comps(i, arg) < 0.0) comps.row(i) *= -1.0;
    }
}

// Completes the first `good` orthonormal rows of `comps` to k orthonormal rows.
inline void complete_basis(Matrix& comps, Eigen::Index good) {
    const Eigen::Index k = comps.rows(), p = comps.cols();
    if (good >= k) return;
    Matrix basis(p, good + p);
    basis.leftCols(good) = comps.topRows(good).transpose();
    basis.rightCols(p) = Matrix::Identity(p, p);
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix q = qr.householderQ() * Matrix::Identity(p, std::min<Eigen::Index>(p, good + p));
    // q's first `good` columns span the existing rows; the next ones are orthogonal to them.
    for (Eigen::Index i = good; i < k; ++i) comps.row(i) = q.col(i).transpose();
}

}  // namespace detail

/// Centered PCA. Requires components <= min(rows - 1, cols) and a complete
/// block. Throws DegenerateInput when the centered data has no variance.
inline PcaModel pca_fit(const Block& train, std::size_t components) {
    const auto n = train.values.rows();
    const auto p = train.values.cols();
    if (components == 0 || n < 2 || static_cast<Eigen::Index>(components) > std::min(n - 1, p))
        throw DegenerateInput("pca_fit: components must be in [1, min(rows-1, cols)]");
    if (static_cast<std::size_t>(p) != train.columns.size())
        throw SchemaMismatch("pca_fit: column names do not match matrix width");
    if (!train.values.allFinite()) throw DegenerateInput("pca_fit: non-finite input (impute first)");

    PcaModel m;
    m.columns = train.columns;
    m.mean = train.values.colwise().mean().transpose();
    Matrix xc = train.values.rowwise() - m.mean.transpose();
    const double total = xc.squaredNorm() / static_cast<double>(n - 1);
    if (!(total > 0.0)) throw DegenerateInput("pca_fit: centered data has rank 0");

    const auto k = static_cast<Eigen::Index>(components);
    m.components.resize(k, p);
    std::vector<double> lambdas(static_cast<std::size_t>(k), 0.0);
    if (p <= n) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(xc.transpose() * xc);
        for (Eigen::Index i = 0; i < k; ++i) {
            Eigen::Index src = p - 1 - i;  // eigenvalues ascending
            m.components.row(i) = es.eigenvectors().col(src).transpose();
            lambdas[static_cast<std::size_t>(i)] = std::max(0.0, es.eigenvalues()[src]);
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(xc * xc.transpose());
        for (Eigen::Index i = 0; i < k; ++i) {
            Eigen::Index src = n - 1 - i;
            lambdas[static_cast<std::size_t>(i)] = std::max(0.0, es.eigenvalues()[src]);
        }
        Eigen::Index good = 0;
        const double tol = 1e-10 * std::max(1.0, lambdas[0]);
        for (Eigen::Index i = 0; i < k; ++i)
            if (lambdas[static_cast<std::size_t>(i)] > tol) ++good;
        Matrix v = xc.transpose() * es.eigenvectors().rightCols(good).rowwise().reverse();
        // Re-orthonormalize to remove the Gram-matrix round-off.
        Eigen::HouseholderQR<Matrix> qr(v);
        Matrix q = qr.householderQ() * Matrix::Identity(p, good);
        for (Eigen::Index i = 0; i < good; ++i) {
            Vector col = q.col(i);
            if (col.dot(v.col(i)) < 0) col = -col;
            m.components.row(i) = col.transpose();
        }
        detail::complete_basis(m.components, good);
        for (Eigen::Index i = good; i < k; ++i) lambdas[static_cast<std::size_t>(i)] = 0.0;
    }
    detail::fix_signs(m.components);

    const double tol = 1e-10 * std::max(1.0, lambdas[0]);
    for (auto l : lambdas) {
        double ev = l / static_cast<double>(n - 1);
        m.explained_variance.push_back(ev);
        m.explained_variance_ratio.push_back(ev / total);
        if (l > tol) ++m.rank;
    }
    return m;
}

inline void check_schema(const PcaModel& m, const std::vector<std::string>& columns) {
    if (columns != m.columns) throw SchemaMismatch("pca_transform: column names/order differ from fit");
}

/// (x - mean) * components^T
inline Matrix pca_transform(const PcaModel& m, const Block& x) {
    check_schema(m, x.columns);
    return (x.values.rowwise() - m.mean.transpose()) * m.components.transpose();
}

inline Matrix pca_inverse(const PcaModel& m, const Matrix& scores) {
    return (scores * m.components).rowwise() + m.mean.transpose();
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct FeatureScore {
    std::string name;
    double score = 0.0;
    friend bool operator==(const FeatureScore&, const FeatureScore&) = default;
};

/// Ordered (by |score| desc, then name) list of at most k selected features.
struct SelectionMask {
    std::vector<FeatureScore> features;
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& f : features) out.push_back(f.name);
        return out;
    }
    friend bool operator==(const SelectionMask&, const SelectionMask&) = default;
};

inline std::optional<double> correlation(std::span<const double> x, std::span<const double> y,
                                         CorrelationMethod method) {
    return method == CorrelationMethod::Pearson ? stats::pearson(x, y) : stats::spearman(x, y);
}

/// Ranks training features by |correlation| with the target. Rows with a
/// missing target are skipped; features with fewer than 3 usable pairs or an
/// undefined correlation are excluded, as are those with |score| below
/// `min_abs_score`.
inline SelectionMask select_top_k(const Block& train, std::span<const std::optional<double>> targets,
                                  std::size_t k, CorrelationMethod method = CorrelationMethod::Spearman,
                                  double min_abs_score = 0.0) {
    if (static_cast<std::size_t>(train.values.rows()) != targets.size())
        throw LengthMismatch("select_top_k: rows and targets differ");
    std::vector<std::size_t> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i]) {
            rows.push_back(i);
            y.push_back(*targets[i]);
        }
    std::vector<FeatureScore> scored;
    if (rows.size() >= 3) {
        std::vector<double> x(rows.size());
        std::vector<double> y_ranked = method == CorrelationMethod::Spearman ? stats::average_ranks(y) : y;
        for (std::size_t c = 0; c < train.columns.size(); ++c) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                x[i] = train.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(c));
            std::optional<double> r;
            if (method == CorrelationMethod::Spearman) r = stats::pearson(stats::average_ranks(x), y_ranked);
            else r = stats::pearson(x, y);
            if (r && std::abs(*r) >= min_abs_score) scored.push_back({train.columns[c], *r});
        }
    }
    if (scored.empty()) throw NoUsableFeatures("select_top_k: no feature has a usable correlation");
    std::sort(scored.begin(), scored.end(), [](const FeatureScore& a, const FeatureScore& b) {
        if (std::abs(a.score) != std::abs(b.score)) return std::abs(a.score) > std::abs(b.score);
        return a.name < b.name;
    });
    if (scored.size() > k) scored.resize(k);
    return {std::move(scored)};
}

/// Columns of `block` named by `mask`, in mask order.
inline Block apply_mask(const Block& block, const SelectionMask& mask) {
    Block out;
    out.values.resize(block.values.rows(), static_cast<Eigen::Index>(mask.features.size()));
    for (std::size_t j = 0; j < mask.features.size(); ++j) {
        auto it = std::find(block.columns.begin(), block.columns.end(), mask.features[j].name);
        if (it == block.columns.end()) throw SchemaMismatch("mask feature not in block: " + mask.features[j].name);
        out.values.col(static_cast<Eigen::Index>(j)) =
            block.values.col(static_cast<Eigen::Index>(it - block.columns.begin()));
        out.columns.push_back(mask.features[j].name);
    }
    return out;
}

}  // namespace jointpred::reduce
