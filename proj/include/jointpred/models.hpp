#pragma once

// Candidate learners behind one fit/predict contract. Inputs are complete
// numeric blocks; every fit is deterministic given its seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "jointpred/csv.hpp"
#include "jointpred/data.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::models {

enum class Family {
    Ols,
    Ridge,
    RidgeCv,
    Lasso,
    BayesianRidge,
    KernelSvrLinear,
    KernelSvrRbf,
    KernelSvrPoly,
    Cart,
    RandomForest,
    KnnClass,
    LinearSvmClass,
    RbfSvmClass,
    CartClass,
    RfClass,
};

inline constexpr std::array<Family, 15> kAllFamilies = {
    Family::Ols,          Family::Ridge,          Family::RidgeCv,         Family::Lasso,
    Family::BayesianRidge, Family::KernelSvrLinear, Family::KernelSvrRbf,   Family::KernelSvrPoly,
    Family::Cart,         Family::RandomForest,   Family::KnnClass,        Family::LinearSvmClass,
    Family::RbfSvmClass,  Family::CartClass,      Family::RfClass,
};

inline constexpr std::string_view family_name(Family f) {
    constexpr std::array<std::string_view, 15> names = {
        "ols",       "ridge",         "ridge_cv",         "lasso",         "bayesian_ridge",
        "kernel_svr_linear", "kernel_svr_rbf", "kernel_svr_poly", "cart",  "random_forest",
        "knn_class", "linear_svm_class", "rbf_svm_class", "cart_class",    "rf_class",
    };
    return names[static_cast<std::size_t>(f)];
}

inline std::optional<Family> parse_family(std::string_view s) {
    for (auto f : kAllFamilies)
        if (family_name(f) == s) return f;
    return std::nullopt;
}

inline bool is_classifier(Family f) { return static_cast<int>(f) >= static_cast<int>(Family::KnnClass); }

inline bool is_tree_family(Family f) {
    return f == Family::Cart || f == Family::RandomForest || f == Family::CartClass || f == Family::RfClass;
}

inline bool is_linear_family(Family f) {
    return f == Family::Ols || f == Family::Ridge || f == Family::RidgeCv || f == Family::Lasso ||
           f == Family::BayesianRidge;
}

using Params = std::map<std::string, double>;

struct CandidateSpec {
    Family family = Family::Ols;
    Params params;

    double param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }

    /// Stable label, e.g. `ridge(lambda=10)`.
    std::string label() const {
        std::string s(family_name(family));
        if (params.empty()) return s;
        s += '(';
        bool first = true;
        for (const auto& [k, v] : params) {
            if (!first) s += ',';
            first = false;
            s += k + '=' + csv::format_number(v);
        }
        return s + ')';
    }
    friend bool operator==(const CandidateSpec&, const CandidateSpec&) = default;
};

/// Throws InvalidConfig when a hyperparameter is outside its bounds.
inline void validate_spec(const CandidateSpec& spec) {
    auto need = [&](const char* key, double lo, bool integer = false) {
        auto it = spec.params.find(key);
        if (it == spec.params.end()) return;
        if (!std::isfinite(it->second) || it->second < lo || (integer && std::floor(it->second) != it->second))
            throw InvalidConfig(std::string(family_name(spec.family)) + "." + key, "out of bounds");
    };
    need("lambda", 0.0);
    need("alpha", 0.0);
    need("gamma", 0.0);
    need("degree", 1.0, true);
    need("min_leaf", 1.0, true);
    need("max_depth", 0.0, true);
    need("max_features", 0.0, true);
    need("trees", 1.0, true);
    need("k", 1.0, true);
    need("epochs", 1.0, true);
    need("bootstrap", 0.0, true);
}

/// Default search grid. Regression grids are used unless the construct is
/// configured as a classification task.
inline std::vector<CandidateSpec> default_candidates(bool classification, int forest_trees = 100,
                                                     int min_leaf = 5) {
    const double trees = forest_trees, leaf = min_leaf;
    if (classification)
        return {
            {Family::KnnClass, {{"k", 5}}},
            {Family::LinearSvmClass, {{"lambda", 0.01}}},
            {Family::RbfSvmClass, {{"lambda", 0.01}}},
            {Family::CartClass, {{"min_leaf", leaf}}},
            {Family::RfClass, {{"min_leaf", leaf}, {"trees", trees}}},
        };
    return {
        {Family::Ols, {}},
        {Family::Ridge, {{"lambda", 1}}},
        {Family::Ridge, {{"lambda", 10}}},
        {Family::Ridge, {{"lambda", 100}}},
        {Family::RidgeCv, {}},
        {Family::Lasso, {{"lambda", 0.01}}},
        {Family::Lasso, {{"lambda", 0.05}}},
        {Family::Lasso, {{"lambda", 0.1}}},
        {Family::BayesianRidge, {}},
        {Family::KernelSvrLinear, {{"alpha", 1}}},
        {Family::KernelSvrRbf, {{"alpha", 1}}},
        {Family::KernelSvrPoly, {{"alpha", 1}, {"degree", 2}}},
        {Family::Cart, {{"min_leaf", leaf}}},
        {Family::RandomForest, {{"min_leaf", leaf}, {"trees", trees}}},
    };
}

inline std::vector<double> ridge_cv_grid() {
    std::vector<double> g;
    for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    return g;
}

// ---------------------------------------------------------------------------
// Fitted state
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;             // regression mean or majority class index
    std::vector<double> dist;       // class proportions (classification)
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct TrainedComponent {
    CandidateSpec spec;
    std::vector<std::string> features;
    std::uint64_t fingerprint = 0;
    std::uint64_t seed = 0;

    // Column standardization used by most families.
    Vector x_mean;
    Vector x_scale;
    double y_mean = 0.0;

    // Linear families: prediction = intercept + coef . x (raw scale).
    Vector coef;
    double intercept = 0.0;
    double chosen_lambda = 0.0;

    // Kernel and neighbor families keep standardized training rows.
    Matrix support;
    Vector dual;                    // kernel ridge
    Matrix class_dual;              // kernel SVM: rows x classes
    Matrix class_weights;           // linear SVM: (p + 1) x classes
    double kernel_gamma = 0.0;
    std::vector<int> train_labels;  // class indices (knn)

    std::vector<Tree> trees;
    std::vector<double> classes;    // class values for classifiers
    std::vector<double> importance; // impurity decrease per feature (trees)
};

namespace detail {

inline std::uint64_t fingerprint(const Block& x, std::span<const double> y) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& c : x.columns) mix(c.data(), c.size() + 1);
    mix(x.values.data(), static_cast<std::size_t>(x.values.size()) * sizeof(double));
    mix(y.data(), y.size() * sizeof(double));
    return h;
}

inline void standardize_fit(const Matrix& x, Vector& mean, Vector& scale) {
    const auto n = x.rows();
    mean = x.colwise().mean().transpose();
    scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double ss = (x.col(j).array() - mean[j]).square().sum();
        double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        scale[j] = sd > 0.0 ? sd : 0.0;
    }
}

// Zero-variance columns map to 0.
inline Matrix standardize(const Matrix& x, const Vector& mean, const Vector& scale) {
    Matrix z = x.rowwise() - mean.transpose();
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        if (scale[j] > 0.0) z.col(j) /= scale[j];
        else z.col(j).setZero();
    }
    return z;
}

// Converts standardized-space coefficients to raw scale.
inline void set_raw_linear(TrainedComponent& m, const Vector& beta_std) {
    m.coef = Vector::Zero(beta_std.size());
    for (Eigen::Index j = 0; j < beta_std.size(); ++j)
        if (m.x_scale[j] > 0.0) m.coef[j] = beta_std[j] / m.x_scale[j];
    m.intercept = m.y_mean - m.coef.dot(m.x_mean);
}

inline Vector ridge_solve(const Matrix& z, const Vector& yc, double lambda) {
    const auto p = z.cols();
    Matrix a = z.transpose() * z;
    a.diagonal().array() += lambda;
    // Columns that were constant are all-zero; pin their coefficient to 0.
    for (Eigen::Index j = 0; j < p; ++j)
        if (a(j, j) == 0.0) a(j, j) = 1.0;
    Eigen::LDLT<Matrix> ldlt(a);
    Vector beta = ldlt.solve(z.transpose() * yc);
    if (!beta.allFinite()) throw SingularSystem("ridge: system could not be solved");
    return beta;
}

inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

inline Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

inline Vector rows_of(const Vector& y, const std::vector<std::size_t>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
    return out;
}

// ----- linear families -----

inline void fit_ols(TrainedComponent& m, const Matrix& x, const Vector& y) {
    const auto n = x.rows(), p = x.cols();
    if (n < p + 1) throw NotEnoughRows("ols: need at least cols + 1 rows");
    Matrix a(n, p + 1);
    a.col(0).setOnes();
    a.rightCols(p) = x;
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 1)
        throw SingularSystem("ols: design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(p + 1) + "); use ridge");
    Vector b = qr.solve(y);
    m.intercept = b[0];
    m.coef = b.tail(p);
}

inline void fit_ridge(TrainedComponent& m, const Matrix& x, const Vector& y, double lambda) {
    Matrix z = standardize(x, m.x_mean, m.x_scale);
    Vector yc = y.array() - m.y_mean;
    m.chosen_lambda = lambda;
    set_raw_linear(m, ridge_solve(z, yc, lambda));
}

inline void fit_ridge_cv(TrainedComponent& m, const Matrix& x, const Vector& y, std::uint64_t seed) {
    const auto grid = ridge_cv_grid();
    const auto n = static_cast<std::size_t>(x.rows());
    std::size_t best = 6;  // lambda = 1 when CV is impossible
    if (n >= 10) {
        auto folds = kfold_indices(n, 5, seed);
        std::vector<double> mse(grid.size(), 0.0);
        for (const auto& held : folds) {
            std::vector<std::size_t> train;
            for (std::size_t i = 0, h = 0; i < n; ++i) {
                if (h < held.size() && held[h] == i) {
                    ++h;
                    continue;
                }
                train.push_back(i);
            }
            Matrix xt = rows_of(x, train), xh = rows_of(x, held);
            Vector yt = rows_of(y, train), yh = rows_of(y, held);
            Vector mu, sc;
            standardize_fit(xt, mu, sc);
            Matrix zt = standardize(xt, mu, sc), zh = standardize(xh, mu, sc);
            double ym = yt.mean();
            Vector ytc = yt.array() - ym;
            Eigen::SelfAdjointEigenSolver<Matrix> es(zt.transpose() * zt);
            Vector proj = es.eigenvectors().transpose() * (zt.transpose() * ytc);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                Vector d = proj.array() / (es.eigenvalues().array().max(0.0) + grid[g]);
                Vector beta = es.eigenvectors() * d;
                Vector pred = (zh * beta).array() + ym;
                mse[g] += (pred - yh).squaredNorm();
            }
        }
        best = static_cast<std::size_t>(std::min_element(mse.begin(), mse.end()) - mse.begin());
    }
    fit_ridge(m, x, y, grid[best]);
}

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Minimizes (1/2n)||y - Z b||^2 + lambda ||b||_1 by cyclic coordinate descent.
inline void fit_lasso(TrainedComponent& m, const Matrix& x, const Vector& y, double lambda_scaled) {
    Matrix z = standardize(x, m.x_mean, m.x_scale);
    Vector r = y.array() - m.y_mean;
    const auto n = static_cast<double>(z.rows());
    double ysd = std::sqrt(r.squaredNorm() / std::max(1.0, n - 1.0));
    const double lambda = lambda_scaled * ysd;
    m.chosen_lambda = lambda;
    const auto p = z.cols();
    Vector beta = Vector::Zero(p);
    Vector norm2(p);
    for (Eigen::Index j = 0; j < p; ++j) norm2[j] = z.col(j).squaredNorm() / n;
    for (int sweep = 0; sweep < 10000; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (norm2[j] == 0.0) continue;
            double rho = z.col(j).dot(r) / n + norm2[j] * beta[j];
            double nb = soft_threshold(rho, lambda) / norm2[j];
            double delta = nb - beta[j];
            if (delta != 0.0) {
                r -= delta * z.col(j);
                beta[j] = nb;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < 1e-7) break;
    }
    set_raw_linear(m, beta);
}

// Evidence maximization with Gamma(1e-6, 1e-6) priors on both precisions.
inline void fit_bayesian_ridge(TrainedComponent& m, const Matrix& x, const Vector& y) {
    Matrix z = standardize(x, m.x_mean, m.x_scale);
    Vector yc = y.array() - m.y_mean;
    const double n = static_cast<double>(z.rows());
    const double a1 = 1e-6, a2 = 1e-6, l1 = 1e-6, l2 = 1e-6;
    Eigen::SelfAdjointEigenSolver<Matrix> es(z.transpose() * z);
    Vector eig = es.eigenvalues().array().max(0.0);
    Vector proj = es.eigenvectors().transpose() * (z.transpose() * yc);
    double var = yc.squaredNorm() / std::max(1.0, n);
    double alpha = 1.0 / (var + 1e-12);
    double lambda = 1.0;
    Vector beta = Vector::Zero(z.cols());
    for (int it = 0; it < 300; ++it) {
        Vector d = proj.array() / (eig.array() + lambda / alpha);
        Vector nb = es.eigenvectors() * d;
        double rss = (yc - z * nb).squaredNorm();
        double gamma = (alpha * eig.array() / (lambda + alpha * eig.array())).sum();
        lambda = (gamma + 2.0 * l1) / (nb.squaredNorm() + 2.0 * l2);
        alpha = (n - gamma + 2.0 * a1) / (rss + 2.0 * a2);
        double change = (nb - beta).cwiseAbs().sum();
        beta = nb;
        if (it > 0 && change < 1e-8) break;
    }
    m.chosen_lambda = lambda / alpha;
    set_raw_linear(m, beta);
}

// ----- kernels -----

inline double kernel(Family f, const TrainedComponent& m, const Eigen::Ref<const Vector>& a,
                     const Eigen::Ref<const Vector>& b) {
    switch (f) {
        case Family::KernelSvrLinear: return a.dot(b);
        case Family::KernelSvrPoly: return std::pow(m.kernel_gamma * a.dot(b) + 1.0, m.spec.param("degree", 2));
        default: return std::exp(-m.kernel_gamma * (a - b).squaredNorm());
    }
}

inline Matrix gram(Family f, const TrainedComponent& m, const Matrix& a, const Matrix& b) {
    if (f == Family::KernelSvrLinear) return a * b.transpose();
    Matrix k(a.rows(), b.rows());
    if (f == Family::KernelSvrPoly) {
        Matrix dot = a * b.transpose();
        const double deg = m.spec.param("degree", 2);
        k = (m.kernel_gamma * dot.array() + 1.0).pow(deg).matrix();
        return k;
    }
    Vector an = a.rowwise().squaredNorm(), bn = b.rowwise().squaredNorm();
    Matrix dot = a * b.transpose();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            k(i, j) = std::exp(-m.kernel_gamma * std::max(0.0, an[i] + bn[j] - 2.0 * dot(i, j)));
    return k;
}

inline Family kernel_of(Family f) {
    if (f == Family::RbfSvmClass) return Family::KernelSvrRbf;
    return f;
}

inline void fit_kernel_ridge(TrainedComponent& m, const Matrix& x, const Vector& y) {
    m.support = standardize(x, m.x_mean, m.x_scale);
    const double p = static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
    m.kernel_gamma = m.spec.param("gamma", 0.0) > 0.0 ? m.spec.param("gamma", 0.0) : 1.0 / p;
    Matrix k = gram(m.spec.family, m, m.support, m.support);
    k.diagonal().array() += m.spec.param("alpha", 1.0);
    Eigen::LDLT<Matrix> ldlt(k);
    m.dual = ldlt.solve((y.array() - m.y_mean).matrix());
    if (!m.dual.allFinite()) throw SingularSystem("kernel ridge: system could not be solved");
}

// ----- trees -----

struct TreeOptions {
    std::size_t min_leaf = 5;
    std::size_t max_depth = 0;     // 0 = unlimited
    std::size_t max_features = 0;  // 0 = all
    std::size_t n_classes = 0;     // 0 = regression
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const std::vector<double>& y, TreeOptions opt, std::uint64_t seed,
                std::vector<double>& importance)
        : x_(x), y_(y), opt_(opt), rng_(seed), importance_(importance) {}

    Tree build(std::vector<std::size_t> idx) {
        total_ = static_cast<double>(idx.size());
        grow(idx, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = -1.0;
    };

    double impurity_sum(const std::vector<std::size_t>& idx) const {
        if (opt_.n_classes == 0) {
            double s = 0.0, s2 = 0.0;
            for (auto i : idx) {
                s += y_[i];
                s2 += y_[i] * y_[i];
            }
            return std::max(0.0, s2 - s * s / static_cast<double>(idx.size()));
        }
        std::vector<double> c(opt_.n_classes, 0.0);
        for (auto i : idx) c[static_cast<std::size_t>(y_[i])] += 1.0;
        double n = static_cast<double>(idx.size()), g = n;
        for (double v : c) g -= v * v / n;
        return g;
    }

    bool pure(const std::vector<std::size_t>& idx) const {
        for (auto i : idx)
            if (y_[i] != y_[idx[0]]) return false;
        return true;
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t p = static_cast<std::size_t>(x_.cols());
        std::vector<std::size_t> f(p);
        std::iota(f.begin(), f.end(), 0);
        if (opt_.max_features == 0 || opt_.max_features >= p) return f;
        for (std::size_t i = 0; i < opt_.max_features; ++i) {
            std::uniform_int_distribution<std::size_t> d(i, p - 1);
            std::swap(f[i], f[d(rng_)]);
        }
        f.resize(opt_.max_features);
        std::sort(f.begin(), f.end());
        return f;
    }

    Split best_split(const std::vector<std::size_t>& idx, double parent) {
        Split best;
        const std::size_t n = idx.size();
        std::vector<std::size_t> order(idx);
        std::vector<double> lc(opt_.n_classes), rc(opt_.n_classes);
        for (auto f : candidate_features()) {
            const auto fj = static_cast<Eigen::Index>(f);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                double xa = x_(static_cast<Eigen::Index>(a), fj), xb = x_(static_cast<Eigen::Index>(b), fj);
                return xa < xb || (xa == xb && a < b);
            });
            double ls = 0.0, ls2 = 0.0, ts = 0.0, ts2 = 0.0;
            if (opt_.n_classes == 0) {
                for (auto i : order) {
                    ts += y_[i];
                    ts2 += y_[i] * y_[i];
                }
            } else {
                std::fill(lc.begin(), lc.end(), 0.0);
                std::fill(rc.begin(), rc.end(), 0.0);
                for (auto i : order) rc[static_cast<std::size_t>(y_[i])] += 1.0;
            }
            for (std::size_t k = 0; k + 1 < n; ++k) {
                const double yk = y_[order[k]];
                if (opt_.n_classes == 0) {
                    ls += yk;
                    ls2 += yk * yk;
                } else {
                    lc[static_cast<std::size_t>(yk)] += 1.0;
                    rc[static_cast<std::size_t>(yk)] -= 1.0;
                }
                const std::size_t nl = k + 1, nr = n - nl;
                if (nl < opt_.min_leaf || nr < opt_.min_leaf) continue;
                double xa = x_(static_cast<Eigen::Index>(order[k]), fj);
                double xb = x_(static_cast<Eigen::Index>(order[k + 1]), fj);
                if (!(xa < xb)) continue;
                double child;
                if (opt_.n_classes == 0) {
                    double l = std::max(0.0, ls2 - ls * ls / static_cast<double>(nl));
                    double rs = ts - ls, rs2 = ts2 - ls2;
                    double r = std::max(0.0, rs2 - rs * rs / static_cast<double>(nr));
                    child = l + r;
                } else {
                    double gl = static_cast<double>(nl), gr = static_cast<double>(nr);
                    double l = gl, r = gr;
                    for (std::size_t c = 0; c < opt_.n_classes; ++c) {
                        l -= lc[c] * lc[c] / gl;
                        r -= rc[c] * rc[c] / gr;
                    }
                    child = l + r;
                }
                double gain = parent - child;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    double mid = 0.5 * (xa + xb);
                    best.threshold = (mid < xb) ? mid : xa;
                }
            }
        }
        return best;
    }

    int make_leaf(const std::vector<std::size_t>& idx) {
        TreeNode node;
        if (opt_.n_classes == 0) {
            double s = 0.0;
            for (auto i : idx) s += y_[i];
            node.value = s / static_cast<double>(idx.size());
        } else {
            node.dist.assign(opt_.n_classes, 0.0);
            for (auto i : idx) node.dist[static_cast<std::size_t>(y_[i])] += 1.0;
            for (auto& d : node.dist) d /= static_cast<double>(idx.size());
            node.value = static_cast<double>(std::max_element(node.dist.begin(), node.dist.end()) - node.dist.begin());
        }
        tree_.nodes.push_back(std::move(node));
        return static_cast<int>(tree_.nodes.size() - 1);
    }

    int grow(const std::vector<std::size_t>& idx, std::size_t depth) {
        const bool depth_ok = opt_.max_depth == 0 || depth < opt_.max_depth;
        if (!depth_ok || idx.size() < 2 * opt_.min_leaf || pure(idx)) return make_leaf(idx);
        const double parent = impurity_sum(idx);
        Split s = best_split(idx, parent);
        if (s.feature < 0) return make_leaf(idx);
        std::vector<std::size_t> l, r;
        for (auto i : idx) (x_(static_cast<Eigen::Index>(i), s.feature) <= s.threshold ? l : r).push_back(i);
        importance_[static_cast<std::size_t>(s.feature)] += std::max(0.0, s.gain) / total_;
        int self = make_leaf(idx);
        tree_.nodes[static_cast<std::size_t>(self)].feature = s.feature;
        tree_.nodes[static_cast<std::size_t>(self)].threshold = s.threshold;
        int li = grow(l, depth + 1);
        int ri = grow(r, depth + 1);
        tree_.nodes[static_cast<std::size_t>(self)].left = li;
        tree_.nodes[static_cast<std::size_t>(self)].right = ri;
        return self;
    }

    const Matrix& x_;
    const std::vector<double>& y_;
    TreeOptions opt_;
    std::mt19937_64 rng_;
    std::vector<double>& importance_;
    Tree tree_;
    double total_ = 1.0;
};

inline const TreeNode& leaf_for(const Tree& t, const Eigen::Ref<const Vector>& row) {
    int i = 0;
    while (t.nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = t.nodes[static_cast<std::size_t>(i)];
        i = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return t.nodes[static_cast<std::size_t>(i)];
}

inline void fit_trees(TrainedComponent& m, const Matrix& x, const std::vector<double>& y, std::size_t n_classes,
                      bool forest) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    TreeOptions opt;
    opt.min_leaf = static_cast<std::size_t>(m.spec.param("min_leaf", 5));
    opt.max_depth = static_cast<std::size_t>(m.spec.param("max_depth", 0));
    opt.n_classes = n_classes;
    std::size_t trees = 1;
    bool bootstrap = false;
    if (forest) {
        trees = static_cast<std::size_t>(m.spec.param("trees", 100));
        bootstrap = m.spec.param("bootstrap", 1) != 0.0;
        double mf = m.spec.param("max_features", 0);
        opt.max_features = mf > 0 ? static_cast<std::size_t>(mf)
                                  : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
    }
    m.importance.assign(p, 0.0);
    for (std::size_t t = 0; t < trees; ++t) {
        const std::uint64_t ts = derive_seed(m.seed, {t});
        std::vector<std::size_t> idx(n);
        if (bootstrap) {
            std::mt19937_64 rng(derive_seed(ts, {1}));
            std::uniform_int_distribution<std::size_t> d(0, n - 1);
            for (auto& i : idx) i = d(rng);
            std::sort(idx.begin(), idx.end());
        } else {
            std::iota(idx.begin(), idx.end(), 0);
        }
        std::vector<double> imp(p, 0.0);
        TreeBuilder b(x, y, opt, derive_seed(ts, {2}), imp);
        m.trees.push_back(b.build(std::move(idx)));
        for (std::size_t j = 0; j < p; ++j) m.importance[j] += imp[j] / static_cast<double>(trees);
    }
}

// ----- classifiers -----

inline std::vector<double> class_index(TrainedComponent& m, const Vector& y) {
    std::vector<double> labels;
    for (Eigen::Index i = 0; i < y.size(); ++i) labels.push_back(std::round(y[i]));
    m.classes = labels;
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    std::vector<double> idx;
    for (double l : labels)
        idx.push_back(static_cast<double>(std::lower_bound(m.classes.begin(), m.classes.end(), l) - m.classes.begin()));
    return idx;
}

inline void fit_knn(TrainedComponent& m, const Matrix& x, const std::vector<double>& labels) {
    m.support = standardize(x, m.x_mean, m.x_scale);
    m.train_labels.clear();
    for (double l : labels) m.train_labels.push_back(static_cast<int>(l));
}

// Pegasos, one-vs-rest, bias as a constant feature.
inline void fit_linear_svm(TrainedComponent& m, const Matrix& x, const std::vector<double>& labels) {
    Matrix z = standardize(x, m.x_mean, m.x_scale);
    const auto n = z.rows(), p = z.cols();
    Matrix a(n, p + 1);
    a.leftCols(p) = z;
    a.col(p).setOnes();
    const double lambda = m.spec.param("lambda", 0.01);
    const auto iters = static_cast<std::size_t>(m.spec.param("epochs", 20)) * static_cast<std::size_t>(n);
    m.class_weights = Matrix::Zero(p + 1, static_cast<Eigen::Index>(m.classes.size()));
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        std::mt19937_64 rng(derive_seed(m.seed, {c}));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Vector w = Vector::Zero(p + 1);
        for (std::size_t t = 1; t <= iters; ++t) {
            Eigen::Index i = pick(rng);
            double yi = labels[static_cast<std::size_t>(i)] == static_cast<double>(c) ? 1.0 : -1.0;
            double eta = 1.0 / (lambda * static_cast<double>(t));
            double margin = yi * a.row(i).dot(w);
            w *= (1.0 - eta * lambda);
            if (margin < 1.0) w += eta * yi * a.row(i).transpose();
        }
        m.class_weights.col(static_cast<Eigen::Index>(c)) = w;
    }
}

// Kernelized Pegasos with an RBF kernel, one-vs-rest.
inline void fit_rbf_svm(TrainedComponent& m, const Matrix& x, const std::vector<double>& labels) {
    m.support = standardize(x, m.x_mean, m.x_scale);
    const auto n = m.support.rows();
    m.kernel_gamma = m.spec.param("gamma", 0.0) > 0.0 ? m.spec.param("gamma", 0.0)
                                                       : 1.0 / static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
    Matrix k = gram(Family::KernelSvrRbf, m, m.support, m.support);
    const double lambda = m.spec.param("lambda", 0.01);
    const auto iters = static_cast<std::size_t>(m.spec.param("epochs", 20)) * static_cast<std::size_t>(n);
    m.class_dual = Matrix::Zero(n, static_cast<Eigen::Index>(m.classes.size()));
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        std::mt19937_64 rng(derive_seed(m.seed, {c}));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Vector ys(n);
        for (Eigen::Index i = 0; i < n; ++i) ys[i] = labels[static_cast<std::size_t>(i)] == static_cast<double>(c) ? 1.0 : -1.0;
        Vector alpha = Vector::Zero(n);
        Vector f = Vector::Zero(n);  // sum_j alpha_j y_j K(i, j)
        for (std::size_t t = 1; t <= iters; ++t) {
            Eigen::Index i = pick(rng);
            if (ys[i] * f[i] / (lambda * static_cast<double>(t)) < 1.0) {
                alpha[i] += 1.0;
                f += ys[i] * k.col(i);
            }
        }
        m.class_dual.col(static_cast<Eigen::Index>(c)) =
            (alpha.array() * ys.array()).matrix() / (lambda * static_cast<double>(iters));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public contract
// ---------------------------------------------------------------------------

/// Fits one candidate. `x` must be complete; `y` has one finite value per row.
inline TrainedComponent fit(const CandidateSpec& spec, const Block& x, std::span<const double> y, std::uint64_t seed) {
    validate_spec(spec);
    if (static_cast<std::size_t>(x.values.rows()) != y.size()) throw LengthMismatch("fit: rows and targets differ");
    if (static_cast<std::size_t>(x.values.cols()) != x.columns.size())
        throw SchemaMismatch("fit: column names do not match matrix width");
    if (x.values.rows() < 2) throw NotEnoughRows("fit: need at least 2 rows");
    if (!x.values.allFinite()) throw NonFiniteValue("fit: feature matrix has non-finite cells");
    for (double v : y)
        if (!std::isfinite(v)) throw NonFiniteValue("fit: non-finite target");

    TrainedComponent m;
    m.spec = spec;
    m.features = x.columns;
    m.seed = seed;
    m.fingerprint = detail::fingerprint(x, y);
    Vector yv = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
    m.y_mean = yv.mean();
    detail::standardize_fit(x.values, m.x_mean, m.x_scale);

    switch (spec.family) {
        case Family::Ols: detail::fit_ols(m, x.values, yv); break;
        case Family::Ridge: detail::fit_ridge(m, x.values, yv, spec.param("lambda", 1.0)); break;
        case Family::RidgeCv: detail::fit_ridge_cv(m, x.values, yv, seed); break;
        case Family::Lasso: detail::fit_lasso(m, x.values, yv, spec.param("lambda", 0.05)); break;
        case Family::BayesianRidge: detail::fit_bayesian_ridge(m, x.values, yv); break;
        case Family::KernelSvrLinear:
        case Family::KernelSvrRbf:
        case Family::KernelSvrPoly: detail::fit_kernel_ridge(m, x.values, yv); break;
        case Family::Cart:
        case Family::RandomForest: {
            std::vector<double> yy(y.begin(), y.end());
            detail::fit_trees(m, x.values, yy, 0, spec.family == Family::RandomForest);
            break;
        }
        case Family::KnnClass:
        case Family::LinearSvmClass:
        case Family::RbfSvmClass:
        case Family::CartClass:
        case Family::RfClass: {
            auto labels = detail::class_index(m, yv);
            if (spec.family == Family::KnnClass) detail::fit_knn(m, x.values, labels);
            else if (spec.family == Family::LinearSvmClass) detail::fit_linear_svm(m, x.values, labels);
            else if (spec.family == Family::RbfSvmClass) detail::fit_rbf_svm(m, x.values, labels);
            else detail::fit_trees(m, x.values, labels, m.classes.size(), spec.family == Family::RfClass);
            break;
        }
    }
    return m;
}

inline std::vector<double> predict(const TrainedComponent& m, const Block& x) {
    if (x.columns != m.features) throw SchemaMismatch("predict: feature schema differs from training");
    if (!x.values.allFinite()) throw NonFiniteValue("predict: feature matrix has non-finite cells");
    const auto n = x.values.rows();
    std::vector<double> out(static_cast<std::size_t>(n));
    const Family f = m.spec.family;
    if (is_linear_family(f)) {
        Vector p = (x.values * m.coef).array() + m.intercept;
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = p[i];
    } else if (f == Family::KernelSvrLinear || f == Family::KernelSvrRbf || f == Family::KernelSvrPoly) {
        Matrix z = detail::standardize(x.values, m.x_mean, m.x_scale);
        Vector p = (detail::gram(f, m, z, m.support) * m.dual).array() + m.y_mean;
        for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = p[i];
    } else if (f == Family::Cart || f == Family::RandomForest) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = 0.0;
            for (const auto& t : m.trees) s += detail::leaf_for(t, x.values.row(i).transpose()).value;
            out[static_cast<std::size_t>(i)] = s / static_cast<double>(m.trees.size());
        }
    } else if (f == Family::CartClass || f == Family::RfClass) {
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<double> votes(m.classes.size(), 0.0);
            for (const auto& t : m.trees) {
                const auto& leaf = detail::leaf_for(t, x.values.row(i).transpose());
                for (std::size_t c = 0; c < votes.size(); ++c) votes[c] += leaf.dist[c];
            }
            out[static_cast<std::size_t>(i)] = m.classes[static_cast<std::size_t>(
                std::max_element(votes.begin(), votes.end()) - votes.begin())];
        }
    } else if (f == Family::KnnClass) {
        Matrix z = detail::standardize(x.values, m.x_mean, m.x_scale);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(m.spec.param("k", 5)),
                                             static_cast<std::size_t>(m.support.rows()));
        std::vector<std::pair<double, std::size_t>> d(static_cast<std::size_t>(m.support.rows()));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < m.support.rows(); ++j)
                d[static_cast<std::size_t>(j)] = {(m.support.row(j) - z.row(i)).squaredNorm(), static_cast<std::size_t>(j)};
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
            std::vector<double> votes(m.classes.size(), 0.0), dist(m.classes.size(), 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                auto c = static_cast<std::size_t>(m.train_labels[d[j].second]);
                votes[c] += 1.0;
                dist[c] += std::sqrt(d[j].first);
            }
            std::size_t best = 0;
            for (std::size_t c = 1; c < votes.size(); ++c)
                if (votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best])) best = c;
            out[static_cast<std::size_t>(i)] = m.classes[best];
        }
    } else if (f == Family::LinearSvmClass) {
        Matrix z = detail::standardize(x.values, m.x_mean, m.x_scale);
        const auto p = z.cols();
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector s = m.class_weights.topRows(p).transpose() * z.row(i).transpose() + m.class_weights.row(p).transpose();
            Eigen::Index arg;
            s.maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = m.classes[static_cast<std::size_t>(arg)];
        }
    } else {  // RbfSvmClass
        Matrix z = detail::standardize(x.values, m.x_mean, m.x_scale);
        Matrix s = detail::gram(Family::KernelSvrRbf, m, z, m.support) * m.class_dual;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index arg;
            s.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = m.classes[static_cast<std::size_t>(arg)];
        }
    }
    for (double v : out)
        if (!std::isfinite(v)) throw NonFiniteValue("predict: non-finite prediction from " + m.spec.label());
    return out;
}

/// Normalized importance per feature: |coef| x column sd for linear models,
/// mean impurity decrease for trees. Empty (with a warning) when all scores
/// are zero.
inline std::map<std::string, double> feature_importance(const TrainedComponent& m) {
    const Family f = m.spec.family;
    std::vector<double> raw(m.features.size(), 0.0);
    if (is_linear_family(f)) {
        for (std::size_t j = 0; j < raw.size(); ++j)
            raw[j] = std::abs(m.coef[static_cast<Eigen::Index>(j)]) * m.x_scale[static_cast<Eigen::Index>(j)];
    } else if (f == Family::KernelSvrLinear) {
        Vector w = m.support.transpose() * m.dual;  // standardized-space weights
        for (std::size_t j = 0; j < raw.size(); ++j) raw[j] = std::abs(w[static_cast<Eigen::Index>(j)]);
    } else if (f == Family::LinearSvmClass) {
        for (std::size_t j = 0; j < raw.size(); ++j)
            raw[j] = m.class_weights.row(static_cast<Eigen::Index>(j)).cwiseAbs().sum();
    } else if (is_tree_family(f)) {
        raw = m.importance;
    } else {
        throw Unsupported("feature_importance: not defined for " + std::string(family_name(f)));
    }
    double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    std::map<std::string, double> out;
    if (!(total > 0.0)) {
        diag::warn("feature_importance: all scores are zero for " + m.spec.label());
        return out;
    }
    for (std::size_t j = 0; j < raw.size(); ++j) out[m.features[j]] = raw[j] / total;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kComponentFormatVersion = 1;

namespace detail {

inline nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Vector vector_from(const nlohmann::json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix_from(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) = vector_from(data.at(static_cast<std::size_t>(i))).transpose();
    return m;
}

}  // namespace detail

inline nlohmann::json spec_to_json(const CandidateSpec& s) {
    return {{"family", std::string(family_name(s.family))}, {"params", s.params}};
}

inline CandidateSpec spec_from_json(const nlohmann::json& j) {
    auto f = parse_family(j.at("family").get<std::string>());
    if (!f) throw VersionMismatch("unknown model family " + j.at("family").get<std::string>());
    return {*f, j.at("params").get<Params>()};
}

inline nlohmann::json to_json(const TrainedComponent& m) {
    using detail::to_json;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right},
                             {"v", n.value}, {"d", n.dist}});
        trees.push_back(nodes);
    }
    return {
        {"format", "jointpred-component"},
        {"version", kComponentFormatVersion},
        {"spec", spec_to_json(m.spec)},
        {"features", m.features},
        {"fingerprint", std::to_string(m.fingerprint)},
        {"seed", std::to_string(m.seed)},
        {"x_mean", to_json(m.x_mean)},
        {"x_scale", to_json(m.x_scale)},
        {"y_mean", m.y_mean},
        {"coef", to_json(m.coef)},
        {"intercept", m.intercept},
        {"chosen_lambda", m.chosen_lambda},
        {"support", to_json(m.support)},
        {"dual", to_json(m.dual)},
        {"class_dual", to_json(m.class_dual)},
        {"class_weights", to_json(m.class_weights)},
        {"kernel_gamma", m.kernel_gamma},
        {"train_labels", m.train_labels},
        {"trees", trees},
        {"classes", m.classes},
        {"importance", m.importance},
    };
}

inline TrainedComponent component_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "jointpred-component") throw VersionMismatch("not a serialized component");
    if (j.at("version").get<int>() != kComponentFormatVersion)
        throw VersionMismatch("component format version " + std::to_string(j.at("version").get<int>()) +
                              " is not supported");
    TrainedComponent m;
    m.spec = spec_from_json(j.at("spec"));
    m.features = j.at("features").get<std::vector<std::string>>();
    m.fingerprint = std::stoull(j.at("fingerprint").get<std::string>());
    m.seed = std::stoull(j.at("seed").get<std::string>());
    m.x_mean = detail::vector_from(j.at("x_mean"));
    m.x_scale = detail::vector_from(j.at("x_scale"));
    m.y_mean = j.at("y_mean").get<double>();
    m.coef = detail::vector_from(j.at("coef"));
    m.intercept = j.at("intercept").get<double>();
    m.chosen_lambda = j.at("chosen_lambda").get<double>();
    m.support = detail::matrix_from(j.at("support"));
    m.dual = detail::vector_from(j.at("dual"));
    m.class_dual = detail::matrix_from(j.at("class_dual"));
    m.class_weights = detail::matrix_from(j.at("class_weights"));
    m.kernel_gamma = j.at("kernel_gamma").get<double>();
    m.train_labels = j.at("train_labels").get<std::vector<int>>();
    for (const auto& t : j.at("trees")) {
        Tree tree;
        for (const auto& n : t)
            tree.nodes.push_back({n.at("f").get<int>(), n.at("t").get<double>(), n.at("l").get<int>(),
                                  n.at("r").get<int>(), n.at("v").get<double>(),
                                  n.at("d").get<std::vector<double>>()});
        m.trees.push_back(std::move(tree));
    }
    m.classes = j.at("classes").get<std::vector<double>>();
    m.importance = j.at("importance").get<std::vector<double>>();
    return m;
}

}  // namespace jointpred::models
