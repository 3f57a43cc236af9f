#pragma once

// Missing-data handling. Every statistic is computed from training rows and
// then applied unchanged to any row set.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jointpred/data.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::impute {

/// Resolves a strategy for every feature: per-feature override, else the
/// modality's strategy, else mean. The global mean is the fallback.
struct ImputePolicy {
    std::map<ModalityKind, ImputeStrategy> by_modality;
    std::map<std::string, ImputeStrategy> by_feature;

    ImputeStrategy resolve(ModalityKind m, const std::string& feature) const {
        if (auto f = by_feature.find(feature); f != by_feature.end()) return f->second;
        if (auto b = by_modality.find(m); b != by_modality.end()) return b->second;
        return ImputeStrategy::Mean;
    }
};

struct AuditEntry {
    std::string participant;
    std::string feature;
    std::string strategy;
    double value = 0.0;
};

using Audit = std::vector<AuditEntry>;

/// Per-column fill values for one modality.
struct BlockImputer {
    ModalityKind modality = ModalityKind::Wearable;
    std::vector<std::string> input_columns;
    std::vector<std::string> columns;   // kept, in input order
    std::vector<std::size_t> source;    // index into input_columns for each kept column
    std::vector<double> fill;
    std::vector<std::string> strategy;  // name recorded in the audit log
    std::vector<std::string> dropped;
};

/// Fits fill values on `train`. A column with no observed training value is
/// filled with the mean of all observed training cells of the modality; when
/// that is undefined too the column is dropped with a warning. Columns missing
/// in more than `availability_threshold` of the rows that carry the modality
/// are dropped (pre-selection by availability).
inline BlockImputer fit_block_imputer(const FeatureMatrix& train, const ImputePolicy& policy,
                                      double availability_threshold = 1.0) {
    BlockImputer imp;
    imp.modality = train.modality();
    imp.input_columns = train.columns();
    double all_sum = 0.0;
    std::size_t all_n = 0;
    std::size_t carrying = 0;
    for (std::size_t r = 0; r < train.rows(); ++r) {
        if (!train.row_all_missing(r)) ++carrying;
        for (std::size_t c = 0; c < train.cols(); ++c)
            if (train.present(r, c)) {
                all_sum += train.value(r, c);
                ++all_n;
            }
    }
    for (std::size_t c = 0; c < train.cols(); ++c) {
        const auto& name = train.columns()[c];
        std::vector<double> obs;
        for (std::size_t r = 0; r < train.rows(); ++r)
            if (train.present(r, c)) obs.push_back(train.value(r, c));
        if (availability_threshold < 1.0 && carrying > 0 &&
            1.0 - static_cast<double>(obs.size()) / static_cast<double>(carrying) > availability_threshold) {
            imp.dropped.push_back(name);
            continue;
        }
        auto strat = policy.resolve(train.modality(), name);
        double fill = 0.0;
        std::string label(strategy_name(strat));
        if (obs.empty()) {
            if (all_n == 0) {
                diag::warn("AllMissingColumn: dropping " + name + " (modality " +
                           std::string(modality_name(train.modality())) + " has no training values)");
                imp.dropped.push_back(name);
                continue;
            }
            fill = all_sum / static_cast<double>(all_n);
            label = "global_mean";
        } else if (strat == ImputeStrategy::Zero) {
            fill = 0.0;
        } else if (strat == ImputeStrategy::Median) {
            fill = stats::median(obs);
        } else {
            // mean; rolling_mean has no time axis at matrix level and falls
            // back to the global (training) mean.
            fill = stats::mean(obs);
            if (strat != ImputeStrategy::Mean) label = "global_mean";
        }
        imp.columns.push_back(name);
        imp.source.push_back(c);
        imp.fill.push_back(fill);
        imp.strategy.push_back(label);
    }
    return imp;
}

inline void check_columns(const BlockImputer& imp, const FeatureMatrix& m) {
    if (m.columns() != imp.input_columns)
        throw SchemaMismatch("imputer: columns differ from the fitted schema for " +
                             std::string(modality_name(imp.modality)));
}

/// Completes `m` with the fitted fill values.
inline Block apply_block_imputer(const BlockImputer& imp, const FeatureMatrix& m, Audit* audit = nullptr) {
    check_columns(imp, m);
    Block out;
    out.columns = imp.columns;
    out.values.resize(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(imp.columns.size()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t j = 0; j < imp.columns.size(); ++j) {
            auto v = m.at(r, imp.source[j]);
            if (!v && audit) audit->push_back({m.participants()[r], imp.columns[j], imp.strategy[j], imp.fill[j]});
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v.value_or(imp.fill[j]);
        }
    return out;
}

/// Fits on `train`, applies to both. Output has no missing cells.
inline std::pair<Block, Block> impute_fold(const FeatureMatrix& train, const FeatureMatrix& apply,
                                           const ImputePolicy& policy) {
    auto imp = fit_block_imputer(train, policy);
    return {apply_block_imputer(imp, train), apply_block_imputer(imp, apply)};
}

/// Causal fill: a missing value at t becomes the mean of the participant's
/// observed values strictly before t, or `global_mean` when none exist.
inline std::vector<double> rolling_mean_impute(const std::vector<std::optional<double>>& series, double global_mean) {
    std::vector<double> out;
    out.reserve(series.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : series) {
        if (v) {
            out.push_back(*v);
            sum += *v;
            ++n;
        } else {
            out.push_back(n ? sum / static_cast<double>(n) : global_mean);
        }
    }
    return out;
}

/// Per-participant variant; `global_mean` should come from training participants.
inline std::map<std::string, std::vector<double>> rolling_mean_impute(
    const std::map<std::string, std::vector<std::optional<double>>>& by_participant, double global_mean) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [p, s] : by_participant) out[p] = rolling_mean_impute(s, global_mean);
    return out;
}

// ---------------------------------------------------------------------------
// Cluster-based cross-stream imputation
// ---------------------------------------------------------------------------

/// Rows that lack an entire modality receive that modality's values from the
/// centroid of their nearest cluster. Clusters come from k-means on the donor
/// modality's training rows; distances use z-scored dimensions of whatever
/// modalities the row does have.
struct CrossStreamModel {
    std::vector<std::vector<std::string>> columns;  // per block
    std::vector<std::vector<double>> center;        // z-score parameters per block/dim
    std::vector<std::vector<double>> scale;
    std::vector<std::vector<std::vector<double>>> centroids;  // [cluster][block][dim]
    std::vector<std::vector<double>> global_mean;             // [block][dim]
    std::size_t donor = 0;
};

struct KMeansResult {
    Matrix centers;                 // k x d
    std::vector<std::size_t> labels;
    int iterations = 0;
};

/// Lloyd's algorithm with deterministic farthest-point seeding: the first
/// center is drawn with `seed`, each next one is the row farthest from the
/// chosen centers (lowest index on ties).
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter = 100, double tol = 1e-6) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (k == 0 || n < k) throw NoDonorRows("kmeans: need at least k rows");
    KMeansResult res;
    res.centers.resize(static_cast<Eigen::Index>(k), x.cols());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    res.centers.row(0) = x.row(static_cast<Eigen::Index>(pick(rng)));
    std::vector<double> mind(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = (x.row(static_cast<Eigen::Index>(i)) - res.centers.row(static_cast<Eigen::Index>(c - 1))).squaredNorm();
            mind[i] = std::min(mind[i], d);
            if (mind[i] > best) {
                best = mind[i];
                far = i;
            }
        }
        res.centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
    }
    res.labels.assign(n, 0);
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = (x.row(static_cast<Eigen::Index>(i)) - res.centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
                if (d < best) {
                    best = d;
                    res.labels[i] = c;
                }
            }
        }
        Matrix next = Matrix::Zero(res.centers.rows(), res.centers.cols());
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            next.row(static_cast<Eigen::Index>(res.labels[i])) += x.row(static_cast<Eigen::Index>(i));
            ++count[res.labels[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) next.row(static_cast<Eigen::Index>(c)) = res.centers.row(static_cast<Eigen::Index>(c));
            else next.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(count[c]);
            shift = std::max(shift, (next.row(static_cast<Eigen::Index>(c)) - res.centers.row(static_cast<Eigen::Index>(c))).norm());
        }
        res.centers = std::move(next);
        if (shift < tol) break;
    }
    return res;
}

namespace detail {

// Mean squared z-distance over the dims of present blocks.
inline double partial_distance(const CrossStreamModel& m, const std::vector<const Eigen::VectorXd*>& row,
                               std::size_t cluster) {
    double d = 0.0;
    std::size_t dims = 0;
    for (std::size_t b = 0; b < row.size(); ++b) {
        if (!row[b]) continue;
        for (std::size_t j = 0; j < m.columns[b].size(); ++j) {
            double z = ((*row[b])[static_cast<Eigen::Index>(j)] - m.center[b][j]) / m.scale[b][j];
            double zc = (m.centroids[cluster][b][j] - m.center[b][j]) / m.scale[b][j];
            d += (z - zc) * (z - zc);
            ++dims;
        }
    }
    return dims ? d / static_cast<double>(dims) : 0.0;
}

inline std::optional<std::size_t> nearest(const CrossStreamModel& m, const std::vector<const Eigen::VectorXd*>& row) {
    bool any = false;
    for (auto* p : row) any = any || p;
    if (!any) return std::nullopt;
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m.centroids.size(); ++c) {
        double d = partial_distance(m, row, c);
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// Fits the cross-stream model.
///   raw        training matrices per block (missing cells flagged); a row
///              whose cells are all missing lacks that modality
///   completed  the same rows after per-feature imputation
/// Cluster centroids of each dimension average the originally observed cells
/// of member rows, so k = 1 reproduces mean imputation.
inline CrossStreamModel fit_cross_stream(const std::vector<FeatureMatrix>& raw, const std::vector<Block>& completed,
                                         std::size_t donor, std::size_t k_clusters, std::uint64_t seed) {
    if (raw.size() != completed.size() || donor >= raw.size())
        throw SchemaMismatch("fit_cross_stream: block lists differ");
    const std::size_t B = raw.size();
    const std::size_t n = raw[donor].rows();
    CrossStreamModel m;
    m.donor = donor;
    std::vector<std::vector<bool>> has(B, std::vector<bool>(n));
    for (std::size_t b = 0; b < B; ++b) {
        m.columns.push_back(completed[b].columns);
        for (std::size_t r = 0; r < n; ++r) has[b][r] = !raw[b].row_all_missing(r);
    }

    // z-score parameters and global means per dimension.
    m.center.resize(B);
    m.scale.resize(B);
    m.global_mean.resize(B);
    std::vector<std::vector<std::size_t>> src(B);
    for (std::size_t b = 0; b < B; ++b) {
        for (const auto& name : completed[b].columns) src[b].push_back(*raw[b].column_index(name));
        const std::size_t d = completed[b].columns.size();
        m.center[b].assign(d, 0.0);
        m.scale[b].assign(d, 1.0);
        m.global_mean[b].assign(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> obs, all;
            for (std::size_t r = 0; r < n; ++r) {
                if (!has[b][r]) continue;
                all.push_back(completed[b].values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
                if (raw[b].present(r, src[b][j])) obs.push_back(raw[b].value(r, src[b][j]));
            }
            if (!all.empty()) {
                m.center[b][j] = stats::mean(all);
                double s = stats::stddev(all);
                m.scale[b][j] = s > 0.0 ? s : 1.0;
            }
            m.global_mean[b][j] = obs.empty() ? m.center[b][j] : stats::mean(obs);
        }
    }

    std::vector<std::size_t> donor_rows;
    for (std::size_t r = 0; r < n; ++r)
        if (has[donor][r]) donor_rows.push_back(r);
    if (donor_rows.size() < k_clusters)
        throw NoDonorRows("cross-stream imputation: " + std::to_string(donor_rows.size()) +
                          " donor rows for " + std::to_string(k_clusters) + " clusters");
    const std::size_t dd = completed[donor].columns.size();
    Matrix z(static_cast<Eigen::Index>(donor_rows.size()), static_cast<Eigen::Index>(dd));
    for (std::size_t i = 0; i < donor_rows.size(); ++i)
        for (std::size_t j = 0; j < dd; ++j)
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (completed[donor].values(static_cast<Eigen::Index>(donor_rows[i]), static_cast<Eigen::Index>(j)) -
                 m.center[donor][j]) / m.scale[donor][j];
    auto km = kmeans(z, k_clusters, seed);

    std::vector<std::optional<std::size_t>> member(n);
    for (std::size_t i = 0; i < donor_rows.size(); ++i) member[donor_rows[i]] = km.labels[i];

    auto centroid_means = [&] {
        m.centroids.assign(k_clusters, m.global_mean);
        for (std::size_t c = 0; c < k_clusters; ++c)
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t j = 0; j < completed[b].columns.size(); ++j) {
                    double s = 0.0;
                    std::size_t cnt = 0;
                    for (std::size_t r = 0; r < n; ++r)
                        if (member[r] == c && has[b][r] && raw[b].present(r, src[b][j])) {
                            s += raw[b].value(r, src[b][j]);
                            ++cnt;
                        }
                    if (cnt) m.centroids[c][b][j] = s / static_cast<double>(cnt);
                }
    };
    // Donor-row centroids over all blocks place the remaining training rows;
    // the final centroids then average every member's observed cells.
    centroid_means();
    std::vector<Eigen::VectorXd> rowbuf(B);
    for (std::size_t r = 0; r < n; ++r) {
        if (has[donor][r]) continue;
        std::vector<const Eigen::VectorXd*> row(B, nullptr);
        for (std::size_t b = 0; b < B; ++b)
            if (has[b][r]) {
                rowbuf[b] = completed[b].values.row(static_cast<Eigen::Index>(r)).transpose();
                row[b] = &rowbuf[b];
            }
        member[r] = detail::nearest(m, row);
    }
    centroid_means();
    return m;
}

/// Fills absent blocks of one row. `row[b]` is null when block b is absent.
/// Returns the filled values per block and the cluster used (nullopt when the
/// row had no block at all and global means were used).
inline std::pair<std::vector<Eigen::VectorXd>, std::optional<std::size_t>> apply_cross_stream(
    const CrossStreamModel& m, const std::vector<const Eigen::VectorXd*>& row) {
    auto c = detail::nearest(m, row);
    std::vector<Eigen::VectorXd> out(row.size());
    for (std::size_t b = 0; b < row.size(); ++b) {
        if (row[b]) {
            out[b] = *row[b];
            continue;
        }
        const auto& src = c ? m.centroids[*c][b] : m.global_mean[b];
        out[b] = Eigen::Map<const Eigen::VectorXd>(src.data(), static_cast<Eigen::Index>(src.size()));
    }
    return {out, c};
}

// ---------------------------------------------------------------------------
// Multi-modality imputation used by the pipeline
// ---------------------------------------------------------------------------

struct ImputationFit {
    std::vector<ModalityKind> modalities;
    std::vector<BlockImputer> blocks;
    std::optional<CrossStreamModel> cross;
};

struct ImputationOptions {
    ImputePolicy policy;
    ImputeStrategy modality_strategy = ImputeStrategy::ClusterCrossStream;
    ModalityKind donor = ModalityKind::Wearable;
    std::size_t clusters = 5;
    double availability_threshold = 1.0;
    std::uint64_t seed = 0;
};

inline ImputationFit fit_imputation(const std::vector<FeatureMatrix>& train, const ImputationOptions& opt) {
    ImputationFit fit;
    std::vector<Block> completed;
    for (const auto& m : train) {
        fit.modalities.push_back(m.modality());
        fit.blocks.push_back(fit_block_imputer(m, opt.policy, opt.availability_threshold));
        completed.push_back(apply_block_imputer(fit.blocks.back(), m));
    }
    if (opt.modality_strategy == ImputeStrategy::ClusterCrossStream) {
        auto it = std::find(fit.modalities.begin(), fit.modalities.end(), opt.donor);
        if (it == fit.modalities.end()) throw NoDonorRows("donor modality not present");
        auto donor = static_cast<std::size_t>(it - fit.modalities.begin());
        std::size_t donor_rows = 0;
        for (std::size_t r = 0; r < train[donor].rows(); ++r) donor_rows += !train[donor].row_all_missing(r);
        std::size_t k = opt.clusters;
        if (donor_rows < k) {
            diag::warn("NoDonorRows: " + std::to_string(donor_rows) + " donor rows; using " +
                       std::to_string(donor_rows ? donor_rows : 0) + " clusters");
            k = donor_rows;
        }
        if (k > 0) fit.cross = fit_cross_stream(train, completed, donor, k, opt.seed);
    }
    return fit;
}

/// Completes every block for `rows` (aligned matrices, same order as fit).
inline std::vector<Block> apply_imputation(const ImputationFit& fit, const std::vector<FeatureMatrix>& rows,
                                           Audit* audit = nullptr) {
    if (rows.size() != fit.blocks.size()) throw SchemaMismatch("apply_imputation: block count differs");
    const std::size_t B = rows.size();
    std::vector<Block> out;
    for (std::size_t b = 0; b < B; ++b) out.push_back(apply_block_imputer(fit.blocks[b], rows[b], nullptr));
    const std::size_t n = B ? rows[0].rows() : 0;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<Eigen::VectorXd> buf(B);
        std::vector<const Eigen::VectorXd*> row(B, nullptr);
        bool missing_block = false;
        for (std::size_t b = 0; b < B; ++b) {
            if (rows[b].row_all_missing(r)) {
                missing_block = true;
                continue;
            }
            buf[b] = out[b].values.row(static_cast<Eigen::Index>(r)).transpose();
            row[b] = &buf[b];
            if (audit)
                for (std::size_t j = 0; j < fit.blocks[b].columns.size(); ++j)
                    if (!rows[b].present(r, fit.blocks[b].source[j]))
                        audit->push_back({rows[b].participants()[r], fit.blocks[b].columns[j],
                                          fit.blocks[b].strategy[j], fit.blocks[b].fill[j]});
        }
        if (!missing_block) continue;
        if (fit.cross) {
            auto [filled, cluster] = apply_cross_stream(*fit.cross, row);
            for (std::size_t b = 0; b < B; ++b) {
                if (row[b]) continue;
                out[b].values.row(static_cast<Eigen::Index>(r)) = filled[b].transpose();
                if (audit)
                    for (std::size_t j = 0; j < fit.blocks[b].columns.size(); ++j)
                        audit->push_back({rows[b].participants()[r], fit.blocks[b].columns[j],
                                          cluster ? "cluster_cross_stream" : "global_mean", filled[b][static_cast<Eigen::Index>(j)]});
            }
        } else if (audit) {
            for (std::size_t b = 0; b < B; ++b) {
                if (row[b]) continue;
                for (std::size_t j = 0; j < fit.blocks[b].columns.size(); ++j)
                    audit->push_back({rows[b].participants()[r], fit.blocks[b].columns[j],
                                      fit.blocks[b].strategy[j], fit.blocks[b].fill[j]});
            }
        }
    }
    return out;
}

}  // namespace jointpred::impute
