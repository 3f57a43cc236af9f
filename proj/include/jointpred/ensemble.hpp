#pragma once

// Per-construct model selection over a static fold plan, fusion of the
// per-modality selections, and the proxy pass that feeds predicted Alcohol
// and OCB values back as features for the other constructs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "jointpred/eval.hpp"
#include "jointpred/models.hpp"
#include "jointpred/pipeline.hpp"

namespace jointpred::ensemble {

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

struct FoldPlan {
    int k = 5;
    std::vector<std::string> participants;
    std::vector<int> fold_of;
    bool is_static = true;

    std::vector<std::size_t> members(int f) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == f) out.push_back(i);
        return out;
    }
    /// Positions outside every fold in `excluded`.
    std::vector<std::size_t> outside(std::initializer_list<int> excluded) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (std::find(excluded.begin(), excluded.end(), fold_of[i]) == excluded.end()) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> s(static_cast<std::size_t>(k), 0);
        for (int f : fold_of) ++s[static_cast<std::size_t>(f)];
        return s;
    }
};

/// Seeded shuffle, then round-robin assignment.
inline FoldPlan make_fold_plan(const std::vector<std::string>& participants, int k, std::uint64_t seed) {
    if (k < 2) throw InvalidConfig("folds", "must be >= 2");
    if (participants.size() < static_cast<std::size_t>(k))
        throw TooFewParticipants(std::to_string(participants.size()) + " participants for " + std::to_string(k) + " folds");
    FoldPlan plan;
    plan.k = k;
    plan.participants = participants;
    plan.fold_of.assign(participants.size(), 0);
    std::vector<std::size_t> order(participants.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) plan.fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return plan;
}

struct HoldoutSplit {
    std::vector<std::size_t> train;       // universe rows, ascending
    std::vector<std::size_t> validation;  // universe rows, ascending
};

/// Uniform seeded holdout of round(fraction * n) rows.
inline HoldoutSplit split_holdout(std::size_t n, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto nv = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    HoldoutSplit s;
    s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nv));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(nv), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    return s;
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

struct BlockSelection {
    ModalityKind modality;
    reduce::SelectionMask mask;
    friend bool operator==(const BlockSelection&, const BlockSelection&) = default;
};

/// Which columns enter the model, in a fixed order: modality order, mask
/// order within a modality, then the proxy columns.
struct FusionRecipe {
    std::vector<BlockSelection> blocks;
    reduce::SelectionMask proxy;
    friend bool operator==(const FusionRecipe&, const FusionRecipe&) = default;

    std::size_t width() const {
        std::size_t w = proxy.features.size();
        for (const auto& b : blocks) w += b.mask.features.size();
        return w;
    }
};

inline std::string proxy_column_name(ConstructId id) { return "proxy." + std::string(construct_name(id)); }

/// Top-k per modality on the training rows. A modality without any usable
/// feature for this target contributes nothing.
inline FusionRecipe select_features(const pipeline::Prepared& train, std::span<const std::optional<double>> targets,
                                    std::size_t k, CorrelationMethod method) {
    FusionRecipe r;
    for (auto m : pipeline::kFusionOrder) {
        auto it = train.find(m);
        if (it == train.end() || it->second.columns.empty()) continue;
        try {
            r.blocks.push_back({m, reduce::select_top_k(it->second, targets, k, method)});
        } catch (const NoUsableFeatures&) {
        }
    }
    return r;
}

/// Proxy columns whose training correlation with the target is significant
/// at `alpha`.
inline reduce::SelectionMask select_proxy(const Block& proxy, std::span<const std::optional<double>> targets,
                                          double alpha, CorrelationMethod method) {
    reduce::SelectionMask out;
    std::vector<std::size_t> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i]) {
            rows.push_back(i);
            y.push_back(*targets[i]);
        }
    if (rows.size() < 3) return out;
    const double crit = stats::critical_correlation(alpha, rows.size());
    std::vector<double> x(rows.size());
    for (std::size_t c = 0; c < proxy.columns.size(); ++c) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            x[i] = proxy.values(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(c));
        auto r = reduce::correlation(x, y, method);
        if (r && std::abs(*r) >= crit) out.features.push_back({proxy.columns[c], *r});
    }
    return out;
}

namespace detail {

inline Block take_rows(const Block& b, std::span<const std::size_t> rows) {
    Block out;
    out.columns = b.columns;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), b.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.values.row(static_cast<Eigen::Index>(i)) = b.values.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline Block hconcat(const std::vector<Block>& parts) {
    Block out;
    Eigen::Index rows = -1, cols = 0;
    for (const auto& p : parts) {
        if (rows < 0) rows = p.values.rows();
        else if (p.values.rows() != rows) throw LengthMismatch("fuse: blocks have different row counts");
        cols += p.values.cols();
    }
    out.values.resize(std::max<Eigen::Index>(rows, 0), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.values.middleCols(at, p.values.cols()) = p.values;
        at += p.values.cols();
        out.columns.insert(out.columns.end(), p.columns.begin(), p.columns.end());
    }
    return out;
}

}  // namespace detail

/// Per-modality selected blocks of `blocks` (plus the proxy block), one entry
/// per fused group in recipe order.
inline std::vector<Block> fused_groups(const pipeline::Prepared& blocks, const FusionRecipe& recipe, const Block* proxy) {
    std::vector<Block> out;
    for (const auto& sel : recipe.blocks) {
        auto it = blocks.find(sel.modality);
        if (it == blocks.end())
            throw SchemaMismatch("fuse: modality " + std::string(modality_name(sel.modality)) + " not prepared");
        out.push_back(reduce::apply_mask(it->second, sel.mask));
    }
    if (!recipe.proxy.features.empty()) {
        if (!proxy) throw SchemaMismatch("fuse: proxy columns requested but not supplied");
        out.push_back(reduce::apply_mask(*proxy, recipe.proxy));
    }
    return out;
}

/// Column-wise concatenation of the selected blocks.
inline Block fuse(const pipeline::Prepared& blocks, const FusionRecipe& recipe, const Block* proxy = nullptr) {
    auto groups = fused_groups(blocks, recipe, proxy);
    auto out = detail::hconcat(groups);
    if (out.columns.empty()) throw EmptyFusion("every fused block is empty");
    return out;
}

// ---------------------------------------------------------------------------
// Candidate evaluation
// ---------------------------------------------------------------------------

/// The model inputs of one (construct, fold): fused groups for the training
/// rows that carry the target and for the rows to predict.
struct Design {
    FusionRecipe recipe;
    std::vector<Block> train;
    std::vector<double> y;
    std::vector<Block> test;
    std::vector<std::optional<double>> test_truth;
};

/// A fitted candidate: one component per fused group (a single group in
/// feature fusion mode).
struct FittedCandidate {
    models::CandidateSpec spec;
    std::vector<models::TrainedComponent> components;
};

inline std::vector<Block> as_groups(std::vector<Block> groups, FusionMode mode) {
    if (mode == FusionMode::PerModalityMean) return groups;
    std::vector<Block> one;
    one.push_back(detail::hconcat(groups));
    return one;
}

inline FittedCandidate fit_candidate(const models::CandidateSpec& spec, const std::vector<Block>& groups,
                                     std::span<const double> y, std::uint64_t seed) {
    FittedCandidate fc;
    fc.spec = spec;
    for (std::size_t g = 0; g < groups.size(); ++g)
        fc.components.push_back(models::fit(spec, groups[g], y, derive_seed(seed, {g})));
    return fc;
}

/// Mean of the group predictions, clamped to the construct range.
inline std::vector<double> predict_candidate(const FittedCandidate& fc, const std::vector<Block>& groups,
                                             const Construct& construct) {
    if (groups.size() != fc.components.size()) throw SchemaMismatch("predict: fused group count differs");
    std::vector<double> out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto p = models::predict(fc.components[g], groups[g]);
        if (out.empty()) out.assign(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
    }
    for (auto& v : out) v = clamp_to_range(construct, v / static_cast<double>(groups.size()));
    return out;
}

struct FoldScore {
    std::optional<double> tau;
    std::optional<double> smape;
    std::optional<double> accuracy;
    bool failed = false;
    std::string error;
};

inline FoldScore score_fold(std::span<const double> pred, std::span<const std::optional<double>> truth) {
    std::vector<double> p, a;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i]) {
            p.push_back(pred[i]);
            a.push_back(*truth[i]);
        }
    FoldScore s;
    if (p.empty()) return s;
    s.smape = eval::smape(p, a);
    if (p.size() >= 2) s.tau = eval::kendall_tau(p, a);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == a[i];
    s.accuracy = static_cast<double>(hit) / static_cast<double>(p.size());
    return s;
}

struct CandidateRecord {
    models::CandidateSpec spec;
    std::vector<FoldScore> folds;
    std::vector<std::vector<double>> predictions;  // per fold, aligned with the fold's test rows
    double score = -INFINITY;
    double mean_smape = INFINITY;
};

/// Mean fold score (Kendall tau, or accuracy for classification); an
/// undefined tau counts as 0 and any failed fold makes the score -inf.
inline void summarize(CandidateRecord& c, TaskKind kind) {
    double s = 0.0, sm = 0.0;
    std::size_t nsm = 0;
    for (const auto& f : c.folds) {
        if (f.failed) {
            c.score = -INFINITY;
            c.mean_smape = INFINITY;
            return;
        }
        s += kind == TaskKind::Classification ? f.accuracy.value_or(0.0) : f.tau.value_or(0.0);
        if (f.smape) {
            sm += *f.smape;
            ++nsm;
        }
    }
    c.score = c.folds.empty() ? -INFINITY : s / static_cast<double>(c.folds.size());
    c.mean_smape = nsm ? sm / static_cast<double>(nsm) : INFINITY;
}

/// Candidate indices best first: higher score, then smaller SMAPE, then
/// family name, then label.
inline std::vector<std::size_t> rank_candidates(const std::vector<CandidateRecord>& cands) {
    std::vector<std::size_t> idx(cands.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = cands[a];
        const auto& y = cands[b];
        if (x.score != y.score) return x.score > y.score;
        if (x.mean_smape != y.mean_smape) return x.mean_smape < y.mean_smape;
        auto fx = models::family_name(x.spec.family), fy = models::family_name(y.spec.family);
        if (fx != fy) return fx < fy;
        return x.spec.label() < y.spec.label();
    });
    return idx;
}

inline std::vector<models::CandidateSpec> candidate_grid(const ValidatedConfig& cfg, TaskKind kind) {
    auto all = models::default_candidates(kind == TaskKind::Classification, cfg->forest_trees, cfg->cart_min_leaf);
    if (cfg->candidate_families.empty()) return all;
    std::vector<models::CandidateSpec> out;
    for (auto& c : all)
        if (std::find(cfg->candidate_families.begin(), cfg->candidate_families.end(), models::family_name(c.family)) !=
            cfg->candidate_families.end())
            out.push_back(c);
    if (out.empty()) throw InvalidConfig("models.candidates", "no candidate family applies to this task");
    return out;
}

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. `fn` must not throw.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

/// Fits every candidate on every design; results land in fixed slots so the
/// outcome does not depend on scheduling.
inline std::vector<CandidateRecord> evaluate_candidates(const std::vector<models::CandidateSpec>& grid,
                                                        const std::vector<Design>& designs, const Construct& construct,
                                                        const ValidatedConfig& cfg,
                                                        const std::function<std::uint64_t(std::size_t, std::size_t)>& seed_of) {
    std::vector<CandidateRecord> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out[j].spec = grid[j];
        out[j].folds.resize(designs.size());
        out[j].predictions.resize(designs.size());
    }
    parallel_for(grid.size() * designs.size(), cfg->workers, [&](std::size_t cell) {
        const std::size_t j = cell / designs.size(), f = cell % designs.size();
        const auto& d = designs[f];
        auto& slot = out[j].folds[f];
        try {
            if (d.train.empty()) throw EmptyFusion("no fused columns");
            auto fc = fit_candidate(grid[j], d.train, d.y, seed_of(j, f));
            auto pred = predict_candidate(fc, d.test, construct);
            slot = score_fold(pred, d.test_truth);
            out[j].predictions[f] = std::move(pred);
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.error = e.what();
            diag::warn(std::string(construct.name()) + ": candidate " + grid[j].label() + " failed on fold " +
                       std::to_string(f) + ": " + e.what());
        }
    });
    for (auto& c : out) summarize(c, construct.kind);
    return out;
}

// ---------------------------------------------------------------------------
// Joint model
// ---------------------------------------------------------------------------

struct ConstructRun {
    ConstructId id = ConstructId::IRB;
    TaskKind kind = TaskKind::Regression;
    int pass = 1;
    bool ok = false;
    std::vector<CandidateRecord> candidates;
    std::size_t selected = 0;
    std::vector<FusionRecipe> fold_recipes;
    std::vector<std::optional<double>> baseline_smape;  // per fold
    FusionRecipe final_recipe;
    FittedCandidate final_model;
    std::vector<std::optional<double>> oof;   // per training position
    std::vector<double> validation;           // per validation row

    const CandidateRecord& chosen() const { return candidates.at(selected); }
};

struct RunResult {
    std::vector<std::string> participants;  // universe order
    HoldoutSplit split;
    FoldPlan plan;                          // over split.train positions
    std::vector<pipeline::Preparation> fold_preps;
    pipeline::Preparation final_prep;
    std::vector<ConstructId> modeled;       // in report order
    std::map<ConstructId, ConstructRun> first_pass;
    std::map<ConstructId, ConstructRun> runs;  // final result per construct
    std::map<ConstructId, std::vector<std::size_t>> inner_proxy_choice;  // per outer fold
    impute::Audit audit;                    // final preparation on training and validation rows
};

namespace detail {

struct PreparedFold {
    std::vector<std::size_t> train_pos;  // positions into the training set
    std::vector<std::size_t> test_pos;
    pipeline::Prepared train;
    pipeline::Prepared test;
};

inline std::vector<std::size_t> to_rows(const std::vector<std::size_t>& base, std::span<const std::size_t> pos) {
    std::vector<std::size_t> out;
    out.reserve(pos.size());
    for (auto p : pos) out.push_back(base[p]);
    return out;
}

inline std::vector<std::optional<double>> truth_for(const GroundTruthTable& truth, std::span<const std::size_t> rows,
                                                    ConstructId id) {
    std::vector<std::optional<double>> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(truth.value(r, id));
    return out;
}

inline Design make_design(const pipeline::Prepared& train, const pipeline::Prepared& test,
                          const std::vector<std::optional<double>>& y_train, std::vector<std::optional<double>> y_test,
                          const ValidatedConfig& cfg, const Block* proxy_train, const Block* proxy_test) {
    Design d;
    d.recipe = select_features(train, y_train, static_cast<std::size_t>(cfg->top_k_per_modality), cfg->selection_method);
    if (proxy_train) d.recipe.proxy = select_proxy(*proxy_train, y_train, cfg->proxy_selection_alpha, cfg->selection_method);
    d.test_truth = std::move(y_test);
    if (d.recipe.width() == 0) return d;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < y_train.size(); ++i)
        if (y_train[i]) {
            keep.push_back(i);
            d.y.push_back(*y_train[i]);
        }
    auto tr = fused_groups(train, d.recipe, proxy_train);
    for (auto& b : tr) b = take_rows(b, keep);
    d.train = as_groups(std::move(tr), cfg->fusion_mode);
    d.test = as_groups(fused_groups(test, d.recipe, proxy_test), cfg->fusion_mode);
    return d;
}

inline PreparedFold prepare_fold(const pipeline::Universe& u, const std::vector<std::size_t>& train_rows_all,
                                 std::vector<std::size_t> train_pos, std::vector<std::size_t> test_pos,
                                 const std::vector<std::size_t>* test_rows_override, const ValidatedConfig& cfg,
                                 std::uint64_t seed, pipeline::Preparation* keep = nullptr) {
    PreparedFold pf;
    pf.train_pos = std::move(train_pos);
    pf.test_pos = std::move(test_pos);
    auto tr = to_rows(train_rows_all, pf.train_pos);
    auto te = test_rows_override ? *test_rows_override : to_rows(train_rows_all, pf.test_pos);
    auto prep = pipeline::fit_preparation(u, tr, cfg, seed);
    pf.train = pipeline::apply_preparation(prep, u, tr, cfg);
    pf.test = pipeline::apply_preparation(prep, u, te, cfg);
    if (keep) *keep = std::move(prep);
    return pf;
}

inline Block proxy_block(const std::vector<ConstructId>& ids, const std::vector<std::vector<double>>& cols) {
    Block b;
    for (auto id : ids) b.columns.push_back(proxy_column_name(id));
    const auto n = cols.empty() ? 0 : cols[0].size();
    b.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t i = 0; i < n; ++i)
            b.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = cols[c][i];
    return b;
}

}  // namespace detail

/// Prediction of a fitted construct model for prepared rows. `proxy` holds the
/// proxy columns for constructs selected in the proxy pass.
inline std::vector<double> predict_construct(const ConstructRun& run, const pipeline::Prepared& rows, const Block* proxy,
                                             const ValidatedConfig& cfg) {
    auto groups = as_groups(fused_groups(rows, run.final_recipe, proxy), cfg->fusion_mode);
    return predict_candidate(run.final_model, groups, cfg.construct(run.id));
}

/// Constructs whose predictions feed the proxy pass, in fixed order.
inline std::vector<ConstructId> proxy_sources(const RunResult& r) {
    std::vector<ConstructId> out;
    for (auto id : kProxyConstructs)
        if (auto it = r.runs.find(id); it != r.runs.end() && it->second.ok) out.push_back(id);
    return out;
}

/// Algorithm: holdout split, static folds over the training part, per
/// construct candidate search with per-fold feature selection, selection by
/// mean fold score, refit on all training rows, validation prediction; then
/// one proxy pass for every construct except the proxy sources.
inline RunResult run_joint_model(const pipeline::Universe& u, const ValidatedConfig& cfg) {
    const auto& c = cfg.get();
    const std::uint64_t seed = c.seed;
    RunResult res;
    res.participants = u.participants;
    res.split = split_holdout(u.participants.size(), c.holdout_fraction, derive_seed(seed, {1}));
    const auto& T = res.split.train;
    const auto& V = res.split.validation;
    std::vector<std::string> train_ids;
    for (auto r : T) train_ids.push_back(u.participants[r]);
    res.plan = make_fold_plan(train_ids, c.folds, derive_seed(seed, {2}));
    const int K = c.folds;

    res.modeled = c.targets;
    if (c.proxy_pass)
        for (auto id : kProxyConstructs)
            if (std::find(res.modeled.begin(), res.modeled.end(), id) == res.modeled.end()) res.modeled.push_back(id);
    std::sort(res.modeled.begin(), res.modeled.end());

    // Preparations: one per outer fold and one on all training rows.
    std::vector<detail::PreparedFold> folds(static_cast<std::size_t>(K));
    res.fold_preps.resize(static_cast<std::size_t>(K));
    for (int f = 0; f < K; ++f)
        folds[static_cast<std::size_t>(f)] = detail::prepare_fold(u, T, res.plan.outside({f}), res.plan.members(f), nullptr, cfg,
                                                                  derive_seed(seed, {3, static_cast<std::uint64_t>(f)}),
                                                                  &res.fold_preps[static_cast<std::size_t>(f)]);
    std::vector<std::size_t> all_pos(T.size());
    std::iota(all_pos.begin(), all_pos.end(), 0);
    auto full = detail::prepare_fold(u, T, all_pos, {}, &V, cfg, derive_seed(seed, {3, static_cast<std::uint64_t>(K)}),
                                     &res.final_prep);
    {
        std::vector<std::size_t> tv(T);
        tv.insert(tv.end(), V.begin(), V.end());
        std::sort(tv.begin(), tv.end());
        pipeline::apply_preparation(res.final_prep, u, tv, cfg, &res.audit);
    }

    auto run_construct = [&](ConstructId id, int pass, const std::vector<Block>* fold_proxy_train,
                             const std::vector<Block>* fold_proxy_test, const Block* full_proxy_train,
                             const Block* full_proxy_test) {
        const Construct con = cfg.construct(id);
        ConstructRun cr;
        cr.id = id;
        cr.kind = con.kind;
        cr.pass = pass;
        std::vector<Design> designs;
        for (int f = 0; f < K; ++f) {
            const auto& pf = folds[static_cast<std::size_t>(f)];
            auto ytr = detail::truth_for(u.truth, detail::to_rows(T, pf.train_pos), id);
            auto yte = detail::truth_for(u.truth, detail::to_rows(T, pf.test_pos), id);
            designs.push_back(detail::make_design(pf.train, pf.test, ytr, yte, cfg,
                                                  fold_proxy_train ? &(*fold_proxy_train)[static_cast<std::size_t>(f)] : nullptr,
                                                  fold_proxy_test ? &(*fold_proxy_test)[static_cast<std::size_t>(f)] : nullptr));
            cr.fold_recipes.push_back(designs.back().recipe);
            std::vector<double> seen, held_pred, held;
            for (const auto& v : ytr)
                if (v) seen.push_back(*v);
            for (const auto& v : yte)
                if (v) held.push_back(*v);
            if (!seen.empty() && !held.empty()) {
                auto base = eval::expected_value_baseline(seen);
                cr.baseline_smape.push_back(eval::smape(base.predict(held.size()), held));
            } else {
                cr.baseline_smape.push_back(std::nullopt);
            }
        }
        const auto grid = candidate_grid(cfg, con.kind);
        cr.candidates = evaluate_candidates(grid, designs, con, cfg, [&](std::size_t j, std::size_t f) {
            return derive_seed(seed, {5, static_cast<std::uint64_t>(pass), index_of(id), f, j});
        });
        cr.oof.assign(T.size(), std::nullopt);

        auto ytr = detail::truth_for(u.truth, T, id);
        auto final_design = detail::make_design(full.train, full.test, ytr, detail::truth_for(u.truth, V, id), cfg,
                                                full_proxy_train, full_proxy_test);
        cr.final_recipe = final_design.recipe;
        for (auto j : rank_candidates(cr.candidates)) {
            if (!std::isfinite(cr.candidates[j].score)) break;
            try {
                if (final_design.train.empty()) throw EmptyFusion("no fused columns");
                cr.final_model = fit_candidate(cr.candidates[j].spec, final_design.train, final_design.y,
                                               derive_seed(seed, {5, static_cast<std::uint64_t>(pass), index_of(id),
                                                                  static_cast<std::uint64_t>(K), j}));
                cr.validation = predict_candidate(cr.final_model, final_design.test, con);
                cr.selected = j;
                cr.ok = true;
                break;
            } catch (const std::exception& e) {
                diag::warn(std::string(con.name()) + ": refit of " + cr.candidates[j].spec.label() +
                           " failed, trying the next candidate: " + e.what());
            }
        }
        if (!cr.ok) {
            diag::warn(std::string(con.name()) + ": every candidate failed; construct not predicted");
            return cr;
        }
        for (int f = 0; f < K; ++f) {
            const auto& pf = folds[static_cast<std::size_t>(f)];
            const auto& pred = cr.candidates[cr.selected].predictions[static_cast<std::size_t>(f)];
            for (std::size_t i = 0; i < pf.test_pos.size(); ++i) cr.oof[pf.test_pos[i]] = pred[i];
        }
        return cr;
    };

    for (auto id : res.modeled) res.runs[id] = run_construct(id, 1, nullptr, nullptr, nullptr, nullptr);
    if (!c.proxy_pass) return res;

    const auto sources = proxy_sources(res);
    if (sources.empty()) {
        diag::warn("proxy pass skipped: no proxy construct was predicted");
        return res;
    }

    // Pair-level fits for the proxy sources: trained without two folds so the
    // proxy values of an outer fold's training rows never depend on that fold.
    const auto npairs = static_cast<std::size_t>(K * K);
    std::map<ConstructId, std::vector<std::vector<std::vector<double>>>> pair_pred;  // [pair][cand] over both folds
    std::vector<std::vector<std::size_t>> pair_rows(npairs);
    for (auto id : sources) pair_pred[id].resize(npairs);
    for (int f = 0; f < K; ++f)
        for (int g = f + 1; g < K; ++g) {
            const auto pi = static_cast<std::size_t>(f * K + g);
            auto test_pos = res.plan.members(f);
            auto mg = res.plan.members(g);
            test_pos.insert(test_pos.end(), mg.begin(), mg.end());
            auto pf = detail::prepare_fold(u, T, res.plan.outside({f, g}), test_pos, nullptr, cfg,
                                           derive_seed(seed, {4, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(g)}));
            pair_rows[pi] = pf.test_pos;
            for (auto id : sources) {
                const Construct con = cfg.construct(id);
                auto ytr = detail::truth_for(u.truth, detail::to_rows(T, pf.train_pos), id);
                auto yte = detail::truth_for(u.truth, detail::to_rows(T, pf.test_pos), id);
                std::vector<Design> d{detail::make_design(pf.train, pf.test, ytr, yte, cfg, nullptr, nullptr)};
                auto recs = evaluate_candidates(candidate_grid(cfg, con.kind), d, con, cfg, [&](std::size_t j, std::size_t) {
                    return derive_seed(seed, {6, index_of(id), static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(g), j});
                });
                auto& slot = pair_pred[id][pi];
                for (auto& r : recs) slot.push_back(r.folds[0].failed ? std::vector<double>{} : std::move(r.predictions[0]));
            }
        }

    // Inner selection per outer fold f: candidates scored on folds g != f by
    // the pair models trained without {f, g}.
    std::vector<Block> proxy_train(static_cast<std::size_t>(K)), proxy_test(static_cast<std::size_t>(K));
    {
        std::vector<std::vector<std::vector<double>>> tr_cols(static_cast<std::size_t>(K)), te_cols(static_cast<std::size_t>(K));
        for (auto id : sources) {
            const auto& first = res.runs.at(id);
            const auto& grid = first.candidates;
            auto& choice = res.inner_proxy_choice[id];
            for (int f = 0; f < K; ++f) {
                std::vector<CandidateRecord> inner(grid.size());
                for (std::size_t j = 0; j < grid.size(); ++j) {
                    inner[j].spec = grid[j].spec;
                    for (int g = 0; g < K; ++g) {
                        if (g == f) continue;
                        const auto pi = static_cast<std::size_t>(std::min(f, g) * K + std::max(f, g));
                        const auto& pred = pair_pred[id][pi][j];
                        if (pred.empty()) {
                            inner[j].folds.push_back({std::nullopt, std::nullopt, std::nullopt, true, "failed"});
                            continue;
                        }
                        std::vector<double> p;
                        std::vector<std::optional<double>> t;
                        for (std::size_t i = 0; i < pair_rows[pi].size(); ++i)
                            if (res.plan.fold_of[pair_rows[pi][i]] == g) {
                                p.push_back(pred[i]);
                                t.push_back(u.truth.value(T[pair_rows[pi][i]], id));
                            }
                        inner[j].folds.push_back(score_fold(p, t));
                    }
                    summarize(inner[j], first.kind);
                }
                auto order = rank_candidates(inner);
                std::size_t s = order[0];
                if (!std::isfinite(inner[s].score) || grid[s].folds[static_cast<std::size_t>(f)].failed) {
                    for (auto j : order)
                        if (!grid[j].folds[static_cast<std::size_t>(f)].failed) {
                            s = j;
                            break;
                        }
                }
                choice.push_back(s);
                if (!std::isfinite(inner[s].score))
                    diag::warn(std::string(construct_name(id)) + ": no proxy candidate succeeded on every pair for fold " +
                               std::to_string(f) + "; its proxy column is constant there");
                // Training rows of outer fold f: pair model {f, g} for rows in g.
                std::vector<double> tr(folds[static_cast<std::size_t>(f)].train_pos.size(), 0.0);
                std::map<std::size_t, std::size_t> where;
                for (std::size_t i = 0; i < folds[static_cast<std::size_t>(f)].train_pos.size(); ++i)
                    where[folds[static_cast<std::size_t>(f)].train_pos[i]] = i;
                for (int g = 0; g < K; ++g) {
                    if (g == f) continue;
                    const auto pi = static_cast<std::size_t>(std::min(f, g) * K + std::max(f, g));
                    const auto& pred = pair_pred[id][pi][s];
                    for (std::size_t i = 0; i < pair_rows[pi].size(); ++i)
                        if (res.plan.fold_of[pair_rows[pi][i]] == g)
                            tr[where.at(pair_rows[pi][i])] = pred.empty() ? 0.0 : pred[i];
                }
                tr_cols[static_cast<std::size_t>(f)].push_back(std::move(tr));
                const auto& held = grid[s].predictions[static_cast<std::size_t>(f)];
                te_cols[static_cast<std::size_t>(f)].push_back(held);
            }
        }
        for (int f = 0; f < K; ++f) {
            proxy_train[static_cast<std::size_t>(f)] = detail::proxy_block(sources, tr_cols[static_cast<std::size_t>(f)]);
            proxy_test[static_cast<std::size_t>(f)] = detail::proxy_block(sources, te_cols[static_cast<std::size_t>(f)]);
        }
    }

    // Refit on all training rows: proxies are the out-of-fold predictions for
    // training rows and the validation predictions for validation rows.
    std::vector<std::vector<double>> full_tr, full_te;
    for (auto id : sources) {
        std::vector<double> col;
        for (const auto& v : res.runs.at(id).oof) col.push_back(*v);
        full_tr.push_back(std::move(col));
        full_te.push_back(res.runs.at(id).validation);
    }
    const Block full_proxy_train = detail::proxy_block(sources, full_tr);
    const Block full_proxy_test = detail::proxy_block(sources, full_te);

    res.first_pass = res.runs;
    for (auto id : res.modeled) {
        if (is_proxy_construct(id)) continue;
        res.runs[id] = run_construct(id, 2, &proxy_train, &proxy_test, &full_proxy_train, &full_proxy_test);
    }
    return res;
}

}  // namespace jointpred::ensemble
