#pragma once

// Raw cohort -> participant-level feature universe, and the per-fold
// preparation (HON embedding, imputation, social PCA) that is fitted on
// training rows and applied to any row set.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointpred/cohort.hpp"
#include "jointpred/features.hpp"
#include "jointpred/hon.hpp"
#include "jointpred/impute.hpp"
#include "jointpred/reduce.hpp"

namespace jointpred::pipeline {

/// Fixed fusion order of the modality blocks.
inline constexpr std::array<ModalityKind, 7> kFusionOrder = {
    ModalityKind::Wearable,  ModalityKind::PhoneAgent, ModalityKind::Beacon,
    ModalityKind::SocialMedia, ModalityKind::HonHeart, ModalityKind::HonStress,
    ModalityKind::HeartRateDerived};

using SlotSeries = std::optional<std::vector<hon::SlotMean>>;

struct Universe {
    std::vector<std::string> participants;
    GroundTruthTable truth;
    /// Static blocks, rows aligned with `participants`; a row with every
    /// cell missing lacks the modality.
    std::map<ModalityKind, FeatureMatrix> blocks;
    /// Slot means feeding the HON blocks (HonHeart, HonStress).
    std::map<ModalityKind, std::vector<SlotSeries>> sequences;
    std::vector<ingest::Reject> rejects;

    /// Modalities present, in fusion order.
    std::vector<ModalityKind> modalities() const {
        std::vector<ModalityKind> out;
        for (auto m : kFusionOrder)
            if (blocks.count(m) || sequences.count(m)) out.push_back(m);
        return out;
    }
};

namespace detail {

inline int tz_for(const PipelineConfig& cfg, const std::string& pid) {
    auto it = cfg.timezone_offset_minutes.find(pid);
    return it == cfg.timezone_offset_minutes.end() ? 0 : it->second;
}

inline void put(FeatureMatrix& m, std::size_t row, const features::FeatureRecord& rec) {
    for (const auto& [name, v] : rec)
        if (v) m.set(row, *m.column_index(name), v);
}

inline std::vector<std::string> names_of(const features::FeatureRecord& rec) {
    std::vector<std::string> out;
    for (const auto& [n, v] : rec) out.push_back(n);
    return out;
}

inline std::vector<std::string> epoch_feature_names(const std::string& signal) {
    std::vector<std::string> out;
    for (auto e : features::kAllEpochs)
        for (auto s : features::kAllStats) out.push_back(features::feature_name(signal, e, s));
    return out;
}

inline ingest::SeriesSet screened(const std::optional<ingest::SeriesSet>& set, const ingest::RangeRules& rules,
                                  std::vector<ingest::Reject>& rejects) {
    auto s = ingest::screen_outliers(*set, rules);
    rejects.insert(rejects.end(), s.rejects.begin(), s.rejects.end());
    return std::move(s.clean);
}

}  // namespace detail

/// Builds participant-level features for every participant in the ground
/// truth; every feature depends on that participant's data alone. Implausible samples are screened first and recorded as rejects.
///   Wearable         daily signals: summaries across days after filling day
///                    gaps with the participant's running mean; plus stress
///                    summaries per epoch
///   PhoneAgent       per-epoch summaries of each phone signal + regularity
///   Beacon           office-presence features averaged over days
///   SocialMedia      the static table as given
///   HeartRateDerived per-epoch heart rate summaries
///   HonHeart/Stress  slot means for the sequence features
inline Universe build_universe(const ingest::RawCohort& raw, const ValidatedConfig& vcfg) {
    const auto& cfg = vcfg.get();
    Universe u;
    u.participants = raw.participants();
    u.truth = raw.truth;
    const auto& pids = u.participants;
    const std::size_t n = pids.size();
    std::set<std::string> known(pids.begin(), pids.end());
    const auto& rules = cfg.plausibility_rules;
    const auto stats = std::span<const features::SummaryStat>(features::kAllStats);
    const auto epochs = std::span<const features::Epoch>(features::kAllEpochs);

    auto warn_unknown = [&](const ingest::SeriesSet& s, std::string_view file) {
        for (const auto& [pid, m] : s.by_participant)
            if (!known.count(pid)) diag::warn(std::string(file) + ": participant " + pid + " has no ground truth; ignored");
    };

    // Wearable: daily signals and stress epochs.
    if (raw.wearable || raw.stress) {
        std::vector<std::string> cols;
        ingest::SeriesSet daily, stress;
        if (raw.wearable) {
            daily = detail::screened(raw.wearable, rules, u.rejects);
            warn_unknown(daily, ingest::kWearableFile);
            for (const auto& sig : daily.signals)
                for (auto s : features::kAllStats) cols.push_back(features::feature_name(sig, features::Epoch::Epoch0, s));
        }
        if (raw.stress) {
            stress = detail::screened(raw.stress, rules, u.rejects);
            warn_unknown(stress, ingest::kStressFile);
            for (const auto& sig : stress.signals)
                for (const auto& c : detail::epoch_feature_names(sig)) cols.push_back(c);
        }
        FeatureMatrix m(ModalityKind::Wearable, pids, cols);
        for (std::size_t r = 0; r < n; ++r) {
            const int tz = detail::tz_for(cfg, pids[r]);
            for (const auto& sig : daily.signals) {
                const auto* ts = daily.find(pids[r], sig);
                if (!ts || ts->empty()) continue;
                // Days between the participant's first and last observation;
                // gaps take the running mean of earlier days.
                std::map<std::int64_t, std::vector<double>> acc;
                for (const auto& p : ts->points()) acc[local_day(p.t, tz)].push_back(p.value);
                const auto first_day = acc.begin()->first, last_day = acc.rbegin()->first;
                std::vector<std::optional<double>> by_day(static_cast<std::size_t>(last_day - first_day + 1));
                for (const auto& [d, vals] : acc) by_day[static_cast<std::size_t>(d - first_day)] = stats::mean(vals);
                auto filled = impute::rolling_mean_impute(by_day, 0.0);
                detail::put(m, r, features::summarize_daily_values(sig, filled, stats, cfg.mode_resolution));
            }
            for (const auto& sig : stress.signals)
                if (const auto* ts = stress.find(pids[r], sig); ts && !ts->empty())
                    detail::put(m, r, features::summarize_participant(*ts, epochs, stats, tz, cfg.mode_resolution));
        }
        u.blocks.emplace(ModalityKind::Wearable, std::move(m));
        if (raw.stress) {
            std::vector<SlotSeries> seq(n);
            for (std::size_t r = 0; r < n; ++r)
                if (const auto* ts = stress.find(pids[r], "stress"); ts && !ts->empty())
                    seq[r] = hon::slot_means(*ts, cfg.slot_minutes);
            u.sequences.emplace(ModalityKind::HonStress, std::move(seq));
        }
    }

    if (raw.phone) {
        auto phone = detail::screened(raw.phone, rules, u.rejects);
        warn_unknown(phone, ingest::kPhoneFile);
        std::vector<std::string> cols;
        for (const auto& sig : phone.signals)
            for (const auto& c : detail::epoch_feature_names(sig)) cols.push_back(c);
        std::vector<std::string> reg;
        for (const auto& sig : cfg.regularity_signals)
            if (std::find(phone.signals.begin(), phone.signals.end(), sig) != phone.signals.end()) reg.push_back(sig);
        for (const auto& sig : reg)
            for (const auto& c : features::regularity_feature_names(sig)) cols.push_back(c);
        FeatureMatrix m(ModalityKind::PhoneAgent, pids, cols);
        for (std::size_t r = 0; r < n; ++r) {
            const int tz = detail::tz_for(cfg, pids[r]);
            for (const auto& sig : phone.signals)
                if (const auto* ts = phone.find(pids[r], sig); ts && !ts->empty())
                    detail::put(m, r, features::summarize_participant(*ts, epochs, stats, tz, cfg.mode_resolution));
            for (const auto& sig : reg) {
                const auto* ts = phone.find(pids[r], sig);
                if (!ts || ts->empty()) continue;
                try {
                    detail::put(m, r, features::regularity_features(*ts, 0, tz));
                } catch (const InsufficientData& e) {
                    diag::warn(e.what());
                }
            }
        }
        u.blocks.emplace(ModalityKind::PhoneAgent, std::move(m));
    }

    if (raw.beacon) {
        auto beacon = detail::screened(raw.beacon, rules, u.rejects);
        warn_unknown(beacon, ingest::kBeaconFile);
        FeatureMatrix m(ModalityKind::Beacon, pids, features::beacon_feature_names());
        for (std::size_t r = 0; r < n; ++r) {
            auto it = beacon.by_participant.find(pids[r]);
            if (it == beacon.by_participant.end()) continue;
            auto days = features::beacon_features(it->second, cfg.desk_rssi_cutoff, detail::tz_for(cfg, pids[r]));
            if (!days.empty()) detail::put(m, r, features::beacon_participant_features(days));
        }
        u.blocks.emplace(ModalityKind::Beacon, std::move(m));
    }

    if (raw.social) {
        auto s = ingest::screen_outliers(*raw.social, rules);
        u.rejects.insert(u.rejects.end(), s.rejects.begin(), s.rejects.end());
        FeatureMatrix m(ModalityKind::SocialMedia, pids, s.clean.columns());
        for (std::size_t r = 0; r < s.clean.rows(); ++r) {
            if (!known.count(s.clean.participants()[r])) {
                diag::warn(std::string(ingest::kSocialFile) + ": participant " + s.clean.participants()[r] +
                           " has no ground truth; ignored");
                continue;
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            auto src = s.clean.row_index(pids[r]);
            if (!src) continue;
            for (std::size_t c = 0; c < m.cols(); ++c) m.set(r, c, s.clean.at(*src, c));
        }
        u.blocks.emplace(ModalityKind::SocialMedia, std::move(m));
    }

    if (raw.heart_rate) {
        auto hr = detail::screened(raw.heart_rate, rules, u.rejects);
        warn_unknown(hr, ingest::kHeartRateFile);
        std::vector<std::string> cols;
        for (const auto& sig : hr.signals)
            for (const auto& c : detail::epoch_feature_names(sig)) cols.push_back(c);
        FeatureMatrix m(ModalityKind::HeartRateDerived, pids, cols);
        std::vector<SlotSeries> seq(n);
        for (std::size_t r = 0; r < n; ++r) {
            const int tz = detail::tz_for(cfg, pids[r]);
            for (const auto& sig : hr.signals)
                if (const auto* ts = hr.find(pids[r], sig); ts && !ts->empty())
                    detail::put(m, r, features::summarize_participant(*ts, epochs, stats, tz, cfg.mode_resolution));
            if (const auto* ts = hr.find(pids[r], "heart_rate"); ts && !ts->empty())
                seq[r] = hon::slot_means(*ts, cfg.slot_minutes);
        }
        u.blocks.emplace(ModalityKind::HeartRateDerived, std::move(m));
        u.sequences.emplace(ModalityKind::HonHeart, std::move(seq));
    }

    for (auto m : kFusionOrder) {
        auto it = u.blocks.find(m);
        bool empty = it == u.blocks.end() && !u.sequences.count(m);
        if (empty) diag::warn("modality " + std::string(modality_name(m)) + " is absent for the whole cohort; block skipped");
    }
    return u;
}

// ---------------------------------------------------------------------------
// Per-fold preparation
// ---------------------------------------------------------------------------

struct HonFit {
    hon::BinSpec bins;
    hon::DenseLayout layout;
    hon::Embedding embedding;
};

/// Everything fitted on one training row set.
struct Preparation {
    std::vector<std::size_t> train_rows;
    std::vector<ModalityKind> order;                   // blocks fed to imputation
    std::map<ModalityKind, HonFit> hon;
    impute::ImputationFit imputation;
    std::optional<reduce::PcaModel> social_pca;
};

/// Complete blocks for one row set, keyed by modality.
using Prepared = std::map<ModalityKind, Block>;

inline std::string hon_component_name(ModalityKind m, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02zu", i + 1);
    return (m == ModalityKind::HonHeart ? "hon_heart.pc" : "hon_stress.pc") + std::string(buf);
}

inline std::string social_component_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zu", i + 1);
    return "social.pc" + std::string(buf);
}

namespace detail {

inline FeatureMatrix hon_scores(const Universe& u, ModalityKind m, const HonFit& fit,
                                std::span<const std::size_t> rows, std::size_t components, int slot_minutes) {
    std::vector<std::string> pids, cols;
    for (auto r : rows) pids.push_back(u.participants[r]);
    for (std::size_t i = 0; i < components; ++i) cols.push_back(hon_component_name(m, i));
    FeatureMatrix out(m, pids, cols);
    auto found = u.sequences.find(m);
    if (found == u.sequences.end()) return out;
    const auto& seq = found->second;
    std::vector<std::size_t> have;
    Matrix dense(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fit.layout.keys.size()));
    dense.setZero();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = seq[rows[i]];
        if (!s || s->empty()) continue;
        auto ds = hon::discretize_slots(u.participants[rows[i]], *s, slot_minutes, fit.bins);
        auto prof = hon::dense_profile(ds, fit.layout);
        for (std::size_t k = 0; k < prof.size(); ++k)
            dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = prof[k];
        have.push_back(i);
    }
    Matrix z = fit.embedding.transform(dense);
    for (auto i : have)
        for (std::size_t c = 0; c < components; ++c)
            out.set(i, c, z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
    return out;
}

}  // namespace detail

/// Fits the preparation on `train_rows` only.
inline Preparation fit_preparation(const Universe& u, std::span<const std::size_t> train_rows,
                                   const ValidatedConfig& vcfg, std::uint64_t seed) {
    const auto& cfg = vcfg.get();
    Preparation prep;
    prep.train_rows.assign(train_rows.begin(), train_rows.end());
    const auto hc = static_cast<std::size_t>(cfg.hon_pca_components);

    for (auto m : {ModalityKind::HonHeart, ModalityKind::HonStress}) {
        auto it = u.sequences.find(m);
        if (it == u.sequences.end()) continue;
        std::vector<double> pooled;
        for (auto r : train_rows)
            if (const auto& s = it->second[r]; s)
                for (const auto& sm : *s) pooled.push_back(sm.mean);
        if (pooled.empty()) {
            diag::warn("no training sequences for " + std::string(modality_name(m)) + "; block skipped");
            continue;
        }
        HonFit fit;
        fit.bins = hon::quantile_bins(pooled, cfg.hon_bins);
        fit.layout = hon::dense_layout(static_cast<int>(fit.bins.alphabet_size()), cfg.hon_orders);
        Block train;
        train.columns = fit.layout.keys;
        std::vector<std::size_t> with_seq;
        for (auto r : train_rows)
            if (it->second[r] && !it->second[r]->empty()) with_seq.push_back(r);
        train.values.resize(static_cast<Eigen::Index>(with_seq.size()), static_cast<Eigen::Index>(train.columns.size()));
        for (std::size_t i = 0; i < with_seq.size(); ++i) {
            auto ds = hon::discretize_slots(u.participants[with_seq[i]], *it->second[with_seq[i]], cfg.slot_minutes, fit.bins);
            auto prof = hon::dense_profile(ds, fit.layout);
            for (std::size_t k = 0; k < prof.size(); ++k)
                train.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = prof[k];
        }
        fit.embedding = hon::embed(train, hc);
        prep.hon.emplace(m, std::move(fit));
    }

    std::vector<FeatureMatrix> train_blocks;
    for (auto m : kFusionOrder) {
        if (auto b = u.blocks.find(m); b != u.blocks.end()) {
            prep.order.push_back(m);
            train_blocks.push_back(b->second.select_rows(train_rows));
        } else if (auto h = prep.hon.find(m); h != prep.hon.end()) {
            prep.order.push_back(m);
            train_blocks.push_back(detail::hon_scores(u, m, h->second, train_rows, hc, cfg.slot_minutes));
        }
    }
    if (prep.order.empty()) throw EmptyFusion("no modality has data");

    impute::ImputationOptions opt;
    opt.policy.by_modality = cfg.imputation_policy;
    opt.policy.by_feature = cfg.feature_overrides;
    opt.modality_strategy = cfg.modality_strategy;
    opt.donor = cfg.donor_modality;
    opt.clusters = static_cast<std::size_t>(cfg.kmeans_clusters);
    opt.availability_threshold = cfg.availability_threshold;
    opt.seed = derive_seed(seed, {11});
    if (opt.modality_strategy == ImputeStrategy::ClusterCrossStream &&
        std::find(prep.order.begin(), prep.order.end(), opt.donor) == prep.order.end()) {
        diag::warn("donor modality " + std::string(modality_name(opt.donor)) + " absent; full-modality gaps use the mean");
        opt.modality_strategy = ImputeStrategy::Mean;
    }
    prep.imputation = impute::fit_imputation(train_blocks, opt);

    auto s = std::find(prep.order.begin(), prep.order.end(), ModalityKind::SocialMedia);
    if (s != prep.order.end()) {
        auto idx = static_cast<std::size_t>(s - prep.order.begin());
        // Full-modality gaps in training rows get their cross-stream fill too.
        auto completed = std::move(impute::apply_imputation(prep.imputation, train_blocks)[idx]);
        const auto n = static_cast<std::size_t>(completed.values.rows());
        const auto p = completed.columns.size();
        const std::size_t k = std::min<std::size_t>({static_cast<std::size_t>(cfg.social_pca_components),
                                                      n > 0 ? n - 1 : 0, p});
        if (k >= 1) {
            try {
                prep.social_pca = reduce::pca_fit(completed, k);
            } catch (const DegenerateInput& e) {
                diag::warn(std::string("social PCA skipped: ") + e.what());
            }
        }
    }
    return prep;
}

/// Complete blocks for `rows` under a fitted preparation.
inline Prepared apply_preparation(const Preparation& prep, const Universe& u, std::span<const std::size_t> rows,
                                  const ValidatedConfig& vcfg, impute::Audit* audit = nullptr) {
    const auto& cfg = vcfg.get();
    const auto hc = static_cast<std::size_t>(cfg.hon_pca_components);
    std::vector<FeatureMatrix> blocks;
    std::vector<std::string> pids;
    for (auto r : rows) pids.push_back(u.participants[r]);
    for (std::size_t i = 0; i < prep.order.size(); ++i) {
        const auto m = prep.order[i];
        if (auto h = prep.hon.find(m); h != prep.hon.end())
            blocks.push_back(detail::hon_scores(u, m, h->second, rows, hc, cfg.slot_minutes));
        else if (auto b = u.blocks.find(m); b != u.blocks.end())
            blocks.push_back(b->second.select_rows(rows));
        else
            blocks.emplace_back(m, pids, prep.imputation.blocks[i].input_columns);
    }
    auto done = impute::apply_imputation(prep.imputation, blocks, audit);
    Prepared out;
    for (std::size_t i = 0; i < prep.order.size(); ++i) {
        const auto m = prep.order[i];
        if (m == ModalityKind::SocialMedia) {
            if (!prep.social_pca) continue;
            Block b;
            b.values = reduce::pca_transform(*prep.social_pca, done[i]);
            for (std::size_t c = 0; c < prep.social_pca->n_components(); ++c) b.columns.push_back(social_component_name(c));
            out.emplace(m, std::move(b));
        } else {
            out.emplace(m, std::move(done[i]));
        }
    }
    return out;
}

}  // namespace jointpred::pipeline
