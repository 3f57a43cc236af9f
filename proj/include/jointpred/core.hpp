#pragma once

// Shared domain types: the construct registry, modality tags, pipeline
// configuration and the output range clamp.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "jointpred/errors.hpp"

namespace jointpred {

// ---------------------------------------------------------------------------
// Constructs
// ---------------------------------------------------------------------------

enum class ConstructId : int {
    IRB,
    ITP,
    OCB,
    InterpersonalDeviance,
    OrganizationalDeviance,
    Abstraction,
    Vocabulary,
    Extraversion,
    Agreeableness,
    Conscientiousness,
    Neuroticism,
    Openness,
    PositiveAffect,
    NegativeAffect,
    Anxiety,
    Alcohol,
    Tobacco,
    PhysicalActivity,
    Sleep,
};

inline constexpr std::size_t kConstructCount = 19;

inline constexpr std::array<ConstructId, kConstructCount> kAllConstructs = {
    ConstructId::IRB,
    ConstructId::ITP,
    ConstructId::OCB,
    ConstructId::InterpersonalDeviance,
    ConstructId::OrganizationalDeviance,
    ConstructId::Abstraction,
    ConstructId::Vocabulary,
    ConstructId::Extraversion,
    ConstructId::Agreeableness,
    ConstructId::Conscientiousness,
    ConstructId::Neuroticism,
    ConstructId::Openness,
    ConstructId::PositiveAffect,
    ConstructId::NegativeAffect,
    ConstructId::Anxiety,
    ConstructId::Alcohol,
    ConstructId::Tobacco,
    ConstructId::PhysicalActivity,
    ConstructId::Sleep,
};

inline constexpr std::array<std::string_view, kConstructCount> kConstructNames = {
    "IRB",          "ITP",           "OCB",
    "InterpersonalDeviance", "OrganizationalDeviance", "Abstraction",
    "Vocabulary",   "Extraversion",  "Agreeableness",
    "Conscientiousness", "Neuroticism", "Openness",
    "PositiveAffect", "NegativeAffect", "Anxiety",
    "Alcohol",      "Tobacco",       "PhysicalActivity",
    "Sleep",
};

inline constexpr std::size_t index_of(ConstructId id) { return static_cast<std::size_t>(id); }

inline constexpr std::string_view construct_name(ConstructId id) {
    return kConstructNames[index_of(id)];
}

inline std::optional<ConstructId> parse_construct(std::string_view name) {
    for (std::size_t i = 0; i < kConstructCount; ++i)
        if (kConstructNames[i] == name) return kAllConstructs[i];
    return std::nullopt;
}

inline ConstructId construct_from_name(std::string_view name) {
    auto id = parse_construct(name);
    if (!id) throw SchemaError(std::string(name), "unknown construct");
    return *id;
}

/// Job-performance constructs, the targets of the incremental-validity check.
inline constexpr std::array<ConstructId, 5> kJobConstructs = {
    ConstructId::IRB, ConstructId::ITP, ConstructId::OCB,
    ConstructId::InterpersonalDeviance, ConstructId::OrganizationalDeviance};

/// Established predictors of job performance (personality and cognitive ability).
inline constexpr std::array<ConstructId, 7> kTheoryConstructs = {
    ConstructId::Extraversion, ConstructId::Agreeableness, ConstructId::Conscientiousness,
    ConstructId::Neuroticism,  ConstructId::Openness,      ConstructId::Abstraction,
    ConstructId::Vocabulary};

/// Constructs whose out-of-fold predictions feed the second selection pass.
inline constexpr std::array<ConstructId, 2> kProxyConstructs = {ConstructId::Alcohol,
                                                                ConstructId::OCB};

inline bool is_proxy_construct(ConstructId id) {
    return std::find(kProxyConstructs.begin(), kProxyConstructs.end(), id) !=
           kProxyConstructs.end();
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    friend bool operator==(const Range&, const Range&) = default;
};

enum class TaskKind { Regression, Classification };

struct Construct {
    ConstructId id;
    Range range;
    TaskKind kind = TaskKind::Regression;
    std::string_view name() const { return construct_name(id); }
};

/// Instrument score ranges used when the config does not override them.
/// Scale ranges are item count times the item range for summed scales and the
/// item range for averaged scales.
inline Range default_range(ConstructId id) {
    switch (id) {
        case ConstructId::IRB: return {1, 7};                      // 7-pt Likert, mean
        case ConstructId::ITP: return {1, 5};                      // 5-pt frequency, mean
        case ConstructId::OCB: return {1, 5};                      // OCB-C, mean
        case ConstructId::InterpersonalDeviance: return {7, 49};   // 7 items x [1,7]
        case ConstructId::OrganizationalDeviance: return {12, 84}; // 12 items x [1,7]
        case ConstructId::Abstraction: return {0, 25};
        case ConstructId::Vocabulary: return {0, 40};
        case ConstructId::Extraversion:
        case ConstructId::Agreeableness:
        case ConstructId::Conscientiousness:
        case ConstructId::Neuroticism:
        case ConstructId::Openness: return {1, 5};                 // BFI-2 domain means
        case ConstructId::PositiveAffect:
        case ConstructId::NegativeAffect: return {10, 50};         // PANAS 10 items x [1,5]
        case ConstructId::Anxiety: return {20, 80};                // STAI 20 items x [1,4]
        case ConstructId::Alcohol: return {0, 40};                 // AUDIT
        case ConstructId::Tobacco: return {0, 140};                // units in past week
        case ConstructId::PhysicalActivity: return {0, 20000};     // MET-min / week
        case ConstructId::Sleep: return {0, 21};                   // PSQI global
    }
    return {0, 1};
}

// ---------------------------------------------------------------------------
// Modalities
// ---------------------------------------------------------------------------

enum class ModalityKind : int {
    Wearable,
    PhoneAgent,
    Beacon,
    SocialMedia,
    HonHeart,
    HonStress,
    HeartRateDerived,
};

inline constexpr std::array<ModalityKind, 7> kAllModalities = {
    ModalityKind::Wearable, ModalityKind::PhoneAgent, ModalityKind::Beacon,
    ModalityKind::SocialMedia, ModalityKind::HonHeart, ModalityKind::HonStress,
    ModalityKind::HeartRateDerived};

inline constexpr std::string_view modality_name(ModalityKind m) {
    constexpr std::array<std::string_view, 7> names = {
        "Wearable", "PhoneAgent", "Beacon", "SocialMedia", "HonHeart", "HonStress",
        "HeartRateDerived"};
    return names[static_cast<std::size_t>(m)];
}

inline std::optional<ModalityKind> parse_modality(std::string_view name) {
    for (auto m : kAllModalities)
        if (modality_name(m) == name) return m;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ImputeStrategy { Mean, Median, Zero, RollingMean, ClusterCrossStream };

inline std::string_view strategy_name(ImputeStrategy s) {
    switch (s) {
        case ImputeStrategy::Mean: return "mean";
        case ImputeStrategy::Median: return "median";
        case ImputeStrategy::Zero: return "zero";
        case ImputeStrategy::RollingMean: return "rolling_mean";
        case ImputeStrategy::ClusterCrossStream: return "cluster_cross_stream";
    }
    return "mean";
}

inline std::optional<ImputeStrategy> parse_strategy(std::string_view s) {
    for (auto v : {ImputeStrategy::Mean, ImputeStrategy::Median, ImputeStrategy::Zero,
                   ImputeStrategy::RollingMean, ImputeStrategy::ClusterCrossStream})
        if (strategy_name(v) == s) return v;
    return std::nullopt;
}

enum class CorrelationMethod { Pearson, Spearman };
enum class FusionMode { Feature, PerModalityMean };

inline std::string_view fusion_mode_name(FusionMode m) {
    return m == FusionMode::Feature ? "feature" : "per_modality_mean";
}

struct PlausibilityRule {
    double lo = -INFINITY;
    double hi = INFINITY;
    std::string reason;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int folds = 5;
    int top_k_per_modality = 20;
    int social_pca_components = 200;
    std::vector<int> hon_orders = {1, 2, 3, 4, 5};
    int hon_pca_components = 5;
    int slot_minutes = 30;
    int hon_bins = 3;
    std::string smape_definition = "bounded-0-200";

    /// Per-feature strategy per modality; full-modality gaps use
    /// `modality_strategy`.
    std::map<ModalityKind, ImputeStrategy> imputation_policy;
    std::map<std::string, ImputeStrategy> feature_overrides;
    ImputeStrategy modality_strategy = ImputeStrategy::ClusterCrossStream;
    ModalityKind donor_modality = ModalityKind::Wearable;
    int kmeans_clusters = 5;
    double availability_threshold = 0.8;

    std::map<ConstructId, Range> construct_ranges;
    std::set<ConstructId> classification_constructs;
    std::vector<ConstructId> targets;

    CorrelationMethod selection_method = CorrelationMethod::Spearman;
    double proxy_selection_alpha = 0.01;
    double holdout_fraction = 0.2;
    FusionMode fusion_mode = FusionMode::Feature;
    bool proxy_pass = true;
    int workers = 1;

    int forest_trees = 100;
    int cart_min_leaf = 5;
    /// Families to search (empty = the full default grid).
    std::vector<std::string> candidate_families;

    int gemm_restarts = 20;
    int gemm_iterations = 200;
    int bootstrap_resamples = 2000;

    double desk_rssi_cutoff = -70.0;
    double mode_resolution = 1.0;
    std::map<std::string, int> timezone_offset_minutes;
    std::map<std::string, PlausibilityRule> plausibility_rules;
    std::vector<std::string> regularity_signals = {"unlocks", "screen_minutes", "distance_km"};
};

/// Rules seeded with the error classes observed in raw sensing streams.
inline std::map<std::string, PlausibilityRule> default_plausibility_rules() {
    return {
        {"sleep_minutes", {0.0, 1440.0, "exceeds 1440/day"}},
        {"commute_minutes", {0.0, INFINITY, "negative commute"}},
        {"heart_rate", {25.0, 250.0, "heart rate outside [25,250]"}},
        {"stress", {0.0, 100.0, "stress outside [0,100]"}},
        {"steps", {0.0, 200000.0, "implausible step count"}},
    };
}

/// A configuration that passed `validate_config`; all defaults are filled.
class ValidatedConfig {
public:
    const PipelineConfig& operator*() const noexcept { return cfg_; }
    const PipelineConfig* operator->() const noexcept { return &cfg_; }
    const PipelineConfig& get() const noexcept { return cfg_; }

    Construct construct(ConstructId id) const {
        Construct c{id, cfg_.construct_ranges.at(id), TaskKind::Regression};
        if (cfg_.classification_constructs.count(id)) c.kind = TaskKind::Classification;
        return c;
    }

    ImputeStrategy strategy_for(ModalityKind m) const {
        auto it = cfg_.imputation_policy.find(m);
        return it == cfg_.imputation_policy.end() ? ImputeStrategy::Mean : it->second;
    }

private:
    explicit ValidatedConfig(PipelineConfig cfg) : cfg_(std::move(cfg)) {}
    PipelineConfig cfg_;
    friend ValidatedConfig validate_config(PipelineConfig cfg);
};

inline ValidatedConfig validate_config(PipelineConfig cfg) {
    if (cfg.folds < 2) throw InvalidConfig("folds", "must be >= 2");
    if (cfg.top_k_per_modality < 1) throw InvalidConfig("top_k_per_modality", "must be >= 1");
    if (cfg.social_pca_components < 1)
        throw InvalidConfig("social_pca_components", "must be >= 1");
    if (cfg.hon_orders.empty()) throw InvalidConfig("hon_orders", "must be nonempty");
    for (int n : cfg.hon_orders)
        if (n < 1) throw InvalidConfig("hon_orders", "each order must be >= 1");
    std::sort(cfg.hon_orders.begin(), cfg.hon_orders.end());
    cfg.hon_orders.erase(std::unique(cfg.hon_orders.begin(), cfg.hon_orders.end()),
                         cfg.hon_orders.end());
    if (cfg.hon_pca_components < 1) throw InvalidConfig("hon_pca_components", "must be >= 1");
    if (cfg.slot_minutes <= 0) throw InvalidConfig("slot_minutes", "must be > 0");
    if (cfg.hon_bins < 2) throw InvalidConfig("hon_bins", "must be >= 2");
    if (cfg.smape_definition != "bounded-0-200")
        throw InvalidConfig("smape_definition", "only 'bounded-0-200' is supported");
    if (cfg.kmeans_clusters < 1) throw InvalidConfig("kmeans_clusters", "must be >= 1");
    if (!(cfg.availability_threshold > 0.0 && cfg.availability_threshold <= 1.0))
        throw InvalidConfig("availability_threshold", "must be in (0,1]");
    if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0))
        throw InvalidConfig("holdout_fraction", "must be in [0,1)");
    if (!(cfg.proxy_selection_alpha > 0.0 && cfg.proxy_selection_alpha <= 1.0))
        throw InvalidConfig("proxy_selection_alpha", "must be in (0,1]");
    if (cfg.workers < 1) throw InvalidConfig("workers", "must be >= 1");
    if (cfg.forest_trees < 1) throw InvalidConfig("forest_trees", "must be >= 1");
    if (cfg.cart_min_leaf < 1) throw InvalidConfig("cart_min_leaf", "must be >= 1");
    if (cfg.gemm_restarts < 1 || cfg.gemm_iterations < 1)
        throw InvalidConfig("gemm", "restarts and iterations must be >= 1");
    if (cfg.bootstrap_resamples < 1)
        throw InvalidConfig("bootstrap_resamples", "must be >= 1");
    if (!(cfg.mode_resolution > 0.0)) throw InvalidConfig("mode_resolution", "must be > 0");
    if (cfg.modality_strategy != ImputeStrategy::ClusterCrossStream &&
        cfg.modality_strategy != ImputeStrategy::Mean)
        throw InvalidConfig("modality_strategy", "must be cluster_cross_stream or mean");
    for (auto& [m, s] : cfg.imputation_policy)
        if (s == ImputeStrategy::ClusterCrossStream)
            throw InvalidConfig("imputation_policy",
                                "cluster_cross_stream applies to whole modalities only");

    for (ConstructId id : kAllConstructs) {
        auto it = cfg.construct_ranges.find(id);
        if (it == cfg.construct_ranges.end()) {
            cfg.construct_ranges[id] = default_range(id);
        } else if (!(it->second.lo < it->second.hi)) {
            throw InvalidConfig("construct_ranges." + std::string(construct_name(id)),
                                "lo must be < hi");
        }
    }
    if (cfg.targets.empty()) cfg.targets.assign(kAllConstructs.begin(), kAllConstructs.end());
    std::sort(cfg.targets.begin(), cfg.targets.end());
    cfg.targets.erase(std::unique(cfg.targets.begin(), cfg.targets.end()), cfg.targets.end());

    auto rules = default_plausibility_rules();
    for (auto& [k, v] : cfg.plausibility_rules) {
        if (!(v.lo <= v.hi)) throw InvalidConfig("plausibility_rules." + k, "lo must be <= hi");
        rules[k] = v;
    }
    cfg.plausibility_rules = std::move(rules);
    return ValidatedConfig(std::move(cfg));
}

/// Bounds a prediction to the construct's prescribed range. Idempotent.
inline double clamp_to_range(const Construct& construct, double value) {
    if (!std::isfinite(value))
        throw NonFiniteValue("non-finite prediction for " + std::string(construct.name()));
    return std::min(construct.range.hi, std::max(construct.range.lo, value));
}

// ---------------------------------------------------------------------------
// Seeds and hashing
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stream seed for a job identified by an ordered tuple of integers. The
/// result depends only on the inputs, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(base);
    for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace jointpred
