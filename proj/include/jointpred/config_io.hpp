#pragma once

// Config file format: a JSON object with one nested section per module.
//
//   { "seed": 7,
//     "core":     { "folds": 5, "targets": ["IRB"], "construct_ranges": {"IRB": [1, 7]},
//                   "classification_constructs": [], "smape_definition": "bounded-0-200",
//                   "workers": 1 },
//     "ingest":   { "plausibility_rules": {"sleep_minutes": {"lo": 0, "hi": 1440, "reason": "..."}},
//                   "timezone_offset_minutes": {"p001": -300} },
//     "features": { "desk_rssi_cutoff": -70, "mode_resolution": 1, "regularity_signals": [...] },
//     "hon":      { "orders": [1,2,3,4,5], "pca_components": 5, "slot_minutes": 30, "bins": 3 },
//     "reduce":   { "top_k_per_modality": 20, "social_pca_components": 200,
//                   "selection_method": "spearman", "availability_threshold": 0.8,
//                   "proxy_selection_alpha": 0.01 },
//     "impute":   { "policy": {"Wearable": "mean"}, "feature_overrides": {},
//                   "modality_strategy": "cluster_cross_stream", "donor": "Wearable",
//                   "kmeans_clusters": 5 },
//     "models":   { "forest_trees": 100, "cart_min_leaf": 5, "candidates": ["ridge", "cart"] },
//     "ensemble": { "holdout_fraction": 0.2, "fusion_mode": "feature", "proxy_pass": true },
//     "eval":     { "gemm_restarts": 20, "gemm_iterations": 200, "bootstrap_resamples": 2000 } }
//
// Unknown keys are rejected so typos surface as InvalidConfig.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "jointpred/core.hpp"

namespace jointpred {

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& section,
                       std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw InvalidConfig(section, "must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (auto a : allowed) ok = ok || it.key() == a;
        if (!ok) throw InvalidConfig(section.empty() ? it.key() : section + "." + it.key(),
                                     "unknown key");
    }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidConfig(section + "." + key, e.what());
    }
}

inline ModalityKind modality_or_throw(const std::string& s, const std::string& field) {
    auto m = parse_modality(s);
    if (!m) throw InvalidConfig(field, "unknown modality '" + s + "'");
    return *m;
}

inline ImputeStrategy strategy_or_throw(const std::string& s, const std::string& field) {
    auto v = parse_strategy(s);
    if (!v) throw InvalidConfig(field, "unknown strategy '" + s + "'");
    return *v;
}

inline ConstructId construct_or_throw(const std::string& s, const std::string& field) {
    auto v = parse_construct(s);
    if (!v) throw InvalidConfig(field, "unknown construct '" + s + "'");
    return *v;
}

}  // namespace config_detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    using namespace config_detail;
    PipelineConfig cfg;
    check_keys(j, "", {"seed", "core", "ingest", "features", "hon", "reduce", "impute", "models",
                       "ensemble", "eval"});
    read(j, "seed", cfg.seed, "");

    if (j.contains("core")) {
        const auto& s = j.at("core");
        check_keys(s, "core", {"seed", "folds", "targets", "construct_ranges",
                               "classification_constructs", "smape_definition", "workers"});
        read(s, "seed", cfg.seed, "core");
        read(s, "folds", cfg.folds, "core");
        read(s, "smape_definition", cfg.smape_definition, "core");
        read(s, "workers", cfg.workers, "core");
        if (s.contains("targets"))
            for (const auto& t : s.at("targets"))
                cfg.targets.push_back(construct_or_throw(t.get<std::string>(), "core.targets"));
        if (s.contains("classification_constructs"))
            for (const auto& t : s.at("classification_constructs"))
                cfg.classification_constructs.insert(
                    construct_or_throw(t.get<std::string>(), "core.classification_constructs"));
        if (s.contains("construct_ranges")) {
            for (auto it = s.at("construct_ranges").begin(); it != s.at("construct_ranges").end();
                 ++it) {
                auto id = construct_or_throw(it.key(), "core.construct_ranges");
                const auto& v = it.value();
                if (!v.is_array() || v.size() != 2)
                    throw InvalidConfig("core.construct_ranges." + it.key(), "expected [lo, hi]");
                cfg.construct_ranges[id] = Range{v[0].get<double>(), v[1].get<double>()};
            }
        }
    }
    if (j.contains("ingest")) {
        const auto& s = j.at("ingest");
        check_keys(s, "ingest", {"plausibility_rules", "timezone_offset_minutes"});
        read(s, "timezone_offset_minutes", cfg.timezone_offset_minutes, "ingest");
        if (s.contains("plausibility_rules")) {
            for (auto it = s.at("plausibility_rules").begin();
                 it != s.at("plausibility_rules").end(); ++it) {
                PlausibilityRule r;
                const auto& v = it.value();
                check_keys(v, "ingest.plausibility_rules." + it.key(), {"lo", "hi", "reason"});
                if (v.contains("lo") && !v.at("lo").is_null()) r.lo = v.at("lo").get<double>();
                if (v.contains("hi") && !v.at("hi").is_null()) r.hi = v.at("hi").get<double>();
                r.reason = v.value("reason", std::string("outside plausible range"));
                cfg.plausibility_rules[it.key()] = r;
            }
        }
    }
    if (j.contains("features")) {
        const auto& s = j.at("features");
        check_keys(s, "features", {"desk_rssi_cutoff", "mode_resolution", "regularity_signals"});
        read(s, "desk_rssi_cutoff", cfg.desk_rssi_cutoff, "features");
        read(s, "mode_resolution", cfg.mode_resolution, "features");
        read(s, "regularity_signals", cfg.regularity_signals, "features");
    }
    if (j.contains("hon")) {
        const auto& s = j.at("hon");
        check_keys(s, "hon", {"orders", "pca_components", "slot_minutes", "bins"});
        read(s, "orders", cfg.hon_orders, "hon");
        read(s, "pca_components", cfg.hon_pca_components, "hon");
        read(s, "slot_minutes", cfg.slot_minutes, "hon");
        read(s, "bins", cfg.hon_bins, "hon");
    }
    if (j.contains("reduce")) {
        const auto& s = j.at("reduce");
        check_keys(s, "reduce", {"top_k_per_modality", "social_pca_components", "selection_method",
                                 "availability_threshold", "proxy_selection_alpha"});
        read(s, "top_k_per_modality", cfg.top_k_per_modality, "reduce");
        read(s, "social_pca_components", cfg.social_pca_components, "reduce");
        read(s, "availability_threshold", cfg.availability_threshold, "reduce");
        read(s, "proxy_selection_alpha", cfg.proxy_selection_alpha, "reduce");
        if (s.contains("selection_method")) {
            auto m = s.at("selection_method").get<std::string>();
            if (m == "pearson") cfg.selection_method = CorrelationMethod::Pearson;
            else if (m == "spearman") cfg.selection_method = CorrelationMethod::Spearman;
            else throw InvalidConfig("reduce.selection_method", "expected pearson|spearman");
        }
    }
    if (j.contains("impute")) {
        const auto& s = j.at("impute");
        check_keys(s, "impute", {"policy", "feature_overrides", "modality_strategy", "donor",
                                 "kmeans_clusters"});
        if (s.contains("policy"))
            for (auto it = s.at("policy").begin(); it != s.at("policy").end(); ++it)
                cfg.imputation_policy[modality_or_throw(it.key(), "impute.policy")] =
                    strategy_or_throw(it.value().get<std::string>(), "impute.policy." + it.key());
        if (s.contains("feature_overrides"))
            for (auto it = s.at("feature_overrides").begin(); it != s.at("feature_overrides").end();
                 ++it)
                cfg.feature_overrides[it.key()] = strategy_or_throw(
                    it.value().get<std::string>(), "impute.feature_overrides." + it.key());
        if (s.contains("modality_strategy"))
            cfg.modality_strategy = strategy_or_throw(s.at("modality_strategy").get<std::string>(),
                                                      "impute.modality_strategy");
        if (s.contains("donor"))
            cfg.donor_modality = modality_or_throw(s.at("donor").get<std::string>(), "impute.donor");
        read(s, "kmeans_clusters", cfg.kmeans_clusters, "impute");
    }
    if (j.contains("models")) {
        const auto& s = j.at("models");
        check_keys(s, "models", {"forest_trees", "cart_min_leaf", "candidates"});
        read(s, "candidates", cfg.candidate_families, "models");
        read(s, "forest_trees", cfg.forest_trees, "models");
        read(s, "cart_min_leaf", cfg.cart_min_leaf, "models");
    }
    if (j.contains("ensemble")) {
        const auto& s = j.at("ensemble");
        check_keys(s, "ensemble", {"holdout_fraction", "fusion_mode", "proxy_pass"});
        read(s, "holdout_fraction", cfg.holdout_fraction, "ensemble");
        read(s, "proxy_pass", cfg.proxy_pass, "ensemble");
        if (s.contains("fusion_mode")) {
            auto m = s.at("fusion_mode").get<std::string>();
            if (m == "feature") cfg.fusion_mode = FusionMode::Feature;
            else if (m == "per_modality_mean") cfg.fusion_mode = FusionMode::PerModalityMean;
            else throw InvalidConfig("ensemble.fusion_mode", "expected feature|per_modality_mean");
        }
    }
    if (j.contains("eval")) {
        const auto& s = j.at("eval");
        check_keys(s, "eval", {"gemm_restarts", "gemm_iterations", "bootstrap_resamples"});
        read(s, "gemm_restarts", cfg.gemm_restarts, "eval");
        read(s, "gemm_iterations", cfg.gemm_iterations, "eval");
        read(s, "bootstrap_resamples", cfg.bootstrap_resamples, "eval");
    }
    return cfg;
}

inline PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig("<file>", std::string("malformed config ") + path + ": " + e.what());
    }
    return config_from_json(j);
}

/// Canonical form of a validated config; its hash identifies a run.
inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    using nlohmann::json;
    json j;
    j["seed"] = cfg.seed;
    json ranges = json::object();
    for (auto& [id, r] : cfg.construct_ranges) ranges[std::string(construct_name(id))] = {r.lo, r.hi};
    json targets = json::array();
    for (auto id : cfg.targets) targets.push_back(std::string(construct_name(id)));
    json cls = json::array();
    for (auto id : cfg.classification_constructs) cls.push_back(std::string(construct_name(id)));
    j["core"] = {{"folds", cfg.folds},
                 {"targets", targets},
                 {"construct_ranges", ranges},
                 {"classification_constructs", cls},
                 {"smape_definition", cfg.smape_definition},
                 {"workers", cfg.workers}};
    json rules = json::object();
    for (auto& [k, r] : cfg.plausibility_rules) {
        json rj;
        rj["lo"] = std::isfinite(r.lo) ? json(r.lo) : json(nullptr);
        rj["hi"] = std::isfinite(r.hi) ? json(r.hi) : json(nullptr);
        rj["reason"] = r.reason;
        rules[k] = rj;
    }
    j["ingest"] = {{"plausibility_rules", rules},
                   {"timezone_offset_minutes", cfg.timezone_offset_minutes}};
    j["features"] = {{"desk_rssi_cutoff", cfg.desk_rssi_cutoff},
                     {"mode_resolution", cfg.mode_resolution},
                     {"regularity_signals", cfg.regularity_signals}};
    j["hon"] = {{"orders", cfg.hon_orders},
                {"pca_components", cfg.hon_pca_components},
                {"slot_minutes", cfg.slot_minutes},
                {"bins", cfg.hon_bins}};
    j["reduce"] = {{"top_k_per_modality", cfg.top_k_per_modality},
                   {"social_pca_components", cfg.social_pca_components},
                   {"selection_method",
                    cfg.selection_method == CorrelationMethod::Pearson ? "pearson" : "spearman"},
                   {"availability_threshold", cfg.availability_threshold},
                   {"proxy_selection_alpha", cfg.proxy_selection_alpha}};
    json policy = json::object();
    for (auto& [m, s] : cfg.imputation_policy)
        policy[std::string(modality_name(m))] = std::string(strategy_name(s));
    json overrides = json::object();
    for (auto& [f, s] : cfg.feature_overrides) overrides[f] = std::string(strategy_name(s));
    j["impute"] = {{"policy", policy},
                   {"feature_overrides", overrides},
                   {"modality_strategy", std::string(strategy_name(cfg.modality_strategy))},
                   {"donor", std::string(modality_name(cfg.donor_modality))},
                   {"kmeans_clusters", cfg.kmeans_clusters}};
    j["models"] = {{"forest_trees", cfg.forest_trees},
                   {"cart_min_leaf", cfg.cart_min_leaf},
                   {"candidates", cfg.candidate_families}};
    j["ensemble"] = {{"holdout_fraction", cfg.holdout_fraction},
                     {"fusion_mode", std::string(fusion_mode_name(cfg.fusion_mode))},
                     {"proxy_pass", cfg.proxy_pass}};
    j["eval"] = {{"gemm_restarts", cfg.gemm_restarts},
                 {"gemm_iterations", cfg.gemm_iterations},
                 {"bootstrap_resamples", cfg.bootstrap_resamples}};
    return j;
}

/// Hash of the canonical config, excluding the worker count (outputs do not
/// depend on it).
inline std::uint64_t config_hash(const PipelineConfig& cfg) {
    auto j = config_to_json(cfg);
    j["core"].erase("workers");
    return fnv1a64(j.dump());
}

}  // namespace jointpred
