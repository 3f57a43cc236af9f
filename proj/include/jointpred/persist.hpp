#pragma once

// JSON form of everything `predict` needs: the fitted preparation and the
// final model of each construct.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "jointpred/config_io.hpp"
#include "jointpred/ensemble.hpp"

namespace jointpred::persist {

using nlohmann::json;

inline constexpr int kBundleVersion = 1;

namespace detail {

using models::detail::matrix_from;
using models::detail::to_json;
using models::detail::vector_from;

inline ModalityKind modality_from(const json& j) {
    auto m = parse_modality(j.get<std::string>());
    if (!m) throw VersionMismatch("unknown modality " + j.get<std::string>());
    return *m;
}

inline json mask_json(const reduce::SelectionMask& m) {
    json out = json::array();
    for (const auto& f : m.features) out.push_back({{"name", f.name}, {"score", f.score}});
    return out;
}

inline reduce::SelectionMask mask_from(const json& j) {
    reduce::SelectionMask m;
    for (const auto& f : j) m.features.push_back({f.at("name").get<std::string>(), f.at("score").get<double>()});
    return m;
}

inline json pca_json(const reduce::PcaModel& p) {
    return {{"columns", p.columns},
            {"mean", to_json(p.mean)},
            {"components", to_json(p.components)},
            {"explained_variance", p.explained_variance},
            {"explained_variance_ratio", p.explained_variance_ratio},
            {"rank", p.rank}};
}

inline reduce::PcaModel pca_from(const json& j) {
    reduce::PcaModel p;
    p.columns = j.at("columns").get<std::vector<std::string>>();
    p.mean = vector_from(j.at("mean"));
    p.components = matrix_from(j.at("components"));
    p.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    p.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    p.rank = j.at("rank").get<std::size_t>();
    return p;
}

}  // namespace detail

inline json to_json(const impute::BlockImputer& b) {
    return {{"modality", std::string(modality_name(b.modality))},
            {"input_columns", b.input_columns},
            {"columns", b.columns},
            {"source", b.source},
            {"fill", b.fill},
            {"strategy", b.strategy},
            {"dropped", b.dropped}};
}

inline impute::BlockImputer block_imputer_from(const json& j) {
    impute::BlockImputer b;
    b.modality = detail::modality_from(j.at("modality"));
    b.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    b.columns = j.at("columns").get<std::vector<std::string>>();
    b.source = j.at("source").get<std::vector<std::size_t>>();
    b.fill = j.at("fill").get<std::vector<double>>();
    b.strategy = j.at("strategy").get<std::vector<std::string>>();
    b.dropped = j.at("dropped").get<std::vector<std::string>>();
    return b;
}

inline json to_json(const pipeline::Preparation& p) {
    json order = json::array(), hon = json::object(), blocks = json::array(), mods = json::array();
    for (auto m : p.order) order.push_back(std::string(modality_name(m)));
    for (const auto& [m, h] : p.hon) {
        json e = {{"keys", h.embedding.keys}, {"retained", h.embedding.retained}, {"components", h.embedding.components}};
        if (h.embedding.pca) e["pca"] = detail::pca_json(*h.embedding.pca);
        hon[std::string(modality_name(m))] = {{"edges", h.bins.edges}, {"alphabet", h.layout.alphabet},
                                              {"orders", h.layout.orders}, {"embedding", e}};
    }
    for (auto m : p.imputation.modalities) mods.push_back(std::string(modality_name(m)));
    for (const auto& b : p.imputation.blocks) blocks.push_back(to_json(b));
    json imp = {{"modalities", mods}, {"blocks", blocks}};
    if (p.imputation.cross) {
        const auto& c = *p.imputation.cross;
        imp["cross"] = {{"columns", c.columns}, {"center", c.center},  {"scale", c.scale},
                        {"centroids", c.centroids}, {"global_mean", c.global_mean}, {"donor", c.donor}};
    }
    json out = {{"train_rows", p.train_rows}, {"order", order}, {"hon", hon}, {"imputation", imp}};
    if (p.social_pca) out["social_pca"] = detail::pca_json(*p.social_pca);
    return out;
}

inline pipeline::Preparation preparation_from(const json& j) {
    pipeline::Preparation p;
    p.train_rows = j.at("train_rows").get<std::vector<std::size_t>>();
    for (const auto& m : j.at("order")) p.order.push_back(detail::modality_from(m));
    for (auto it = j.at("hon").begin(); it != j.at("hon").end(); ++it) {
        pipeline::HonFit h;
        const auto& v = it.value();
        h.bins.edges = v.at("edges").get<std::vector<double>>();
        h.layout = hon::dense_layout(v.at("alphabet").get<int>(), v.at("orders").get<std::vector<int>>());
        const auto& e = v.at("embedding");
        h.embedding.keys = e.at("keys").get<std::vector<std::string>>();
        h.embedding.retained = e.at("retained").get<std::vector<std::size_t>>();
        h.embedding.components = e.at("components").get<std::size_t>();
        if (e.contains("pca")) h.embedding.pca = detail::pca_from(e.at("pca"));
        p.hon.emplace(detail::modality_from(json(it.key())), std::move(h));
    }
    const auto& imp = j.at("imputation");
    for (const auto& m : imp.at("modalities")) p.imputation.modalities.push_back(detail::modality_from(m));
    for (const auto& b : imp.at("blocks")) p.imputation.blocks.push_back(block_imputer_from(b));
    if (imp.contains("cross")) {
        const auto& c = imp.at("cross");
        impute::CrossStreamModel m;
        c.at("columns").get_to(m.columns);
        c.at("center").get_to(m.center);
        c.at("scale").get_to(m.scale);
        c.at("centroids").get_to(m.centroids);
        c.at("global_mean").get_to(m.global_mean);
        c.at("donor").get_to(m.donor);
        p.imputation.cross = std::move(m);
    }
    if (j.contains("social_pca")) p.social_pca = detail::pca_from(j.at("social_pca"));
    return p;
}

inline json to_json(const ensemble::FusionRecipe& r) {
    json blocks = json::array();
    for (const auto& b : r.blocks)
        blocks.push_back({{"modality", std::string(modality_name(b.modality))}, {"features", detail::mask_json(b.mask)}});
    return {{"blocks", blocks}, {"proxy", detail::mask_json(r.proxy)}};
}

inline ensemble::FusionRecipe recipe_from(const json& j) {
    ensemble::FusionRecipe r;
    for (const auto& b : j.at("blocks"))
        r.blocks.push_back({detail::modality_from(b.at("modality")), detail::mask_from(b.at("features"))});
    r.proxy = detail::mask_from(j.at("proxy"));
    return r;
}

/// Final model of one construct.
inline json to_json(const ensemble::ConstructRun& r) {
    json comps = json::array();
    for (const auto& c : r.final_model.components) comps.push_back(models::to_json(c));
    return {{"format", "jointpred-construct-model"},
            {"version", kBundleVersion},
            {"construct", std::string(construct_name(r.id))},
            {"task", r.kind == TaskKind::Classification ? "classification" : "regression"},
            {"pass", r.pass},
            {"selected", models::spec_to_json(r.final_model.spec)},
            {"recipe", to_json(r.final_recipe)},
            {"components", comps}};
}

inline ensemble::ConstructRun construct_run_from(const json& j) {
    if (j.value("format", "") != "jointpred-construct-model") throw VersionMismatch("not a serialized construct model");
    if (j.at("version").get<int>() != kBundleVersion)
        throw VersionMismatch("construct model version " + std::to_string(j.at("version").get<int>()) + " is not supported");
    ensemble::ConstructRun r;
    r.id = construct_from_name(j.at("construct").get<std::string>());
    r.kind = j.at("task").get<std::string>() == "classification" ? TaskKind::Classification : TaskKind::Regression;
    r.pass = j.at("pass").get<int>();
    r.ok = true;
    r.final_recipe = recipe_from(j.at("recipe"));
    r.final_model.spec = models::spec_from_json(j.at("selected"));
    for (const auto& c : j.at("components")) r.final_model.components.push_back(models::component_from_json(c));
    return r;
}

// ---------------------------------------------------------------------------
// Model directory
// ---------------------------------------------------------------------------

inline void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(0, path.string(), e.what());
    }
}

struct ModelBundle {
    PipelineConfig config;
    pipeline::Preparation preparation;
    std::map<ConstructId, ensemble::ConstructRun> constructs;
};

/// models/bundle.json (config + preparation) and models/<Construct>.json.
inline void save_models(const ensemble::RunResult& r, const ValidatedConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json names = json::array();
    for (const auto& [id, run] : r.runs)
        if (run.ok) {
            write_json(to_json(run), dir / (std::string(construct_name(id)) + ".json"));
            names.push_back(std::string(construct_name(id)));
        }
    write_json({{"format", "jointpred-models"},
                {"version", kBundleVersion},
                {"config", config_to_json(cfg.get())},
                {"constructs", names},
                {"preparation", to_json(r.final_prep)}},
               dir / "bundle.json");
}

inline ModelBundle load_models(const std::filesystem::path& dir) {
    const auto path = dir / "bundle.json";
    if (!std::filesystem::exists(path)) throw IoError("model bundle not found: " + path.string());
    auto j = read_json(path);
    if (j.value("format", "") != "jointpred-models") throw VersionMismatch(path.string() + " is not a model bundle");
    if (j.at("version").get<int>() != kBundleVersion)
        throw VersionMismatch("model bundle version " + std::to_string(j.at("version").get<int>()) + " is not supported");
    ModelBundle b;
    b.config = config_from_json(j.at("config"));
    b.preparation = preparation_from(j.at("preparation"));
    for (const auto& n : j.at("constructs")) {
        auto run = construct_run_from(read_json(dir / (n.get<std::string>() + ".json")));
        b.constructs.emplace(run.id, std::move(run));
    }
    return b;
}

/// Predictions for every universe row: proxy sources first, then the
/// constructs that take proxy columns.
inline std::map<ConstructId, std::vector<double>> predict_all(const std::map<ConstructId, ensemble::ConstructRun>& runs,
                                                              const pipeline::Preparation& prep, const pipeline::Universe& u,
                                                              std::span<const std::size_t> rows, const ValidatedConfig& cfg) {
    auto prepared = pipeline::apply_preparation(prep, u, rows, cfg);
    std::map<ConstructId, std::vector<double>> out;
    std::vector<ConstructId> sources;
    std::vector<std::vector<double>> cols;
    for (auto id : kProxyConstructs)
        if (auto it = runs.find(id); it != runs.end()) {
            out[id] = ensemble::predict_construct(it->second, prepared, nullptr, cfg);
            sources.push_back(id);
            cols.push_back(out[id]);
        }
    const Block proxy = ensemble::detail::proxy_block(sources, cols);
    for (const auto& [id, run] : runs)
        if (!out.count(id)) out[id] = ensemble::predict_construct(run, prepared, run.pass == 2 ? &proxy : nullptr, cfg);
    return out;
}

}  // namespace jointpred::persist
