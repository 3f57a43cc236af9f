#include <catch_amalgamated.hpp>

#include "jointpred/persist.hpp"
#include "jointpred/report.hpp"
#include "support.hpp"

using namespace jointpred;

namespace {

struct Fixture {
    pipeline::Universe u;
    ValidatedConfig cfg = validate_config({});
    ensemble::RunResult run;
    std::filesystem::path dir;
};

const Fixture& fixture() {
    static const Fixture fx = [] {
        Fixture f;
        auto g = synth::generate(testing::small_spec(41, 80));
        f.cfg = validate_config(testing::fast_config(41));
        f.u = pipeline::build_universe(g.raw, f.cfg);
        f.run = ensemble::run_joint_model(f.u, f.cfg);
        f.dir = testing::scratch("persist");
        auto ev = report::evaluate(f.u, f.run, f.cfg);
        report::write_reports(f.dir.string(), f.u, f.run, ev, f.cfg);
        return f;
    }();
    return fx;
}

}  // namespace

TEST_CASE("saved models replay the validation predictions") {
    const auto& fx = fixture();
    auto bundle = persist::load_models(fx.dir / "models");
    auto cfg = validate_config(bundle.config);
    CHECK(config_hash(*cfg) == config_hash(*fx.cfg));
    auto preds = persist::predict_all(bundle.constructs, bundle.preparation, fx.u, fx.run.split.validation, cfg);
    for (const auto& [id, run] : fx.run.runs) {
        INFO(construct_name(id));
        const auto& p = preds.at(id);
        REQUIRE(p.size() == run.validation.size());
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - run.validation[i]) <= 1e-12);
    }
}

TEST_CASE("preparation and recipes serialize exactly") {
    const auto& fx = fixture();
    auto j = persist::to_json(fx.run.final_prep);
    auto back = persist::preparation_from(nlohmann::json::parse(j.dump()));
    CHECK(persist::to_json(back) == j);
    for (const auto& [id, run] : fx.run.runs) {
        auto r = persist::recipe_from(persist::to_json(run.final_recipe));
        CHECK(r == run.final_recipe);
    }
}

TEST_CASE("unsupported bundle versions are rejected") {
    const auto& fx = fixture();
    auto dir = testing::scratch("persist_version");
    std::filesystem::copy(fx.dir / "models", dir / "models");
    auto j = persist::read_json(dir / "models" / "bundle.json");
    j["version"] = 99;
    persist::write_json(j, dir / "models" / "bundle.json");
    CHECK_THROWS_AS(persist::load_models(dir / "models"), VersionMismatch);
    CHECK_THROWS_AS(persist::load_models(dir / "nowhere"), IoError);

    auto c = persist::read_json(fx.dir / "models" / "Sleep.json");
    c["format"] = "something-else";
    CHECK_THROWS_AS(persist::construct_run_from(c), VersionMismatch);
}

TEST_CASE("report files are written") {
    const auto& fx = fixture();
    for (const char* name : {"metrics.csv", "reliability.csv", "discriminant.csv", "delta_tau.csv", "summary.txt",
                             "manifest.txt", "predictions_oof.csv", "predictions_validation.csv", "candidates.csv",
                             "masks.csv", "proxy_selection.csv", "pca_loadings.csv", "imputation_audit.csv",
                             "rejects.csv", "config.json"})
        CHECK(std::filesystem::exists(fx.dir / name));
    auto metrics = csv::read_file((fx.dir / "metrics.csv").string());
    CHECK(metrics.header == std::vector<std::string>{"construct", "fold", "smape", "tau", "gemm_tau", "baseline_smape"});
    auto disc = csv::read_file((fx.dir / "discriminant.csv").string());
    CHECK(disc.rows.size() == kConstructCount * (kConstructCount - 1));
    auto oof = csv::read_file((fx.dir / "predictions_oof.csv").string());
    CHECK(oof.rows.size() == fx.run.split.train.size());
    auto manifest = testing::slurp(fx.dir / "manifest.txt");
    CHECK_THAT(manifest, Catch::Matchers::ContainsSubstring("seed"));
    CHECK_THAT(manifest, Catch::Matchers::ContainsSubstring("config_hash"));
}
