#include <catch_amalgamated.hpp>

#include "jointpred/config_io.hpp"
#include "jointpred/core.hpp"
#include "jointpred/csv.hpp"

using namespace jointpred;

TEST_CASE("construct registry round-trips names") {
    REQUIRE(kAllConstructs.size() == 19);
    for (auto id : kAllConstructs) {
        CHECK(construct_from_name(construct_name(id)) == id);
        auto r = default_range(id);
        CHECK(r.lo < r.hi);
    }
    CHECK_THROWS_AS(construct_from_name("Happiness"), SchemaError);
    CHECK(is_proxy_construct(ConstructId::Alcohol));
    CHECK(is_proxy_construct(ConstructId::OCB));
    CHECK_FALSE(is_proxy_construct(ConstructId::IRB));
}

TEST_CASE("validate_config fills defaults and rejects bad fields") {
    auto cfg = validate_config({});
    CHECK(cfg->targets.size() == kConstructCount);
    CHECK(cfg->construct_ranges.size() == kConstructCount);
    CHECK(cfg->plausibility_rules.count("heart_rate") == 1);

    PipelineConfig bad;
    bad.folds = 1;
    CHECK_THROWS_AS(validate_config(bad), InvalidConfig);
    bad = {};
    bad.construct_ranges[ConstructId::Sleep] = {5, 5};
    CHECK_THROWS_AS(validate_config(bad), InvalidConfig);
    bad = {};
    bad.smape_definition = "classic";
    CHECK_THROWS_AS(validate_config(bad), InvalidConfig);
    bad = {};
    bad.imputation_policy[ModalityKind::Wearable] = ImputeStrategy::ClusterCrossStream;
    CHECK_THROWS_AS(validate_config(bad), InvalidConfig);
}

TEST_CASE("clamp_to_range bounds and is idempotent") {
    auto cfg = validate_config({});
    auto c = cfg.construct(ConstructId::IRB);
    for (double v : {-3.0, 0.5, 1.0, 4.2, 7.0, 99.0}) {
        double once = clamp_to_range(c, v);
        CHECK(once >= 1.0);
        CHECK(once <= 7.0);
        CHECK(clamp_to_range(c, once) == once);
    }
    CHECK_THROWS_AS(clamp_to_range(c, std::nan("")), NonFiniteValue);
}

TEST_CASE("derive_seed is deterministic and path sensitive") {
    CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
    CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
    CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("config JSON round trip and hash") {
    PipelineConfig c;
    c.seed = 42;
    c.folds = 4;
    c.targets = {ConstructId::Sleep, ConstructId::IRB};
    c.construct_ranges[ConstructId::Sleep] = {0, 30};
    c.imputation_policy[ModalityKind::PhoneAgent] = ImputeStrategy::Median;
    auto j = config_to_json(c);
    auto back = config_from_json(j);
    CHECK(back.seed == 42);
    CHECK(back.folds == 4);
    CHECK(back.construct_ranges.at(ConstructId::Sleep) == Range{0, 30});
    CHECK(back.imputation_policy.at(ModalityKind::PhoneAgent) == ImputeStrategy::Median);
    CHECK(config_to_json(back) == j);

    auto w = c;
    w.workers = 8;
    CHECK(config_hash(w) == config_hash(c));
    w.folds = 3;
    CHECK(config_hash(w) != config_hash(c));
}

TEST_CASE("config parser rejects unknown keys and names") {
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"colour", 1}}), InvalidConfig);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"core", {{"targets", {"Nope"}}}}}), InvalidConfig);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"core", {{"construct_ranges", {{"Sleep", {1}}}}}}}),
                    InvalidConfig);
}

TEST_CASE("csv parsing handles quotes and missing cells") {
    auto t = csv::parse("a,b,c\n1,\"x,y\",\n2,\"he said \"\"hi\"\"\",3\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "x,y");
    CHECK(t.rows[1][1] == "he said \"hi\"");
    CHECK_FALSE(csv::parse_cell(t.rows[0][2], 1, "c").has_value());
    CHECK(*csv::parse_cell("2.5", 1, "c") == 2.5);
    CHECK_THROWS_AS(csv::parse_cell("abc", 1, "c"), ParseError);
}

TEST_CASE("format_number round-trips doubles") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345.678, 0.0}) CHECK(std::stod(csv::format_number(v)) == v);
}
