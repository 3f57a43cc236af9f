#include <catch_amalgamated.hpp>

#include "jointpred/cohort.hpp"
#include "jointpred/synth.hpp"
#include "support.hpp"

using namespace jointpred;

TEST_CASE("generator is deterministic in its seed") {
    auto a = synth::generate(testing::small_spec(1, 20));
    auto b = synth::generate(testing::small_spec(1, 20));
    auto c = synth::generate(testing::small_spec(2, 20));
    CHECK(a.latents == b.latents);
    CHECK(a.raw.wearable->by_participant == b.raw.wearable->by_participant);
    CHECK(a.latents != c.latents);
}

TEST_CASE("ground truth stays inside the construct ranges") {
    auto g = synth::generate(testing::small_spec(3, 60));
    auto cfg = validate_config({});
    for (std::size_t r = 0; r < g.raw.truth.size(); ++r)
        for (auto id : kAllConstructs) {
            auto v = g.raw.truth.value(r, id);
            REQUIRE(v);
            CHECK(*v >= cfg->construct_ranges.at(id).lo);
            CHECK(*v <= cfg->construct_ranges.at(id).hi);
        }
}

TEST_CASE("missingness rates are honoured") {
    auto spec = testing::small_spec(4, 200);
    spec.feature_missing_rate = 0.0;
    spec.modality_missing_rate = 0.3;
    auto g = synth::generate(spec);
    REQUIRE(g.raw.social);
    std::size_t absent = 0;
    for (std::size_t r = 0; r < g.raw.social->rows(); ++r) absent += g.raw.social->row_all_missing(r);
    double rate = double(absent) / double(g.raw.social->rows());
    CHECK(rate > 0.15);
    CHECK(rate < 0.45);
}

TEST_CASE("absent files are not written") {
    auto spec = testing::small_spec(5, 12);
    spec.absent_files = {"social"};
    auto g = synth::generate(spec);
    CHECK_FALSE(g.raw.social.has_value());
    auto dir = testing::scratch("synth_absent");
    ingest::write_cohort(g.raw, dir.string());
    CHECK_FALSE(std::filesystem::exists(dir / "social.csv"));
    CHECK(std::filesystem::exists(dir / "wearable.csv"));
}

TEST_CASE("spec validation") {
    auto spec = testing::small_spec(6, 5);
    CHECK_THROWS_AS(synth::generate(spec), InvalidConfig);
    CHECK_THROWS_AS(synth::spec_from_json(nlohmann::json{{"bogus", 1}}), InvalidConfig);
    auto j = synth::spec_from_json(nlohmann::json{{"seed", 9}, {"snr", {{"Sleep", 0}}}});
    CHECK(j.seed == 9);
    CHECK(j.snr_for(ConstructId::Sleep) == 0.0);
    CHECK(j.snr_for(ConstructId::IRB) == j.default_snr);
}

TEST_CASE("spec JSON round trip") {
    auto s = testing::small_spec(7, 30);
    s.layout = synth::LatentLayout::Independent;
    s.snr[ConstructId::Tobacco] = 0.0;
    s.modality_signal[ModalityKind::Beacon] = 0.5;
    s.absent_files = {"beacon"};
    auto j = synth::spec_to_json(s);
    CHECK(synth::spec_to_json(synth::spec_from_json(j)) == j);
}
