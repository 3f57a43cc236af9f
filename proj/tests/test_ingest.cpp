#include <catch_amalgamated.hpp>

#include "jointpred/cohort.hpp"
#include "jointpred/ingest.hpp"
#include "support.hpp"

using namespace jointpred;

TEST_CASE("series table parses into sorted per-signal series") {
    auto t = csv::parse(
        "participant_id,timestamp,heart_rate,steps\n"
        "p1,2020-01-01T10:00:00,70,\n"
        "p1,2020-01-01T09:00:00,65,100\n"
        "p2,2020-01-01T09:00:00,,\n");
    auto set = ingest::parse_series_table(t);
    REQUIRE(set.signals == std::vector<std::string>{"heart_rate", "steps"});
    const auto* hr = set.find("p1", "heart_rate");
    REQUIRE(hr);
    REQUIRE(hr->size() == 2);
    CHECK(hr->points()[0].value == 65);
    CHECK(hr->points()[0].t < hr->points()[1].t);
    CHECK(set.find("p1", "steps")->size() == 1);
    CHECK(set.by_participant.count("p2") == 1);
    CHECK(set.point_count() == 3);
}

TEST_CASE("series table rejects duplicates and bad schemas") {
    CHECK_THROWS_AS(ingest::parse_series_table(csv::parse("participant_id,timestamp,x\np1,2020-01-01T00:00:00,1\n"
                                                          "p1,2020-01-01T00:00:00,2\n")),
                    DuplicateTimestamp);
    CHECK_THROWS_AS(ingest::parse_series_table(csv::parse("pid,timestamp,x\np1,2020-01-01T00:00:00,1\n")), SchemaError);
    CHECK_THROWS_AS(ingest::parse_series_table(csv::parse("participant_id,when,x\np1,2020-01-01T00:00:00,1\n")),
                    SchemaError);
    CHECK_THROWS_AS(ingest::parse_series_table(csv::parse("participant_id,timestamp,x\np1,yesterday,1\n")),
                    ParseError);
    CHECK_THROWS_AS(ingest::parse_series_table(csv::parse("participant_id,timestamp,x\np1,2020-01-01T00:00:00,abc\n")),
                    ParseError);
}

TEST_CASE("ground truth requires every construct column") {
    std::string header = "participant_id";
    for (auto id : kAllConstructs) header += "," + std::string(construct_name(id));
    std::string row = "p1";
    for (std::size_t i = 0; i < kConstructCount; ++i) row += ",";
    auto g = ingest::parse_ground_truth(csv::parse(header + "\n" + row + "\n"));
    CHECK(g.size() == 1);
    CHECK_FALSE(g.value(0, ConstructId::Sleep).has_value());

    auto without_sleep = header.substr(0, header.rfind(','));
    auto short_row = row.substr(0, row.size() - 1);
    CHECK_THROWS_AS(ingest::parse_ground_truth(csv::parse(without_sleep + "\n" + short_row + "\n")), SchemaError);

    auto cfg = validate_config({});
    std::string bad = "p1";
    for (auto id : kAllConstructs) bad += id == ConstructId::IRB ? ",9" : ",";
    CHECK_THROWS_AS(ingest::parse_ground_truth(csv::parse(header + "\n" + bad + "\n"), &cfg->construct_ranges),
                    ParseError);
}

TEST_CASE("outlier screening moves implausible samples to rejects") {
    auto ts = TimeSeries::from_points("p1", "heart_rate", {{0, 60}, {60, 300}, {120, 10}, {180, 80}});
    auto s = ingest::screen_outliers(ts, validate_config({})->plausibility_rules);
    CHECK(s.clean.size() == 2);
    REQUIRE(s.rejects.size() == 2);
    CHECK(s.rejects[0].value == 300);
    CHECK(s.rejects[1].reason == "heart rate outside [25,250]");

    FeatureMatrix m(ModalityKind::Wearable, {"a", "b"}, {"sleep_minutes.epoch0.mean", "other"});
    m.set(0, 0, 2000.0);
    m.set(1, 0, 400.0);
    m.set(0, 1, -5.0);
    auto sm = ingest::screen_outliers(m, validate_config({})->plausibility_rules);
    CHECK_FALSE(sm.clean.at(0, 0).has_value());
    CHECK(sm.clean.at(1, 0) == 400.0);
    CHECK(sm.clean.at(0, 1) == -5.0);
    CHECK(sm.rejects.size() == 1);
}

TEST_CASE("cohort write and load round trip") {
    auto dir = testing::scratch("ingest_roundtrip");
    auto g = synth::generate(testing::small_spec(3, 20));
    ingest::write_cohort(g.raw, dir.string());
    auto back = ingest::load_cohort(dir.string());
    CHECK(back.participants() == g.raw.participants());
    REQUIRE(back.wearable);
    CHECK(back.wearable->point_count() == g.raw.wearable->point_count());
    for (std::size_t r = 0; r < back.truth.size(); ++r)
        for (auto id : kAllConstructs) {
            auto a = back.truth.value(r, id), b = g.raw.truth.value(r, id);
            REQUIRE(a.has_value() == b.has_value());
            if (a) CHECK(*a == *b);
        }
}

TEST_CASE("missing ground truth is an error naming the path") {
    auto dir = testing::scratch("ingest_no_truth");
    auto g = synth::generate(testing::small_spec(4, 12));
    ingest::write_cohort(g.raw, dir.string());
    std::filesystem::remove(dir / "ground_truth.csv");
    try {
        ingest::load_cohort(dir.string());
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring((dir / "ground_truth.csv").string()));
    }
    auto pred = ingest::load_cohort_for_prediction(dir.string());
    CHECK(pred.participants().size() == 12);
}

TEST_CASE("absent modality files warn and load as absent") {
    auto dir = testing::scratch("ingest_absent");
    auto g = synth::generate(testing::small_spec(5, 12));
    ingest::write_cohort(g.raw, dir.string());
    std::filesystem::remove(dir / "beacon.csv");
    std::vector<std::string> warnings;
    diag::set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
    auto c = ingest::load_cohort(dir.string());
    diag::set_warning_sink(nullptr);
    CHECK_FALSE(c.beacon.has_value());
    REQUIRE_FALSE(warnings.empty());
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("beacon.csv"));
}
