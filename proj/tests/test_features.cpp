#include <catch_amalgamated.hpp>

#include "jointpred/features.hpp"

using namespace jointpred;
using namespace jointpred::features;
using Catch::Approx;

namespace {

std::optional<double> get(const FeatureRecord& rec, const std::string& name) {
    for (const auto& [n, v] : rec)
        if (n == name) return v;
    FAIL("feature not found: " << name);
    return std::nullopt;
}

}  // namespace

TEST_CASE("epoch boundaries are half-open") {
    auto day = make_timestamp(2021, 3, 1);
    CHECK(sub_epoch_of(day) == Epoch::EarlyMorning);
    CHECK(sub_epoch_of(day + 9 * 3600 - 1) == Epoch::EarlyMorning);
    CHECK(sub_epoch_of(day + 9 * 3600) == Epoch::Day);
    CHECK(sub_epoch_of(day + 18 * 3600 - 1) == Epoch::Day);
    CHECK(sub_epoch_of(day + 18 * 3600) == Epoch::Evening);
    // A local offset moves the boundary.
    CHECK(sub_epoch_of(day + 8 * 3600, 60) == Epoch::Day);
}

TEST_CASE("epoch partition covers every point once") {
    std::vector<Point> pts;
    auto day = make_timestamp(2021, 3, 1);
    for (int h = 0; h < 48; ++h) pts.push_back({day + h * 1800, double(h)});
    auto ts = TimeSeries::from_points("p", "hr", pts);
    auto parts = epoch_partition(ts);
    CHECK(parts[Epoch::Epoch0].size() == 48);
    CHECK(parts[Epoch::EarlyMorning].size() + parts[Epoch::Day].size() + parts[Epoch::Evening].size() == 48);
    CHECK(parts[Epoch::EarlyMorning].size() == 18);
    CHECK(parts[Epoch::Day].size() == 18);
}

TEST_CASE("summary statistics") {
    std::vector<double> v{1, 2, 2, 3, 10};
    CHECK(*compute_stat(v, SummaryStat::Mean) == Approx(3.6));
    CHECK(*compute_stat(v, SummaryStat::Median) == 2);
    CHECK(*compute_stat(v, SummaryStat::Mode) == 2);
    CHECK(*compute_stat(v, SummaryStat::Min) == 1);
    CHECK(*compute_stat(v, SummaryStat::Max) == 10);
    CHECK(*compute_stat(v, SummaryStat::Std) == Approx(std::sqrt(13.3)));
    CHECK_FALSE(compute_stat(std::vector<double>{}, SummaryStat::Mean).has_value());
    CHECK(mode_of(std::vector<double>{1, 1, 3, 3}) == 1);
    CHECK(mode_of(std::vector<double>{1.4, 1.6, 2.6}, 0.5) == 1.5);
}

TEST_CASE("participant summaries average per-day values") {
    auto d0 = make_timestamp(2021, 3, 1), d1 = make_timestamp(2021, 3, 2);
    auto ts = TimeSeries::from_points("p", "hr",
                                      {{d0 + 10 * 3600, 60}, {d0 + 11 * 3600, 80}, {d1 + 10 * 3600, 100}, {d1 + 20 * 3600, 50}});
    std::array<Epoch, 2> epochs{Epoch::Epoch0, Epoch::Evening};
    std::array<SummaryStat, 2> stats{SummaryStat::Mean, SummaryStat::Max};
    auto rec = summarize_participant(ts, epochs, stats);
    CHECK(*get(rec, "hr.epoch0.mean") == Approx((70.0 + 75.0) / 2));
    CHECK(*get(rec, "hr.epoch0.max") == Approx((80.0 + 100.0) / 2));
    CHECK(*get(rec, "hr.evening.mean") == Approx(50.0));

    auto single = summarize(ts, Epoch::EarlyMorning, stats, local_day(d0));
    CHECK_FALSE(single[0].second.has_value());
}

TEST_CASE("beacon day features") {
    auto d = make_timestamp(2021, 3, 1, 9);
    std::vector<Point> office;
    // 9:00 to 10:00 every 5 minutes at the desk, then a 20 minute gap, then 2 more sightings.
    for (int m = 0; m <= 60; m += 5) office.push_back({d + m * 60, -60.0});
    office.push_back({d + 80 * 60, -80.0});
    office.push_back({d + 85 * 60, -80.0});
    std::map<std::string, TimeSeries> s{{"office", TimeSeries::from_points("p", "office", office)}};
    auto days = beacon_features(s, -70.0);
    REQUIRE(days.size() == 1);
    const auto& f = days[0].features;
    CHECK(*get(f, "beacon.time_at_work") == Approx(85));
    CHECK(*get(f, "beacon.pct_time_at_desk") == Approx(60.0 / 85.0));
    CHECK(*get(f, "beacon.breaks_gt_5min") == 1);
    CHECK(*get(f, "beacon.breaks_gt_15min") == 1);
    CHECK(*get(f, "beacon.breaks_gt_30min") == 0);
    CHECK(beacon_features({}, -70.0).empty());
}

TEST_CASE("regularity features of a perfectly periodic signal") {
    std::vector<Point> pts;
    auto d = make_timestamp(2021, 3, 1);
    for (int day = 0; day < 4; ++day)
        for (int h : {8, 12, 18}) pts.push_back({d + day * 86400 + h * 3600, double(h)});
    auto rec = regularity_features(TimeSeries::from_points("p", "unlocks", pts));
    REQUIRE(rec.size() == 26);
    double sum = 0.0;
    for (int h = 0; h < 24; ++h) sum += *rec[static_cast<std::size_t>(h)].second;
    CHECK(sum == Approx(1.0));
    CHECK(*get(rec, "reg.unlocks.hist_h12") == Approx(12.0 / 38.0));
    CHECK(*get(rec, "reg.unlocks.autocorr24") == Approx(1.0));
    CHECK(*get(rec, "reg.unlocks.daycos") == Approx(1.0));
    CHECK_THROWS_AS(regularity_features(TimeSeries::from_points("p", "x", {{d, 1.0}})), InsufficientData);
}
