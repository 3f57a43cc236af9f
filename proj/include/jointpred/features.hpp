#pragma once

// Daily and within-day summary statistics, beacon-derived workplace features
// and regularity (routine) features.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "jointpred/data.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::features {

enum class Epoch { Epoch0, EarlyMorning, Day, Evening };

inline constexpr std::array<Epoch, 4> kAllEpochs = {Epoch::Epoch0, Epoch::EarlyMorning, Epoch::Day,
                                                    Epoch::Evening};

inline constexpr std::string_view epoch_name(Epoch e) {
    constexpr std::array<std::string_view, 4> names = {"epoch0", "early_morning", "day", "evening"};
    return names[static_cast<std::size_t>(e)];
}

enum class SummaryStat { Mean, Median, Mode, Min, Max, Std };

inline constexpr std::array<SummaryStat, 6> kAllStats = {SummaryStat::Mean, SummaryStat::Median,
                                                         SummaryStat::Mode, SummaryStat::Min,
                                                         SummaryStat::Max,  SummaryStat::Std};

inline constexpr std::string_view stat_name(SummaryStat s) {
    constexpr std::array<std::string_view, 6> names = {"mean", "median", "mode", "min", "max", "std"};
    return names[static_cast<std::size_t>(s)];
}

using FeatureRecord = std::vector<std::pair<std::string, std::optional<double>>>;

inline std::string feature_name(const std::string& signal, Epoch e, SummaryStat s) {
    return signal + "." + std::string(epoch_name(e)) + "." + std::string(stat_name(s));
}

/// Sub-epoch of a local clock time; intervals are half-open.
inline Epoch sub_epoch_of(Timestamp t, int tz_offset_minutes = 0) {
    auto sec = local_seconds_of_day(t, tz_offset_minutes);
    if (sec < 9 * 3600) return Epoch::EarlyMorning;
    if (sec < 18 * 3600) return Epoch::Day;
    return Epoch::Evening;
}

/// Every point goes to exactly one sub-epoch; Epoch0 holds all points.
inline std::map<Epoch, TimeSeries> epoch_partition(const TimeSeries& ts, int tz_offset_minutes = 0) {
    std::map<Epoch, TimeSeries> out;
    for (auto e : kAllEpochs) out[e] = TimeSeries(ts.participant(), ts.signal());
    for (const auto& p : ts.points()) {
        out[Epoch::Epoch0].push_back(p);
        out[sub_epoch_of(p.t, tz_offset_minutes)].push_back(p);
    }
    return out;
}

/// Most frequent value after rounding to `resolution`; ties go to the smallest.
inline double mode_of(std::span<const double> values, double resolution = 1.0) {
    if (values.empty()) throw EmptyInput("mode of empty sequence");
    std::map<long long, int> counts;
    for (double v : values) ++counts[std::llround(v / resolution)];
    long long best = counts.begin()->first;
    int best_count = 0;
    for (auto [k, c] : counts)
        if (c > best_count) {
            best = k;
            best_count = c;
        }
    return static_cast<double>(best) * resolution;
}

inline std::optional<double> compute_stat(std::span<const double> v, SummaryStat s,
                                          double mode_resolution = 1.0) {
    if (v.empty()) return std::nullopt;
    switch (s) {
        case SummaryStat::Mean: return stats::mean(v);
        case SummaryStat::Median: return stats::median({v.begin(), v.end()});
        case SummaryStat::Mode: return mode_of(v, mode_resolution);
        case SummaryStat::Min: return *std::min_element(v.begin(), v.end());
        case SummaryStat::Max: return *std::max_element(v.begin(), v.end());
        case SummaryStat::Std: return stats::stddev(v);
    }
    return std::nullopt;
}

/// Values of `ts` that fall in `epoch` on local calendar day `day`.
inline std::vector<double> slice_values(const TimeSeries& ts, Epoch epoch, std::int64_t day,
                                        int tz_offset_minutes = 0) {
    std::vector<double> v;
    for (const auto& p : ts.points()) {
        if (local_day(p.t, tz_offset_minutes) != day) continue;
        if (epoch != Epoch::Epoch0 && sub_epoch_of(p.t, tz_offset_minutes) != epoch) continue;
        v.push_back(p.value);
    }
    return v;
}

/// One feature per requested stat for (signal, epoch, day). An empty slice
/// yields missing values.
inline FeatureRecord summarize(const TimeSeries& ts, Epoch epoch, std::span<const SummaryStat> wanted,
                               std::int64_t day, int tz_offset_minutes = 0,
                               double mode_resolution = 1.0) {
    auto v = slice_values(ts, epoch, day, tz_offset_minutes);
    FeatureRecord rec;
    for (auto s : wanted) rec.emplace_back(feature_name(ts.signal(), epoch, s), compute_stat(v, s, mode_resolution));
    return rec;
}

inline std::vector<std::int64_t> local_days(const TimeSeries& ts, int tz_offset_minutes = 0) {
    std::set<std::int64_t> days;
    for (const auto& p : ts.points()) days.insert(local_day(p.t, tz_offset_minutes));
    return {days.begin(), days.end()};
}

/// Participant-level intraday summaries: each (epoch, stat) daily value is
/// averaged over the days on which it is defined.
inline FeatureRecord summarize_participant(const TimeSeries& ts, std::span<const Epoch> epochs,
                                           std::span<const SummaryStat> wanted,
                                           int tz_offset_minutes = 0, double mode_resolution = 1.0) {
    const auto days = local_days(ts, tz_offset_minutes);
    FeatureRecord rec;
    for (auto e : epochs) {
        std::vector<std::vector<double>> per_stat(wanted.size());
        for (auto d : days) {
            auto v = slice_values(ts, e, d, tz_offset_minutes);
            for (std::size_t k = 0; k < wanted.size(); ++k)
                if (auto x = compute_stat(v, wanted[k], mode_resolution)) per_stat[k].push_back(*x);
        }
        for (std::size_t k = 0; k < wanted.size(); ++k) {
            std::optional<double> agg;
            if (!per_stat[k].empty()) agg = stats::mean(per_stat[k]);
            rec.emplace_back(feature_name(ts.signal(), e, wanted[k]), agg);
        }
    }
    return rec;
}

/// Summaries across days of a once-per-day signal (already gap-filled),
/// named as whole-day (epoch0) features.
inline FeatureRecord summarize_daily_values(const std::string& signal, std::span<const double> daily,
                                            std::span<const SummaryStat> wanted,
                                            double mode_resolution = 1.0) {
    FeatureRecord rec;
    for (auto s : wanted)
        rec.emplace_back(feature_name(signal, Epoch::Epoch0, s), compute_stat(daily, s, mode_resolution));
    return rec;
}

// ---------------------------------------------------------------------------
// Beacons
// ---------------------------------------------------------------------------

inline constexpr std::array<int, 3> kBreakThresholdsMinutes = {5, 15, 30};

struct BeaconDay {
    std::int64_t day = 0;
    FeatureRecord features;
};

/// Per local day with office sightings:
///   time_at_work     last - first office sighting, minutes
///   pct_time_at_desk share of that interval covered by consecutive office
///                    sightings at or above the RSSI cutoff whose gap is not
///                    itself a break (<= 5 min)
///   breaks_gt_Xmin   office-sighting gaps longer than X minutes (cumulative)
/// Sightings are keyed by beacon tag (home, office, keychain, backpack); the
/// sample value is the RSSI.
inline std::vector<BeaconDay> beacon_features(const std::map<std::string, TimeSeries>& sightings,
                                              double rssi_cutoff = -70.0, int tz_offset_minutes = 0) {
    std::vector<BeaconDay> out;
    auto office = sightings.find("office");
    if (office == sightings.end()) return out;
    std::map<std::int64_t, std::vector<Point>> by_day;
    for (const auto& p : office->second.points()) by_day[local_day(p.t, tz_offset_minutes)].push_back(p);
    for (const auto& [day, pts] : by_day) {
        BeaconDay bd{day, {}};
        double span_min = static_cast<double>(pts.back().t - pts.front().t) / 60.0;
        std::array<int, 3> breaks{};
        double desk_min = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            double gap = static_cast<double>(pts[i].t - pts[i - 1].t) / 60.0;
            for (std::size_t k = 0; k < kBreakThresholdsMinutes.size(); ++k)
                if (gap > kBreakThresholdsMinutes[k]) ++breaks[k];
            if (gap <= kBreakThresholdsMinutes[0] && pts[i - 1].value >= rssi_cutoff) desk_min += gap;
        }
        bd.features.emplace_back("beacon.time_at_work", span_min);
        bd.features.emplace_back("beacon.pct_time_at_desk",
                                 span_min > 0.0 ? std::optional<double>(desk_min / span_min) : std::nullopt);
        for (std::size_t k = 0; k < kBreakThresholdsMinutes.size(); ++k)
            bd.features.emplace_back("beacon.breaks_gt_" + std::to_string(kBreakThresholdsMinutes[k]) + "min",
                                     static_cast<double>(breaks[k]));
        out.push_back(std::move(bd));
    }
    return out;
}

inline std::vector<std::string> beacon_feature_names() {
    return {"beacon.time_at_work", "beacon.pct_time_at_desk", "beacon.breaks_gt_5min",
            "beacon.breaks_gt_15min", "beacon.breaks_gt_30min"};
}

/// Participant-level beacon features: mean over days where each is defined.
inline FeatureRecord beacon_participant_features(const std::vector<BeaconDay>& days) {
    FeatureRecord rec;
    for (const auto& name : beacon_feature_names()) {
        std::vector<double> v;
        for (const auto& d : days)
            for (const auto& [n, x] : d.features)
                if (n == name && x) v.push_back(*x);
        rec.emplace_back(name, v.empty() ? std::nullopt : std::optional<double>(stats::mean(v)));
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Regularity
// ---------------------------------------------------------------------------

inline std::vector<std::string> regularity_feature_names(const std::string& signal) {
    std::vector<std::string> names;
    for (int h = 0; h < 24; ++h) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%02d", h);
        names.push_back("reg." + signal + ".hist_h" + buf);
    }
    names.push_back("reg." + signal + ".autocorr24");
    names.push_back("reg." + signal + ".daycos");
    return names;
}

/// Routine features of one signal over whole local days:
///   hist_hHH    hour-of-day share of total activity (sums to 1)
///   autocorr24  correlation of hourly totals with the same hour one day later
///   daycos      mean cosine similarity of consecutive days' 24-bin profiles
/// `weeks` > 0 restricts the window to the first weeks*7 days.
inline FeatureRecord regularity_features(const TimeSeries& ts, int weeks = 0, int tz_offset_minutes = 0) {
    auto days = local_days(ts, tz_offset_minutes);
    if (days.size() < 2)
        throw InsufficientData("regularity features need >= 2 days for " + ts.participant() + "/" + ts.signal());
    const std::int64_t first = days.front();
    std::int64_t last = days.back();
    if (weeks > 0) last = std::min(last, first + std::int64_t{weeks} * 7 - 1);
    const auto n_days = static_cast<std::size_t>(last - first + 1);

    std::vector<double> hourly(n_days * 24, 0.0);
    for (const auto& p : ts.points()) {
        auto d = local_day(p.t, tz_offset_minutes);
        if (d > last) continue;
        auto h = local_seconds_of_day(p.t, tz_offset_minutes) / 3600;
        hourly[static_cast<std::size_t>(d - first) * 24 + static_cast<std::size_t>(h)] += p.value;
    }

    FeatureRecord rec;
    auto names = regularity_feature_names(ts.signal());
    std::array<double, 24> hist{};
    double total = 0.0;
    for (std::size_t i = 0; i < hourly.size(); ++i) {
        hist[i % 24] += hourly[i];
        total += hourly[i];
    }
    for (int h = 0; h < 24; ++h)
        rec.emplace_back(names[static_cast<std::size_t>(h)],
                         total > 0.0 ? std::optional<double>(hist[static_cast<std::size_t>(h)] / total)
                                     : std::nullopt);

    std::span<const double> all(hourly);
    rec.emplace_back(names[24], stats::pearson(all.first(all.size() - 24), all.subspan(24)));

    std::vector<double> cosines;
    for (std::size_t d = 1; d < n_days; ++d) {
        auto a = all.subspan((d - 1) * 24, 24), b = all.subspan(d * 24, 24);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t h = 0; h < 24; ++h) {
            dot += a[h] * b[h];
            na += a[h] * a[h];
            nb += b[h] * b[h];
        }
        if (na > 0.0 && nb > 0.0) cosines.push_back(dot / std::sqrt(na * nb));
    }
    rec.emplace_back(names[25], cosines.empty() ? std::nullopt : std::optional<double>(stats::mean(cosines)));
    return rec;
}

}  // namespace jointpred::features
