#pragma once

// Seeded synthetic cohort with planted construct signal.
//
// Each participant draws latent factors z ~ N(0, I). A construct's score is
//     center + (hi - lo) / 6 * (sqrt(snr) * s + e) / sqrt(snr + 1)
// clamped to its range, with s = w_c . z (unit variance) and e ~ N(0, 1).
// Sensor streams load on one or two latents. Heart rate and stress follow
// three-regime switching chains whose persistence depends on a latent, with
// uniform jumps so the stationary distribution does not; only sequence
// structure carries that latent.
//
// In the default layout latents 0-4 are the Big Five, 5 is cognitive ability
// and 6-9 are behavioral factors that only sensors observe. Job performance
// constructs mix a personality/cognitive direction with a behavioral one
// weighted by `job_extra_signal`. The independent layout uses one latent per
// construct and single-latent sensor channels.

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointpred/cohort.hpp"
#include "jointpred/core.hpp"

namespace jointpred::synth {

enum class LatentLayout { Default, Independent };

struct CohortSpec {
    std::size_t n_participants = 500;
    LatentLayout layout = LatentLayout::Default;
    double default_snr = 2.0;
    std::map<ConstructId, double> snr;       // per-construct override
    double job_extra_signal = 1.0;
    double cross_loading = 0.5;              // weight of a channel's second latent
    double hon_strength = 1.5;               // tilt of regime persistence
    std::map<ModalityKind, double> modality_signal;  // multiplier on planted signal (default 1)
    std::size_t social_columns = 300;
    double social_noise_fraction = 0.2;
    double feature_missing_rate = 0.0;
    double modality_missing_rate = 0.0;
    double outlier_rate = 0.0;
    int days = 14;
    int sampling_minutes = 30;               // heart rate and stress
    std::vector<std::string> absent_files;   // e.g. {"social"}
    std::uint64_t seed = 0;

    std::size_t latent_dim() const { return layout == LatentLayout::Default ? 10 : kConstructCount; }
    double snr_for(ConstructId id) const {
        auto it = snr.find(id);
        return it == snr.end() ? default_snr : it->second;
    }
    double signal_for(ModalityKind m) const {
        auto it = modality_signal.find(m);
        return it == modality_signal.end() ? 1.0 : it->second;
    }
};

inline void validate(const CohortSpec& s) {
    if (s.n_participants < 10) throw InvalidConfig("n_participants", "must be >= 10");
    auto rate = [](double r, const char* f) {
        if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfig(f, "must be in [0,1]");
    };
    rate(s.feature_missing_rate, "feature_missing_rate");
    rate(s.modality_missing_rate, "modality_missing_rate");
    rate(s.outlier_rate, "outlier_rate");
    rate(s.social_noise_fraction, "social_noise_fraction");
    if (!(s.default_snr >= 0.0)) throw InvalidConfig("default_snr", "must be >= 0");
    for (auto& [id, v] : s.snr)
        if (!(v >= 0.0)) throw InvalidConfig("snr." + std::string(construct_name(id)), "must be >= 0");
    if (s.days < 2) throw InvalidConfig("days", "must be >= 2");
    if (s.sampling_minutes <= 0 || 30 % s.sampling_minutes != 0)
        throw InvalidConfig("sampling_minutes", "must divide 30");
    for (const auto& f : s.absent_files)
        if (f != "wearable" && f != "stress" && f != "heart_rate" && f != "phone" && f != "beacon" && f != "social")
            throw InvalidConfig("absent_files", "unknown file " + f);
}

/// Reads a spec from JSON; unknown keys are rejected.
inline CohortSpec spec_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "n_participants", "layout", "default_snr", "snr", "job_extra_signal", "cross_loading",
        "hon_strength", "modality_signal", "social_columns", "social_noise_fraction",
        "feature_missing_rate", "modality_missing_rate", "outlier_rate", "days", "sampling_minutes",
        "absent_files", "seed"};
    if (!j.is_object()) throw InvalidConfig("<spec>", "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw InvalidConfig(it.key(), "unknown key");
    CohortSpec s;
    try {
        s.n_participants = j.value("n_participants", s.n_participants);
        auto layout = j.value("layout", std::string("default"));
        if (layout == "independent") s.layout = LatentLayout::Independent;
        else if (layout != "default") throw InvalidConfig("layout", "expected default|independent");
        s.default_snr = j.value("default_snr", s.default_snr);
        if (j.contains("snr"))
            for (auto it = j.at("snr").begin(); it != j.at("snr").end(); ++it) {
                auto id = parse_construct(it.key());
                if (!id) throw InvalidConfig("snr." + it.key(), "unknown construct");
                s.snr[*id] = it.value().get<double>();
            }
        s.job_extra_signal = j.value("job_extra_signal", s.job_extra_signal);
        s.cross_loading = j.value("cross_loading", s.cross_loading);
        s.hon_strength = j.value("hon_strength", s.hon_strength);
        if (j.contains("modality_signal"))
            for (auto it = j.at("modality_signal").begin(); it != j.at("modality_signal").end(); ++it) {
                auto m = parse_modality(it.key());
                if (!m) throw InvalidConfig("modality_signal." + it.key(), "unknown modality");
                s.modality_signal[*m] = it.value().get<double>();
            }
        s.social_columns = j.value("social_columns", s.social_columns);
        s.social_noise_fraction = j.value("social_noise_fraction", s.social_noise_fraction);
        s.feature_missing_rate = j.value("feature_missing_rate", s.feature_missing_rate);
        s.modality_missing_rate = j.value("modality_missing_rate", s.modality_missing_rate);
        s.outlier_rate = j.value("outlier_rate", s.outlier_rate);
        s.days = j.value("days", s.days);
        s.sampling_minutes = j.value("sampling_minutes", s.sampling_minutes);
        s.absent_files = j.value("absent_files", s.absent_files);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig("<spec>", e.what());
    }
    validate(s);
    return s;
}

inline nlohmann::json spec_to_json(const CohortSpec& s) {
    nlohmann::json snr = nlohmann::json::object(), signal = nlohmann::json::object();
    for (const auto& [id, v] : s.snr) snr[std::string(construct_name(id))] = v;
    for (const auto& [m, v] : s.modality_signal) signal[std::string(modality_name(m))] = v;
    return {{"n_participants", s.n_participants},
            {"layout", s.layout == LatentLayout::Independent ? "independent" : "default"},
            {"default_snr", s.default_snr},
            {"snr", snr},
            {"job_extra_signal", s.job_extra_signal},
            {"cross_loading", s.cross_loading},
            {"hon_strength", s.hon_strength},
            {"modality_signal", signal},
            {"social_columns", s.social_columns},
            {"social_noise_fraction", s.social_noise_fraction},
            {"feature_missing_rate", s.feature_missing_rate},
            {"modality_missing_rate", s.modality_missing_rate},
            {"outlier_rate", s.outlier_rate},
            {"days", s.days},
            {"sampling_minutes", s.sampling_minutes},
            {"absent_files", s.absent_files},
            {"seed", s.seed}};
}

/// Generator output plus the hidden state tests need.
struct Generated {
    ingest::RawCohort raw;
    Matrix latents;                               // participants x latent_dim
    std::vector<std::vector<int>> hr_regimes;     // per participant, one per 30-min slot
    std::vector<std::vector<int>> stress_regimes;
};

namespace detail {

// Sensor channels and the latents they load on in the default layout.
enum Channel : std::size_t {
    Steps, SleepMinutes, Floors, ActiveMinutes, Calories,
    StressLevel, StressRegime, HrLevel, HrRegime,
    Unlocks, Screen, Distance, Commute, Regularity,
    WorkHours, Desk, Breaks,
    kChannelCount
};

inline constexpr std::array<std::array<int, 2>, kChannelCount> kDefaultChannelLatents = {{
    {0, 6}, {8, 2}, {6, -1}, {7, 6}, {7, 0},
    {3, 8}, {3, -1}, {7, -1}, {6, -1},
    {9, 4}, {9, 1}, {0, 7}, {5, 8}, {2, -1},
    {2, 6}, {5, 1}, {8, -1},
}};

inline ModalityKind channel_modality(std::size_t c) {
    if (c <= Calories || c == StressLevel) return ModalityKind::Wearable;
    if (c == StressRegime) return ModalityKind::HonStress;
    if (c == HrLevel) return ModalityKind::HeartRateDerived;
    if (c == HrRegime) return ModalityKind::HonHeart;
    if (c <= Regularity) return ModalityKind::PhoneAgent;
    return ModalityKind::Beacon;
}

inline Vector construct_direction(ConstructId id, const CohortSpec& spec) {
    const std::size_t L = spec.latent_dim();
    Vector w = Vector::Zero(static_cast<Eigen::Index>(L));
    if (spec.layout == LatentLayout::Independent) {
        w[static_cast<Eigen::Index>(index_of(id))] = 1.0;
        return w;
    }
    auto e = [&](int i) {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(L));
        v[i] = 1.0;
        return v;
    };
    auto job = [&](Vector theory, Vector behav) {
        Vector v = theory.normalized() + spec.job_extra_signal * behav.normalized();
        return v;
    };
    using C = ConstructId;
    switch (id) {
        case C::Extraversion: w = e(0); break;
        case C::Agreeableness: w = e(1); break;
        case C::Conscientiousness: w = e(2); break;
        case C::Neuroticism: w = e(3); break;
        case C::Openness: w = e(4); break;
        case C::Abstraction: w = e(5); break;
        case C::Vocabulary: w = 0.8 * e(5) + 0.6 * e(4); break;
        case C::IRB: w = job(e(2) + e(5), e(6)); break;
        case C::ITP: w = job(e(4) + e(5), e(7)); break;
        case C::OCB: w = job(e(1) + e(0), e(6) + e(8)); break;
        case C::InterpersonalDeviance: w = job(e(3) - e(1), e(8)); break;
        case C::OrganizationalDeviance: w = job(e(3) - e(2), e(9)); break;
        case C::PositiveAffect: w = e(0) + e(7); break;
        case C::NegativeAffect: w = e(3) + e(8); break;
        case C::Anxiety: w = e(3) + e(9); break;
        case C::Alcohol: w = e(9) + 0.5 * e(0); break;
        case C::Tobacco: w = e(9) - e(2); break;
        case C::PhysicalActivity: w = e(6) + e(7); break;
        case C::Sleep: w = e(8) - e(2); break;
    }
    return w.normalized();
}

// Unit-variance channel score for one participant.
inline double channel_score(std::size_t c, const Eigen::Ref<const Vector>& z, const CohortSpec& spec) {
    const std::size_t L = spec.latent_dim();
    double s = 0.0;
    if (spec.layout == LatentLayout::Independent) {
        s = z[static_cast<Eigen::Index>(c % L)];
    } else {
        const auto& ls = kDefaultChannelLatents[c];
        double w2 = ls[1] >= 0 ? spec.cross_loading : 0.0;
        s = z[ls[0]] + (ls[1] >= 0 ? w2 * z[ls[1]] : 0.0);
        s /= std::sqrt(1.0 + w2 * w2);
    }
    return s * spec.signal_for(channel_modality(c));
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Three-regime chain, one state per 30-minute slot.
inline std::vector<int> regime_chain(std::size_t slots, double p_stay, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> start(0, 2), other(1, 2);
    std::vector<int> r(slots);
    r[0] = start(rng);
    for (std::size_t t = 1; t < slots; ++t) r[t] = u(rng) < p_stay ? r[t - 1] : (r[t - 1] + other(rng)) % 3;
    return r;
}

}  // namespace detail

inline constexpr Timestamp kSynthStart = 1614556800;  // 2021-03-01T00:00:00Z, a Monday

/// Pure function of the spec (and its seed).
inline Generated generate(const CohortSpec& spec) {
    validate(spec);
    using namespace detail;
    const std::size_t n = spec.n_participants;
    const std::size_t L = spec.latent_dim();
    const int days = spec.days;
    Generated g;

    std::vector<std::string> pids;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "P%04zu", i + 1);
        pids.push_back(buf);
    }

    g.latents.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(L));
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, {0, i}));
        std::normal_distribution<double> nd;
        for (std::size_t k = 0; k < L; ++k) g.latents(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = nd(rng);
    }

    // Ground truth.
    g.raw.truth = GroundTruthTable(pids);
    for (auto id : kAllConstructs) {
        Vector w = construct_direction(id, spec);
        const Range r = default_range(id);
        const double snr = spec.snr_for(id);
        for (std::size_t i = 0; i < n; ++i) {
            std::mt19937_64 rng(derive_seed(spec.seed, {1, i, index_of(id)}));
            std::normal_distribution<double> nd;
            double s = g.latents.row(static_cast<Eigen::Index>(i)).dot(w);
            double v = 0.5 * (r.lo + r.hi) + (r.hi - r.lo) / 6.0 * (std::sqrt(snr) * s + nd(rng)) / std::sqrt(snr + 1.0);
            g.raw.truth.set(i, id, std::min(r.hi, std::max(r.lo, v)));
        }
    }

    // Which participants lack a whole file.
    const std::array<std::string, 6> files = {"wearable", "stress", "heart_rate", "phone", "beacon", "social"};
    std::vector<std::array<bool, 6>> dropped(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, {2, i}));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t f = 0; f < files.size(); ++f) dropped[i][f] = u(rng) < spec.modality_missing_rate;
    }
    auto absent = [&](const std::string& f) {
        return std::find(spec.absent_files.begin(), spec.absent_files.end(), f) != spec.absent_files.end();
    };

    ingest::SeriesSet wearable{{"steps", "sleep_minutes", "floors", "active_minutes", "calories"}, {}};
    ingest::SeriesSet stress{{"stress"}, {}};
    ingest::SeriesSet hr{{"heart_rate"}, {}};
    ingest::SeriesSet phone{{"unlocks", "screen_minutes", "distance_km", "commute_minutes"}, {}};
    ingest::SeriesSet beacon{{"office", "home"}, {}};
    g.hr_regimes.resize(n);
    g.stress_regimes.resize(n);

    const std::size_t slots = static_cast<std::size_t>(days) * 48;
    const int per_slot = 30 / spec.sampling_minutes;

    for (std::size_t i = 0; i < n; ++i) {
        const auto z = g.latents.row(static_cast<Eigen::Index>(i)).transpose();
        auto ch = [&](std::size_t c) { return channel_score(c, z, spec); };
        const std::string& pid = pids[i];
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> nd;
        auto keep = [&](std::mt19937_64& rng) { return !(u(rng) < spec.feature_missing_rate); };
        auto outlier = [&](std::mt19937_64& rng) { return spec.outlier_rate > 0.0 && u(rng) < spec.outlier_rate; };

        // Wearable daily series.
        {
            std::mt19937_64 rng(derive_seed(spec.seed, {3, i}));
            struct Daily { const char* name; std::size_t channel; double base, scale, sd, lo; double bad; };
            const std::array<Daily, 5> sigs = {{
                {"steps", Steps, 8000, 2000, 1500, 0, -500},
                {"sleep_minutes", SleepMinutes, 420, 40, 45, 0, 2000},
                {"floors", Floors, 10, 4, 4, 0, -3},
                {"active_minutes", ActiveMinutes, 60, 20, 20, 0, -10},
                {"calories", Calories, 2200, 250, 200, 0, -100},
            }};
            std::map<std::string, std::vector<Point>> pts;
            for (const auto& s : sigs) {
                const double level = s.base + s.scale * ch(s.channel);
                for (int d = 0; d < days; ++d) {
                    double v = std::max(s.lo, level + s.sd * nd(rng));
                    if (outlier(rng)) v = s.bad;
                    if (keep(rng)) pts[s.name].push_back({kSynthStart + d * kSecondsPerDay, v});
                }
            }
            if (!dropped[i][0])
                for (auto& [sig, p] : pts) wearable.by_participant[pid][sig] = TimeSeries::from_points(pid, sig, std::move(p));
        }

        // Stress and heart rate: regime-switching chains.
        auto regime_series = [&](std::uint64_t stream, std::size_t regime_channel, std::size_t level_channel,
                                 std::array<double, 3> means, double level_scale, double noise, double lo, double hi,
                                 double bad, std::vector<int>& regimes) {
            std::mt19937_64 rng(derive_seed(spec.seed, {stream, i}));
            const double p_stay = 0.5 + 0.4 * std::tanh(spec.hon_strength * ch(regime_channel));
            regimes = regime_chain(slots, p_stay, rng);
            const double level = level_scale * ch(level_channel);
            std::vector<Point> pts;
            for (std::size_t t = 0; t < slots; ++t)
                for (int k = 0; k < per_slot; ++k) {
                    double v = std::min(hi, std::max(lo, means[static_cast<std::size_t>(regimes[t])] + level + noise * nd(rng)));
                    if (outlier(rng)) v = bad;
                    if (keep(rng))
                        pts.push_back({kSynthStart + static_cast<Timestamp>(t) * 1800 + k * spec.sampling_minutes * 60, v});
                }
            return pts;
        };
        {
            auto pts = regime_series(4, StressRegime, StressLevel, {20, 45, 70}, 6.0, 5.0, 0, 100, 150,
                                     g.stress_regimes[i]);
            if (!dropped[i][1] && !pts.empty()) stress.by_participant[pid]["stress"] = TimeSeries::from_points(pid, "stress", std::move(pts));
        }
        {
            auto pts = regime_series(5, HrRegime, HrLevel, {58, 78, 100}, 5.0, 3.0, 35, 200, 300, g.hr_regimes[i]);
            if (!dropped[i][2] && !pts.empty()) hr.by_participant[pid]["heart_rate"] = TimeSeries::from_points(pid, "heart_rate", std::move(pts));
        }

        // Phone agent, hourly.
        {
            std::mt19937_64 rng(derive_seed(spec.seed, {6, i}));
            const double unlock_rate = 3.0 * std::exp(0.35 * ch(Unlocks));
            const double screen_per_unlock = 2.5 * std::exp(0.3 * ch(Screen));
            const double travel = 0.6 * std::exp(0.35 * ch(Distance));
            const double commute = 30.0 + 10.0 * ch(Commute);
            const double jitter_h = 1.5 * std::exp(-0.6 * ch(Regularity));
            std::map<std::string, std::vector<Point>> pts;
            for (int d = 0; d < days; ++d) {
                const double shift = jitter_h * nd(rng);
                for (int h = 0; h < 24; ++h) {
                    // Waking-hours profile centered on 15:00, shifted per day.
                    double x = (h - 15.0 - shift) / 5.0;
                    double profile = std::exp(-0.5 * x * x);
                    const Timestamp t = kSynthStart + d * kSecondsPerDay + h * 3600;
                    std::poisson_distribution<int> pu(unlock_rate * profile + 0.05);
                    double unlocks = pu(rng);
                    double screen = std::max(0.0, unlocks * screen_per_unlock * (1.0 + 0.2 * nd(rng)));
                    double dist = std::max(0.0, travel * profile * (1.0 + 0.3 * nd(rng)));
                    if (keep(rng)) pts["unlocks"].push_back({t, unlocks});
                    if (keep(rng)) pts["screen_minutes"].push_back({t, std::min(60.0, screen)});
                    if (keep(rng)) pts["distance_km"].push_back({t, dist});
                    if (h == 8) {
                        double c = std::max(0.0, commute + 8.0 * nd(rng));
                        if (outlier(rng)) c = -15.0;
                        if (keep(rng)) pts["commute_minutes"].push_back({t, c});
                    }
                }
            }
            if (!dropped[i][3])
                for (auto& [sig, p] : pts) phone.by_participant[pid][sig] = TimeSeries::from_points(pid, sig, std::move(p));
        }

        // Beacons on weekdays: office sightings every 5 minutes while at work,
        // with breaks; home sightings morning and evening.
        {
            std::mt19937_64 rng(derive_seed(spec.seed, {7, i}));
            const double hours = std::clamp(8.0 + 1.0 * ch(WorkHours), 3.0, 12.0);
            const double desk_p = logistic(1.2 * ch(Desk));
            const double break_rate = 2.0 * std::exp(0.5 * ch(Breaks));
            std::map<std::string, std::vector<Point>> pts;
            for (int d = 0; d < days; ++d) {
                if (d % 7 >= 5) continue;
                const Timestamp day0 = kSynthStart + d * kSecondsPerDay;
                const double arrive = 8.5 + 0.4 * nd(rng);
                const double stay = std::clamp(hours + 0.5 * nd(rng), 2.0, 13.0);
                const auto first = static_cast<Timestamp>(arrive * 3600.0);
                const auto last = static_cast<Timestamp>((arrive + stay) * 3600.0);
                std::poisson_distribution<int> pb(break_rate);
                std::vector<std::pair<Timestamp, Timestamp>> breaks;
                for (int b = pb(rng); b > 0; --b) {
                    auto start = first + static_cast<Timestamp>(u(rng) * static_cast<double>(last - first));
                    auto len = static_cast<Timestamp>((10.0 + 30.0 * u(rng)) * 60.0);
                    breaks.emplace_back(start, start + len);
                }
                for (Timestamp t = first; t <= last; t += 300) {
                    bool away = false;
                    for (auto& [a, b] : breaks) away = away || (t > a && t < b && t != first && t + 300 <= last);
                    if (away) continue;
                    double rssi = (u(rng) < desk_p ? -60.0 : -82.0) + 3.0 * nd(rng);
                    if (keep(rng)) pts["office"].push_back({day0 + t, rssi});
                }
                if (keep(rng)) pts["home"].push_back({day0 + 7 * 3600, -55.0 + 3.0 * nd(rng)});
                if (keep(rng)) pts["home"].push_back({day0 + 20 * 3600, -55.0 + 3.0 * nd(rng)});
            }
            if (!dropped[i][4])
                for (auto& [sig, p] : pts) beacon.by_participant[pid][sig] = TimeSeries::from_points(pid, sig, std::move(p));
        }
    }

    // Social media: static columns, each loading on one or two latents.
    FeatureMatrix social;
    {
        std::vector<std::string> cols;
        for (std::size_t c = 0; c < spec.social_columns; ++c) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "social_%03zu", c + 1);
            cols.push_back(buf);
        }
        social = FeatureMatrix(ModalityKind::SocialMedia, pids, cols);
        std::mt19937_64 lrng(derive_seed(spec.seed, {8}));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, L - 1);
        const double gain = spec.signal_for(ModalityKind::SocialMedia);
        std::vector<std::array<double, 4>> load(spec.social_columns);  // latent a, weight a, latent b, weight b
        for (auto& l : load) {
            bool noise = u(lrng) < spec.social_noise_fraction;
            l[0] = static_cast<double>(pick(lrng));
            l[1] = noise ? 0.0 : (0.4 + 0.6 * u(lrng)) * gain;
            l[2] = static_cast<double>(pick(lrng));
            l[3] = (noise || spec.layout == LatentLayout::Independent) ? 0.0 : spec.cross_loading * l[1] * u(lrng);
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::mt19937_64 rng(derive_seed(spec.seed, {9, i}));
            std::normal_distribution<double> nd;
            for (std::size_t c = 0; c < spec.social_columns; ++c) {
                const auto& l = load[c];
                double v = l[1] * g.latents(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l[0])) +
                           l[3] * g.latents(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l[2])) + nd(rng);
                bool keep = !(u(rng) < spec.feature_missing_rate);
                if (!dropped[i][5] && keep) social.set(i, c, v);
            }
        }
    }

    if (!absent("wearable")) g.raw.wearable = std::move(wearable);
    if (!absent("stress")) g.raw.stress = std::move(stress);
    if (!absent("heart_rate")) g.raw.heart_rate = std::move(hr);
    if (!absent("phone")) g.raw.phone = std::move(phone);
    if (!absent("beacon")) g.raw.beacon = std::move(beacon);
    if (!absent("social")) g.raw.social = std::move(social);
    return g;
}

}  // namespace jointpred::synth
