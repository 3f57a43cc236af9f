#pragma once

// A data directory as loaded from disk:
//
//   ground_truth.csv  participant_id + the 19 construct columns (required)
//   wearable.csv      daily series: steps, sleep_minutes, floors, active_minutes, calories
//   stress.csv        intraday series: stress
//   heart_rate.csv    intraday series: heart_rate
//   phone.csv         hourly series: unlocks, screen_minutes, distance_km, commute_minutes
//   beacon.csv        sightings: one column per beacon tag holding the RSSI
//   social.csv        static participant x feature table
//
// Every modality file is optional; an absent file means the modality is
// missing for the whole cohort.

#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "jointpred/ingest.hpp"

namespace jointpred::ingest {

inline constexpr std::string_view kGroundTruthFile = "ground_truth.csv";
inline constexpr std::string_view kWearableFile = "wearable.csv";
inline constexpr std::string_view kStressFile = "stress.csv";
inline constexpr std::string_view kHeartRateFile = "heart_rate.csv";
inline constexpr std::string_view kPhoneFile = "phone.csv";
inline constexpr std::string_view kBeaconFile = "beacon.csv";
inline constexpr std::string_view kSocialFile = "social.csv";

struct RawCohort {
    GroundTruthTable truth;
    std::optional<SeriesSet> wearable;
    std::optional<SeriesSet> stress;
    std::optional<SeriesSet> heart_rate;
    std::optional<SeriesSet> phone;
    std::optional<SeriesSet> beacon;
    std::optional<FeatureMatrix> social;

    const std::vector<std::string>& participants() const { return truth.participants(); }
};

namespace detail {

inline std::optional<SeriesSet> load_optional_series(const std::filesystem::path& dir, std::string_view name) {
    auto p = dir / name;
    if (!std::filesystem::exists(p)) {
        diag::warn("modality file absent: " + p.string());
        return std::nullopt;
    }
    return load_series(p.string());
}

}  // namespace detail

/// Loads a data directory. Ground truth is mandatory; the error names the path.
inline RawCohort load_cohort(const std::string& dir, const std::map<ConstructId, Range>* ranges = nullptr) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw IoError("data directory not found: " + dir);
    const auto gt = root / kGroundTruthFile;
    if (!fs::exists(gt)) throw IoError("ground truth file not found: " + gt.string());
    RawCohort c;
    c.truth = load_ground_truth(gt.string(), ranges);
    if (c.truth.size() == 0) throw EmptyInput("ground truth has no participants: " + gt.string());
    c.wearable = detail::load_optional_series(root, kWearableFile);
    c.stress = detail::load_optional_series(root, kStressFile);
    c.heart_rate = detail::load_optional_series(root, kHeartRateFile);
    c.phone = detail::load_optional_series(root, kPhoneFile);
    c.beacon = detail::load_optional_series(root, kBeaconFile);
    if (fs::exists(root / kSocialFile)) c.social = load_static((root / kSocialFile).string(), ModalityKind::SocialMedia);
    else diag::warn("modality file absent: " + (root / kSocialFile).string());
    return c;
}

/// Loads new data for prediction. Ground truth is optional here; without it
/// the participants are those appearing in any modality file, sorted.
inline RawCohort load_cohort_for_prediction(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw IoError("data directory not found: " + dir);
    RawCohort c;
    c.wearable = detail::load_optional_series(root, kWearableFile);
    c.stress = detail::load_optional_series(root, kStressFile);
    c.heart_rate = detail::load_optional_series(root, kHeartRateFile);
    c.phone = detail::load_optional_series(root, kPhoneFile);
    c.beacon = detail::load_optional_series(root, kBeaconFile);
    if (fs::exists(root / kSocialFile)) c.social = load_static((root / kSocialFile).string(), ModalityKind::SocialMedia);
    if (fs::exists(root / kGroundTruthFile)) {
        c.truth = load_ground_truth((root / kGroundTruthFile).string());
    } else {
        std::set<std::string> ids;
        for (const auto* s : {&c.wearable, &c.stress, &c.heart_rate, &c.phone, &c.beacon})
            if (*s)
                for (const auto& [pid, m] : (*s)->by_participant) ids.insert(pid);
        if (c.social) ids.insert(c.social->participants().begin(), c.social->participants().end());
        c.truth = GroundTruthTable(std::vector<std::string>(ids.begin(), ids.end()));
    }
    if (c.truth.size() == 0) throw EmptyInput("no participants found in " + dir);
    return c;
}

/// Writes every present part of `c` with the canonical writers.
inline void write_cohort(const RawCohort& c, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    write_ground_truth(c.truth, (root / kGroundTruthFile).string());
    if (c.wearable) write_series(*c.wearable, (root / kWearableFile).string());
    if (c.stress) write_series(*c.stress, (root / kStressFile).string());
    if (c.heart_rate) write_series(*c.heart_rate, (root / kHeartRateFile).string());
    if (c.phone) write_series(*c.phone, (root / kPhoneFile).string());
    if (c.beacon) write_series(*c.beacon, (root / kBeaconFile).string());
    if (c.social) write_static(*c.social, (root / kSocialFile).string());
}

}  // namespace jointpred::ingest
