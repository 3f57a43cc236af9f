#pragma once

// CSV loading for modality tables and ground truth, plausibility screening,
// and the canonical CSV writers used by the synthetic generator.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "jointpred/core.hpp"
#include "jointpred/csv.hpp"
#include "jointpred/data.hpp"

namespace jointpred::ingest {

/// All series of one series-shaped CSV: participant -> signal -> series.
struct SeriesSet {
    std::vector<std::string> signals;
    std::map<std::string, std::map<std::string, TimeSeries>> by_participant;

    const TimeSeries* find(const std::string& participant, const std::string& signal) const {
        auto p = by_participant.find(participant);
        if (p == by_participant.end()) return nullptr;
        auto s = p->second.find(signal);
        return s == p->second.end() ? nullptr : &s->second;
    }
    std::size_t point_count() const {
        std::size_t n = 0;
        for (const auto& [p, m] : by_participant)
            for (const auto& [s, ts] : m) n += ts.size();
        return n;
    }
};

inline void require_participant_column(const csv::Table& t) {
    if (t.header.empty() || t.header[0] != "participant_id")
        throw SchemaError(t.header.empty() ? "" : t.header[0], "first column must be participant_id");
}

inline SeriesSet parse_series_table(const csv::Table& t) {
    require_participant_column(t);
    if (t.header.size() < 2 || t.header[1] != "timestamp")
        throw SchemaError(t.header.size() > 1 ? t.header[1] : "", "second column must be timestamp");
    SeriesSet out;
    out.signals.assign(t.header.begin() + 2, t.header.end());
    std::set<std::string> seen(out.signals.begin(), out.signals.end());
    if (seen.size() != out.signals.size()) throw SchemaError("", "duplicate signal column");
    for (const auto& s : out.signals)
        if (s.empty()) throw SchemaError("", "empty signal name");

    std::map<std::string, std::map<std::string, std::vector<Point>>> points;
    std::map<std::string, std::set<Timestamp>> stamps;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string& pid = row[0];
        if (pid.empty()) throw ParseError(r + 2, "participant_id", "empty participant id");
        Timestamp ts = 0;
        try {
            ts = parse_timestamp(row[1]);
        } catch (const Error& e) {
            throw ParseError(r + 2, "timestamp", e.what());
        }
        if (!stamps[pid].insert(ts).second)
            throw DuplicateTimestamp("duplicate (participant, timestamp) (" + pid + ", " + row[1] +
                                     ") at row " + std::to_string(r + 2));
        for (std::size_t c = 2; c < row.size(); ++c) {
            auto v = csv::parse_cell(row[c], r + 2, t.header[c]);
            if (v) points[pid][t.header[c]].push_back({ts, *v});
        }
        points[pid];  // participants with only empty cells still exist
    }
    for (auto& [pid, sigs] : points) {
        auto& dst = out.by_participant[pid];
        for (auto& [sig, pts] : sigs) dst[sig] = TimeSeries::from_points(pid, sig, std::move(pts));
    }
    return out;
}

inline FeatureMatrix parse_static_table(const csv::Table& t, ModalityKind modality) {
    require_participant_column(t);
    std::vector<std::string> cols(t.header.begin() + 1, t.header.end());
    std::vector<std::string> pids;
    for (const auto& row : t.rows) pids.push_back(row[0]);
    for (std::size_t r = 0; r < pids.size(); ++r)
        if (pids[r].empty()) throw ParseError(r + 2, "participant_id", "empty participant id");
    FeatureMatrix m(modality, pids, cols);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            m.set(r, c, csv::parse_cell(t.rows[r][c + 1], r + 2, cols[c]));
    return m;
}

/// Ground truth: participant_id plus the 19 construct columns (any order).
/// Values outside `ranges` (when given) are rejected.
inline GroundTruthTable parse_ground_truth(const csv::Table& t,
                                           const std::map<ConstructId, Range>* ranges = nullptr) {
    require_participant_column(t);
    std::vector<ConstructId> ids;
    std::set<ConstructId> seen;
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        auto id = parse_construct(t.header[c]);
        if (!id) throw SchemaError(t.header[c], "unknown construct column");
        if (!seen.insert(*id).second) throw SchemaError(t.header[c], "duplicate construct column");
        ids.push_back(*id);
    }
    for (auto id : kAllConstructs)
        if (!seen.count(id)) throw SchemaError(std::string(construct_name(id)), "missing construct column");
    std::vector<std::string> pids;
    for (const auto& row : t.rows) pids.push_back(row[0]);
    GroundTruthTable g(pids);
    std::set<std::string> unique(pids.begin(), pids.end());
    if (unique.size() != pids.size()) throw SchemaError("participant_id", "duplicate participant");
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < ids.size(); ++c) {
            auto v = csv::parse_cell(t.rows[r][c + 1], r + 2, t.header[c + 1]);
            if (v && ranges) {
                const auto& rg = ranges->at(ids[c]);
                if (*v < rg.lo || *v > rg.hi)
                    throw ParseError(r + 2, t.header[c + 1], "value outside construct range");
            }
            g.set(r, ids[c], v);
        }
    return g;
}

using Loaded = std::variant<FeatureMatrix, SeriesSet>;

/// Loads a modality CSV. Series tables are recognized by a `timestamp`
/// second column; everything else is a static participant x feature matrix.
inline Loaded load_modality(const std::string& path, ModalityKind modality) {
    auto t = csv::read_file(path);
    if (t.header.size() >= 2 && t.header[1] == "timestamp") return parse_series_table(t);
    return parse_static_table(t, modality);
}

inline SeriesSet load_series(const std::string& path) {
    return parse_series_table(csv::read_file(path));
}

inline FeatureMatrix load_static(const std::string& path, ModalityKind modality) {
    return parse_static_table(csv::read_file(path), modality);
}

inline GroundTruthTable load_ground_truth(const std::string& path,
                                          const std::map<ConstructId, Range>* ranges = nullptr) {
    return parse_ground_truth(csv::read_file(path), ranges);
}

// ---------------------------------------------------------------------------
// Screening
// ---------------------------------------------------------------------------

using RangeRules = std::map<std::string, PlausibilityRule>;

struct Reject {
    std::string participant;
    std::string signal;
    std::optional<Timestamp> t;
    double value = 0.0;
    std::string reason;
};

template <class T>
struct Screened {
    T clean;
    std::vector<Reject> rejects;
};

inline const PlausibilityRule* rule_for(const RangeRules& rules, const std::string& name) {
    auto it = rules.find(name);
    if (it != rules.end()) return &it->second;
    auto dot = name.find('.');
    if (dot != std::string::npos) {
        it = rules.find(name.substr(0, dot));
        if (it != rules.end()) return &it->second;
    }
    return nullptr;
}

/// Moves implausible samples to the reject list. Never throws on data.
inline Screened<TimeSeries> screen_outliers(const TimeSeries& ts, const RangeRules& rules) {
    Screened<TimeSeries> out{TimeSeries(ts.participant(), ts.signal()), {}};
    const auto* rule = rule_for(rules, ts.signal());
    for (const auto& p : ts.points()) {
        if (rule && (p.value < rule->lo || p.value > rule->hi))
            out.rejects.push_back({ts.participant(), ts.signal(), p.t, p.value, rule->reason});
        else
            out.clean.push_back(p);
    }
    return out;
}

/// Matrix variant: implausible cells become missing and are reported.
inline Screened<FeatureMatrix> screen_outliers(const FeatureMatrix& m, const RangeRules& rules) {
    Screened<FeatureMatrix> out{m, {}};
    for (std::size_t c = 0; c < m.cols(); ++c) {
        const auto* rule = rule_for(rules, m.columns()[c]);
        if (!rule) continue;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto v = m.at(r, c);
            if (v && (*v < rule->lo || *v > rule->hi)) {
                out.rejects.push_back({m.participants()[r], m.columns()[c], std::nullopt, *v, rule->reason});
                out.clean.set(r, c, std::nullopt);
            }
        }
    }
    return out;
}

inline Screened<SeriesSet> screen_outliers(const SeriesSet& set, const RangeRules& rules) {
    Screened<SeriesSet> out;
    out.clean.signals = set.signals;
    for (const auto& [pid, sigs] : set.by_participant) {
        auto& dst = out.clean.by_participant[pid];
        for (const auto& [sig, ts] : sigs) {
            auto s = screen_outliers(ts, rules);
            dst[sig] = std::move(s.clean);
            out.rejects.insert(out.rejects.end(), s.rejects.begin(), s.rejects.end());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical writers
// ---------------------------------------------------------------------------

inline void write_static(const FeatureMatrix& m, const std::string& path) {
    std::vector<std::string> header{"participant_id"};
    header.insert(header.end(), m.columns().begin(), m.columns().end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row{m.participants()[r]};
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(csv::format_cell(m.at(r, c)));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, header, rows);
}

/// One row per (participant, timestamp) present in any signal; absent
/// samples are empty cells.
inline void write_series(const SeriesSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    csv::Writer w(out);
    std::vector<std::string> header{"participant_id", "timestamp"};
    header.insert(header.end(), set.signals.begin(), set.signals.end());
    w.row(header);
    for (const auto& [pid, sigs] : set.by_participant) {
        std::map<Timestamp, std::vector<std::optional<double>>> grid;
        for (std::size_t s = 0; s < set.signals.size(); ++s) {
            auto it = sigs.find(set.signals[s]);
            if (it == sigs.end()) continue;
            for (const auto& p : it->second.points()) {
                auto& cells = grid[p.t];
                cells.resize(set.signals.size());
                cells[s] = p.value;
            }
        }
        for (auto& [t, cells] : grid) {
            cells.resize(set.signals.size());
            std::vector<std::string> row{pid, format_timestamp(t)};
            for (const auto& c : cells) row.push_back(csv::format_cell(c));
            w.row(row);
        }
    }
}

inline void write_ground_truth(const GroundTruthTable& g, const std::string& path) {
    std::vector<std::string> header{"participant_id"};
    for (auto id : kAllConstructs) header.emplace_back(construct_name(id));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < g.size(); ++r) {
        std::vector<std::string> row{g.participants()[r]};
        for (auto id : kAllConstructs) row.push_back(csv::format_cell(g.value(r, id)));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, header, rows);
}

}  // namespace jointpred::ingest
