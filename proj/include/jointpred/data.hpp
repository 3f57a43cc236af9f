#pragma once

// Participant-level containers shared across the pipeline.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "jointpred/core.hpp"
#include "jointpred/timeutil.hpp"

namespace jointpred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point {
    Timestamp t = 0;
    double value = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Ordered samples of one signal for one participant. Timestamps strictly
/// increase and values are finite.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(std::string participant, std::string signal)
        : participant_(std::move(participant)), signal_(std::move(signal)) {}

    /// Sorts the points; equal timestamps raise DuplicateTimestamp.
    static TimeSeries from_points(std::string participant, std::string signal,
                                  std::vector<Point> points) {
        std::stable_sort(points.begin(), points.end(),
                         [](const Point& a, const Point& b) { return a.t < b.t; });
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!std::isfinite(points[i].value))
                throw NonFiniteValue("non-finite sample in " + participant + "/" + signal);
            if (i > 0 && points[i].t == points[i - 1].t)
                throw DuplicateTimestamp("duplicate timestamp " + format_timestamp(points[i].t) +
                                         " for " + participant + "/" + signal);
        }
        TimeSeries ts(std::move(participant), std::move(signal));
        ts.points_ = std::move(points);
        return ts;
    }

    const std::string& participant() const noexcept { return participant_; }
    const std::string& signal() const noexcept { return signal_; }
    const std::vector<Point>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    /// Appends a point that is strictly later than the last one.
    void push_back(Point p) {
        if (!points_.empty() && p.t <= points_.back().t)
            throw DuplicateTimestamp("non-increasing timestamp in " + participant_ + "/" + signal_);
        points_.push_back(p);
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::string participant_;
    std::string signal_;
    std::vector<Point> points_;
};

/// participants x named features for one modality; each cell is a value or
/// explicitly missing.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(ModalityKind modality, std::vector<std::string> participants,
                  std::vector<std::string> columns)
        : modality_(modality),
          participants_(std::move(participants)),
          columns_(std::move(columns)),
          values_(participants_.size() * columns_.size(), 0.0),
          present_(participants_.size() * columns_.size(), 0) {
        std::set<std::string> seen;
        for (const auto& c : columns_)
            if (!seen.insert(c).second) throw SchemaError(c, "duplicate column name");
        seen.clear();
        for (const auto& p : participants_)
            if (!seen.insert(p).second) throw SchemaError("participant_id", "duplicate participant " + p);
    }

    ModalityKind modality() const noexcept { return modality_; }
    std::size_t rows() const noexcept { return participants_.size(); }
    std::size_t cols() const noexcept { return columns_.size(); }
    const std::vector<std::string>& participants() const noexcept { return participants_; }
    const std::vector<std::string>& columns() const noexcept { return columns_; }

    bool present(std::size_t r, std::size_t c) const { return present_[r * cols() + c] != 0; }
    double value(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    std::optional<double> at(std::size_t r, std::size_t c) const {
        return present(r, c) ? std::optional<double>(value(r, c)) : std::nullopt;
    }
    void set(std::size_t r, std::size_t c, std::optional<double> v) {
        present_[r * cols() + c] = v.has_value();
        values_[r * cols() + c] = v.value_or(0.0);
    }

    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i] == name) return i;
        return std::nullopt;
    }
    std::optional<std::size_t> row_index(std::string_view participant) const {
        for (std::size_t i = 0; i < participants_.size(); ++i)
            if (participants_[i] == participant) return i;
        return std::nullopt;
    }

    bool row_all_missing(std::size_t r) const {
        for (std::size_t c = 0; c < cols(); ++c)
            if (present(r, c)) return false;
        return true;
    }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), 0));
    }

    FeatureMatrix select_rows(std::span<const std::size_t> rows) const {
        std::vector<std::string> ps;
        ps.reserve(rows.size());
        for (auto r : rows) ps.push_back(participants_[r]);
        FeatureMatrix out(modality_, std::move(ps), columns_);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t c = 0; c < cols(); ++c) out.set(i, c, at(rows[i], c));
        return out;
    }

    FeatureMatrix select_columns(std::span<const std::size_t> cols_idx) const {
        std::vector<std::string> cs;
        for (auto c : cols_idx) cs.push_back(columns_[c]);
        FeatureMatrix out(modality_, participants_, std::move(cs));
        for (std::size_t r = 0; r < rows(); ++r)
            for (std::size_t i = 0; i < cols_idx.size(); ++i) out.set(r, i, at(r, cols_idx[i]));
        return out;
    }

    friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
        if (a.modality_ != b.modality_ || a.participants_ != b.participants_ ||
            a.columns_ != b.columns_ || a.present_ != b.present_)
            return false;
        for (std::size_t i = 0; i < a.values_.size(); ++i)
            if (a.present_[i] && a.values_[i] != b.values_[i]) return false;
        return true;
    }

private:
    ModalityKind modality_ = ModalityKind::Wearable;
    std::vector<std::string> participants_;
    std::vector<std::string> columns_;
    std::vector<double> values_;
    std::vector<std::uint8_t> present_;
};

/// Complete numeric block: named columns over an ordered row set.
struct Block {
    std::vector<std::string> columns;
    Matrix values;  // rows x columns
};

/// Ground-truth construct values per participant.
class GroundTruthTable {
public:
    using Row = std::array<std::optional<double>, kConstructCount>;

    GroundTruthTable() = default;
    explicit GroundTruthTable(std::vector<std::string> participants)
        : participants_(std::move(participants)), rows_(participants_.size()) {}

    const std::vector<std::string>& participants() const noexcept { return participants_; }
    std::size_t size() const noexcept { return participants_.size(); }

    std::optional<double> value(std::size_t row, ConstructId id) const {
        return rows_[row][index_of(id)];
    }
    void set(std::size_t row, ConstructId id, std::optional<double> v) {
        rows_[row][index_of(id)] = v;
    }
    std::optional<std::size_t> row_index(std::string_view participant) const {
        for (std::size_t i = 0; i < participants_.size(); ++i)
            if (participants_[i] == participant) return i;
        return std::nullopt;
    }

    GroundTruthTable select_rows(std::span<const std::size_t> rows) const {
        std::vector<std::string> ps;
        for (auto r : rows) ps.push_back(participants_[r]);
        GroundTruthTable out(std::move(ps));
        for (std::size_t i = 0; i < rows.size(); ++i) out.rows_[i] = rows_[rows[i]];
        return out;
    }

    friend bool operator==(const GroundTruthTable&, const GroundTruthTable&) = default;

private:
    std::vector<std::string> participants_;
    std::vector<Row> rows_;
};

}  // namespace jointpred
