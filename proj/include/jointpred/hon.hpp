#pragma once

// Higher-order network features: a signal is averaged over fixed time slots,
// binned into a small alphabet, and each participant's fixed-order
// conditional transition probabilities
//     P(x_t | x_{t-n}, ..., x_{t-1}) = I(context, next) / I(context)
// become a sparse feature vector, reduced by PCA over the training cohort.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jointpred/csv.hpp"
#include "jointpred/data.hpp"
#include "jointpred/reduce.hpp"
#include "jointpred/stats.hpp"

namespace jointpred::hon {

using Symbol = int;
using Context = std::vector<Symbol>;

/// Ascending thresholds; a value's symbol is the number of edges <= value.
struct BinSpec {
    std::vector<double> edges;
    Symbol symbol(double v) const {
        return static_cast<Symbol>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    }
    std::size_t alphabet_size() const { return edges.size() + 1; }
    friend bool operator==(const BinSpec&, const BinSpec&) = default;
};

/// Equal-frequency bins from pooled training values.
inline BinSpec quantile_bins(std::vector<double> values, int n_bins) {
    if (values.empty()) throw EmptySeries("quantile_bins: no values");
    if (n_bins < 2) throw DegenerateInput("quantile_bins: need at least 2 bins");
    std::sort(values.begin(), values.end());
    BinSpec b;
    for (int i = 1; i < n_bins; ++i) b.edges.push_back(stats::quantile(values, double(i) / n_bins));
    b.edges.erase(std::unique(b.edges.begin(), b.edges.end()), b.edges.end());
    return b;
}

struct SlotMean {
    std::int64_t slot = 0;
    double mean = 0.0;
};

/// Mean of the samples in each occupied slot; slots are aligned to the epoch.
inline std::vector<SlotMean> slot_means(const TimeSeries& ts, int slot_minutes) {
    if (slot_minutes <= 0) throw DegenerateInput("slot_minutes must be > 0");
    const std::int64_t width = std::int64_t{slot_minutes} * 60;
    std::vector<SlotMean> out;
    double sum = 0.0;
    int count = 0;
    std::int64_t cur = 0;
    for (const auto& p : ts.points()) {
        std::int64_t s = p.t >= 0 ? p.t / width : -((-p.t + width - 1) / width);
        if (count > 0 && s != cur) {
            out.push_back({cur, sum / count});
            sum = 0.0;
            count = 0;
        }
        cur = s;
        sum += p.value;
        ++count;
    }
    if (count > 0) out.push_back({cur, sum / count});
    return out;
}

/// Symbol sequence split into gap-free segments.
struct DiscreteSeries {
    std::string participant;
    int slot_minutes = 30;
    std::vector<std::vector<Symbol>> segments;

    std::size_t slot_count() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.size();
        return n;
    }
};

/// Slot means mapped to bin symbols. Slots without samples are dropped and
/// start a new segment so no transition spans a gap.
inline DiscreteSeries discretize(const TimeSeries& ts, int slot_minutes, const BinSpec& bins) {
    if (ts.empty()) throw EmptySeries("discretize: empty series for " + ts.participant());
    DiscreteSeries ds{ts.participant(), slot_minutes, {}};
    std::optional<std::int64_t> prev;
    for (const auto& sm : slot_means(ts, slot_minutes)) {
        if (!prev || sm.slot != *prev + 1) ds.segments.emplace_back();
        ds.segments.back().push_back(bins.symbol(sm.mean));
        prev = sm.slot;
    }
    return ds;
}

struct HonModel {
    int order = 1;
    std::map<Context, std::map<Symbol, std::uint64_t>> counts;
    std::map<Context, std::uint64_t> context_counts;

    double probability(const Context& ctx, Symbol next) const {
        auto c = counts.find(ctx);
        if (c == counts.end()) return 0.0;
        auto n = c->second.find(next);
        if (n == c->second.end()) return 0.0;
        return static_cast<double>(n->second) / static_cast<double>(context_counts.at(ctx));
    }
    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& [ctx, nexts] : counts) n += nexts.size();
        return n;
    }
};

/// Counts every length-(order+1) window inside each segment.
inline HonModel build_hon(const DiscreteSeries& ds, int order) {
    if (order < 1) throw OrderTooHigh("order must be >= 1");
    HonModel m;
    m.order = order;
    bool any = false;
    const auto n = static_cast<std::size_t>(order);
    for (const auto& seg : ds.segments) {
        if (seg.size() <= n) continue;
        any = true;
        for (std::size_t t = n; t < seg.size(); ++t) {
            Context ctx(seg.begin() + static_cast<std::ptrdiff_t>(t - n), seg.begin() + static_cast<std::ptrdiff_t>(t));
            ++m.counts[ctx][seg[t]];
            ++m.context_counts[ctx];
        }
    }
    if (!any)
        throw OrderTooHigh("no segment of " + ds.participant + " is longer than order " + std::to_string(order));
    return m;
}

inline std::string context_string(const Context& ctx) {
    std::string s;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(ctx[i]);
    }
    return s;
}

/// Feature key of one transition: "o<order>:<context>><next>".
inline std::string edge_key(int order, const Context& ctx, Symbol next) {
    return "o" + std::to_string(order) + ":" + context_string(ctx) + ">" + std::to_string(next);
}

/// Edge list `context,next,count,prob`.
inline void write_edges(const HonModel& m, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [ctx, nexts] : m.counts)
        for (const auto& [next, c] : nexts)
            rows.push_back({context_string(ctx), std::to_string(next), std::to_string(c),
                            csv::format_number(m.probability(ctx, next))});
    csv::write_file(path, {"context", "next", "count", "prob"}, rows);
}

/// One participant's models, one per order.
using HonProfile = std::map<int, HonModel>;

inline std::map<std::string, double> profile_entries(const HonProfile& profile) {
    std::map<std::string, double> out;
    for (const auto& [order, m] : profile)
        for (const auto& [ctx, nexts] : m.counts)
            for (const auto& [next, c] : nexts) out[edge_key(order, ctx, next)] = m.probability(ctx, next);
    return out;
}

/// Cohort matrix whose columns are the union of all observed transition keys
/// (sorted); unobserved transitions are 0.
inline Block vectorize_cohort(const std::vector<HonProfile>& cohort) {
    if (cohort.size() < 2) throw TooFewParticipants("vectorize_cohort needs >= 2 participants");
    std::set<std::string> keys;
    std::vector<std::map<std::string, double>> entries;
    for (const auto& p : cohort) {
        entries.push_back(profile_entries(p));
        for (const auto& [k, v] : entries.back()) keys.insert(k);
    }
    Block b;
    b.columns.assign(keys.begin(), keys.end());
    b.values = Matrix::Zero(static_cast<Eigen::Index>(cohort.size()), static_cast<Eigen::Index>(keys.size()));
    for (std::size_t r = 0; r < entries.size(); ++r) {
        std::size_t c = 0;
        auto it = entries[r].begin();
        for (const auto& k : b.columns) {
            while (it != entries[r].end() && it->first < k) ++it;
            if (it != entries[r].end() && it->first == k)
                b.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second;
            ++c;
        }
    }
    return b;
}

/// Rows for `profiles` over a fixed key set; transitions outside it are dropped.
inline Matrix vectorize_with_keys(const std::vector<HonProfile>& profiles, const std::vector<std::string>& keys) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(profiles.size()), static_cast<Eigen::Index>(keys.size()));
    for (std::size_t r = 0; r < profiles.size(); ++r) {
        auto e = profile_entries(profiles[r]);
        for (std::size_t c = 0; c < keys.size(); ++c) {
            auto it = e.find(keys[c]);
            if (it != e.end()) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = it->second;
        }
    }
    return out;
}

/// Slot means already computed (gap rules as in `discretize`).
inline DiscreteSeries discretize_slots(const std::string& participant, const std::vector<SlotMean>& slots,
                                       int slot_minutes, const BinSpec& bins) {
    if (slots.empty()) throw EmptySeries("discretize: empty series for " + participant);
    DiscreteSeries ds{participant, slot_minutes, {}};
    std::optional<std::int64_t> prev;
    for (const auto& sm : slots) {
        if (!prev || sm.slot != *prev + 1) ds.segments.emplace_back();
        ds.segments.back().push_back(bins.symbol(sm.mean));
        prev = sm.slot;
    }
    return ds;
}

/// Every possible transition key for an alphabet and a set of orders, in a
/// fixed order: by order, then context (base-alphabet digits), then next.
struct DenseLayout {
    int alphabet = 3;
    std::vector<int> orders;
    std::vector<std::size_t> offset;  // first column of each order
    std::vector<std::string> keys;
};

inline DenseLayout dense_layout(int alphabet, const std::vector<int>& orders) {
    DenseLayout l;
    l.alphabet = alphabet;
    l.orders = orders;
    for (int o : orders) {
        l.offset.push_back(l.keys.size());
        std::size_t contexts = 1;
        for (int i = 0; i < o; ++i) contexts *= static_cast<std::size_t>(alphabet);
        Context ctx(static_cast<std::size_t>(o));
        for (std::size_t c = 0; c < contexts; ++c) {
            std::size_t code = c;
            for (int i = o - 1; i >= 0; --i) {
                ctx[static_cast<std::size_t>(i)] = static_cast<Symbol>(code % static_cast<std::size_t>(alphabet));
                code /= static_cast<std::size_t>(alphabet);
            }
            for (int nx = 0; nx < alphabet; ++nx) l.keys.push_back(edge_key(o, ctx, nx));
        }
    }
    return l;
}

/// Transition probabilities of every order laid out as `layout.keys`;
/// unobserved transitions (and orders longer than every segment) are 0.
/// Matches `profile_entries` of the per-order models.
inline std::vector<double> dense_profile(const DiscreteSeries& ds, const DenseLayout& layout) {
    std::vector<double> out(layout.keys.size(), 0.0);
    const auto a = static_cast<std::size_t>(layout.alphabet);
    std::vector<std::uint64_t> counts;
    for (std::size_t k = 0; k < layout.orders.size(); ++k) {
        const auto o = static_cast<std::size_t>(layout.orders[k]);
        std::size_t contexts = 1;
        for (std::size_t i = 0; i < o; ++i) contexts *= a;
        counts.assign(contexts * a, 0);
        for (const auto& seg : ds.segments) {
            if (seg.size() <= o) continue;
            std::size_t code = 0;
            for (std::size_t t = 0; t < o; ++t) code = code * a + static_cast<std::size_t>(seg[t]);
            for (std::size_t t = o; t < seg.size(); ++t) {
                ++counts[code * a + static_cast<std::size_t>(seg[t])];
                code = (code * a + static_cast<std::size_t>(seg[t])) % contexts;
            }
        }
        for (std::size_t c = 0; c < contexts; ++c) {
            std::uint64_t total = 0;
            for (std::size_t nx = 0; nx < a; ++nx) total += counts[c * a + nx];
            if (total == 0) continue;
            for (std::size_t nx = 0; nx < a; ++nx)
                out[layout.offset[k] + c * a + nx] =
                    static_cast<double>(counts[c * a + nx]) / static_cast<double>(total);
        }
    }
    return out;
}

/// PCA embedding of a cohort matrix. Zero-variance columns are removed before
/// fitting. When fewer informative directions exist than requested, the
/// missing components are zero and a RankDeficient warning is emitted.
struct Embedding {
    std::vector<std::string> keys;      // all key columns expected on input
    std::vector<std::size_t> retained;  // indices into keys fed to PCA
    std::optional<reduce::PcaModel> pca;
    std::size_t components = 5;

    Matrix transform(const Matrix& rows) const {
        Matrix out = Matrix::Zero(rows.rows(), static_cast<Eigen::Index>(components));
        if (!pca) return out;
        Block b;
        b.columns = pca->columns;
        b.values.resize(rows.rows(), static_cast<Eigen::Index>(retained.size()));
        for (std::size_t j = 0; j < retained.size(); ++j)
            b.values.col(static_cast<Eigen::Index>(j)) = rows.col(static_cast<Eigen::Index>(retained[j]));
        Matrix z = reduce::pca_transform(*pca, b);
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            if (pca->explained_variance[static_cast<std::size_t>(j)] > 0.0) out.col(j) = z.col(j);
        return out;
    }
};

inline Embedding embed(const Block& train, std::size_t components = 5) {
    Embedding e;
    e.keys = train.columns;
    e.components = components;
    const auto n = train.values.rows();
    for (std::size_t c = 0; c < train.columns.size(); ++c) {
        auto col = train.values.col(static_cast<Eigen::Index>(c));
        if (col.maxCoeff() > col.minCoeff()) e.retained.push_back(c);
    }
    const auto feasible = std::min<std::size_t>(components, std::min<std::size_t>(
        n > 0 ? static_cast<std::size_t>(n - 1) : 0, e.retained.size()));
    if (feasible == 0) {
        diag::warn("RankDeficient: HON matrix has no informative direction; embedding is zero");
        return e;
    }
    Block b;
    for (auto c : e.retained) b.columns.push_back(train.columns[c]);
    b.values.resize(n, static_cast<Eigen::Index>(e.retained.size()));
    for (std::size_t j = 0; j < e.retained.size(); ++j)
        b.values.col(static_cast<Eigen::Index>(j)) = train.values.col(static_cast<Eigen::Index>(e.retained[j]));
    e.pca = reduce::pca_fit(b, feasible);
    if (feasible < components || e.pca->rank < components)
        diag::warn("RankDeficient: " + std::to_string(std::min(feasible, e.pca->rank)) + " informative HON directions, " +
                   std::to_string(components) + " requested; padding with zero-variance components");
    return e;
}

}  // namespace jointpred::hon
