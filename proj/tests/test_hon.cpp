#include <catch_amalgamated.hpp>

#include "jointpred/hon.hpp"
#include "oracles.hpp"

using namespace jointpred;
using namespace jointpred::hon;

namespace {

DiscreteSeries one_segment(std::vector<int> seq) { return DiscreteSeries{"p", 30, {std::move(seq)}}; }

}  // namespace

TEST_CASE("HON matches window counting on random sequences") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int alphabet = 2 + static_cast<int>(rng() % 4);
        const int order = 1 + static_cast<int>(rng() % 3);
        const std::size_t len = static_cast<std::size_t>(order) + 1 + rng() % 100;
        std::vector<int> seq(len);
        for (auto& s : seq) s = static_cast<int>(rng() % static_cast<std::uint64_t>(alphabet));
        auto m = build_hon(one_segment(seq), order);
        auto expect = oracle::hon_probabilities(seq, order);
        REQUIRE(m.counts.size() == expect.size());
        for (const auto& [ctx, nexts] : expect) {
            double total = 0.0;
            for (const auto& [nx, p] : nexts) {
                CHECK(std::abs(m.probability(ctx, nx) - p) <= 1e-12);
                total += m.probability(ctx, nx);
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("transitions never span a gap") {
    DiscreteSeries ds{"p", 30, {{0, 1}, {2, 0}}};
    auto m = build_hon(ds, 1);
    CHECK(m.probability({1}, 2) == 0.0);
    CHECK(m.probability({0}, 1) == 1.0);
    CHECK(m.probability({2}, 0) == 1.0);
    CHECK(m.edge_count() == 2);

    auto start = make_timestamp(2021, 1, 1);
    auto ts = TimeSeries::from_points("p", "hr", {{start, 1}, {start + 1800, 2}, {start + 3 * 1800, 3}});
    auto d = discretize(ts, 30, BinSpec{{1.5, 2.5}});
    REQUIRE(d.segments.size() == 2);
    CHECK(d.segments[0] == std::vector<int>{0, 1});
    CHECK(d.segments[1] == std::vector<int>{2});
}

TEST_CASE("order longer than every segment is an error") {
    CHECK_THROWS_AS(build_hon(one_segment({0, 1, 0}), 3), OrderTooHigh);
    CHECK_THROWS_AS(build_hon(one_segment({0, 1, 0}), 0), OrderTooHigh);
    CHECK_NOTHROW(build_hon(one_segment({0, 1, 0}), 2));
}

TEST_CASE("quantile bins split pooled values evenly") {
    std::vector<double> v;
    for (int i = 0; i < 300; ++i) v.push_back(i);
    auto b = quantile_bins(v, 3);
    REQUIRE(b.alphabet_size() == 3);
    std::array<int, 3> counts{};
    for (double x : v) ++counts[static_cast<std::size_t>(b.symbol(x))];
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    CHECK(counts[2] == 100);
    CHECK_THROWS_AS(quantile_bins({}, 3), EmptySeries);
}

TEST_CASE("dense profile agrees with the sparse models") {
    std::mt19937_64 rng(5);
    std::vector<int> a(150), b(4);
    for (auto& s : a) s = static_cast<int>(rng() % 3);
    for (auto& s : b) s = static_cast<int>(rng() % 3);
    DiscreteSeries ds{"p", 30, {a, b}};
    auto layout = dense_layout(3, {1, 2, 3, 4, 5});
    CHECK(layout.keys.size() == 3 * (3 + 9 + 27 + 81 + 243));
    auto dense = dense_profile(ds, layout);
    HonProfile prof;
    for (int o : layout.orders) prof[o] = build_hon(ds, o);
    auto sparse = profile_entries(prof);
    for (std::size_t k = 0; k < layout.keys.size(); ++k) {
        auto it = sparse.find(layout.keys[k]);
        CHECK(dense[k] == (it == sparse.end() ? 0.0 : it->second));
    }
}

TEST_CASE("cohort vectorization uses the union of keys") {
    HonProfile p1{{1, build_hon(one_segment({0, 1, 0, 1}), 1)}};
    HonProfile p2{{1, build_hon(one_segment({2, 2, 2}), 1)}};
    auto b = vectorize_cohort({p1, p2});
    CHECK(b.columns == std::vector<std::string>{"o1:0>1", "o1:1>0", "o1:2>2"});
    CHECK(b.values(0, 0) == 1.0);
    CHECK(b.values(1, 0) == 0.0);
    CHECK(b.values(1, 2) == 1.0);
    CHECK_THROWS_AS(vectorize_cohort({p1}), TooFewParticipants);
}

TEST_CASE("embedding pads missing directions with zeros") {
    Block train;
    train.columns = {"a", "b", "c"};
    train.values.resize(4, 3);
    train.values << 1, 0, 5, 2, 0, 5, 3, 0, 5, 4, 0, 5;
    auto e = embed(train, 3);
    CHECK(e.retained == std::vector<std::size_t>{0});
    Matrix z = e.transform(train.values);
    CHECK(z.cols() == 3);
    CHECK(z.col(1).isZero());
    CHECK(z.col(2).isZero());
    CHECK(std::abs(z(0, 0) - z(3, 0)) == Catch::Approx(3.0));
}
