#include <catch_amalgamated.hpp>

#include <random>

#include "jointpred/impute.hpp"

using namespace jointpred;
using namespace jointpred::impute;

namespace {

FeatureMatrix matrix(ModalityKind m, std::size_t n, std::size_t p, std::uint64_t seed, double missing,
                     double absent) {
    std::vector<std::string> pids, cols;
    for (std::size_t i = 0; i < n; ++i) pids.push_back("p" + std::to_string(i));
    for (std::size_t j = 0; j < p; ++j) cols.push_back(std::string(modality_name(m)) + ".f" + std::to_string(j));
    FeatureMatrix out(m, pids, cols);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U;
    for (std::size_t i = 0; i < n; ++i) {
        bool gone = U(rng) < absent;
        for (std::size_t j = 0; j < p; ++j)
            if (!gone && U(rng) >= missing) out.set(i, j, 10.0 * U(rng) + double(j));
    }
    return out;
}

}  // namespace

TEST_CASE("per-feature strategies use training statistics") {
    FeatureMatrix train(ModalityKind::PhoneAgent, {"a", "b", "c", "d"}, {"x", "y", "z"});
    train.set(0, 0, 1.0);
    train.set(1, 0, 2.0);
    train.set(2, 0, 9.0);
    train.set(0, 1, 4.0);
    train.set(3, 1, 6.0);
    ImputePolicy policy;
    policy.by_feature["x"] = ImputeStrategy::Median;
    policy.by_feature["y"] = ImputeStrategy::Zero;
    auto imp = fit_block_imputer(train, policy);
    REQUIRE(imp.columns == std::vector<std::string>{"x", "y", "z"});
    CHECK(imp.fill[0] == 2.0);
    CHECK(imp.fill[1] == 0.0);
    // No observed z: the modality-wide training mean.
    CHECK(imp.fill[2] == Catch::Approx((1.0 + 2.0 + 9.0 + 4.0 + 6.0) / 5.0));
    CHECK(imp.strategy[2] == "global_mean");

    Audit audit;
    auto done = apply_block_imputer(imp, train, &audit);
    CHECK(done.values(3, 0) == 2.0);
    CHECK(done.values(1, 1) == 0.0);
    CHECK(audit.size() == 1 + 2 + 4);

    FeatureMatrix other(ModalityKind::PhoneAgent, {"e"}, {"x", "y"});
    CHECK_THROWS_AS(apply_block_imputer(imp, other), SchemaMismatch);
}

TEST_CASE("availability threshold drops sparse columns") {
    FeatureMatrix train(ModalityKind::Wearable, {"a", "b", "c", "d", "e"}, {"dense", "sparse"});
    for (std::size_t r = 0; r < 5; ++r) train.set(r, 0, double(r));
    train.set(0, 1, 1.0);
    auto imp = fit_block_imputer(train, {}, 0.5);
    CHECK(imp.columns == std::vector<std::string>{"dense"});
    CHECK(imp.dropped == std::vector<std::string>{"sparse"});
}

TEST_CASE("rolling mean uses only earlier observations") {
    auto out = rolling_mean_impute({std::nullopt, 2.0, std::nullopt, 4.0, std::nullopt}, 7.0);
    CHECK(out == std::vector<double>{7.0, 2.0, 2.0, 4.0, 3.0});
}

TEST_CASE("cluster imputation with one cluster equals mean imputation") {
    std::vector<FeatureMatrix> train{matrix(ModalityKind::Wearable, 60, 4, 1, 0.1, 0.1),
                                     matrix(ModalityKind::PhoneAgent, 60, 3, 2, 0.1, 0.2),
                                     matrix(ModalityKind::Beacon, 60, 2, 3, 0.0, 0.3)};
    ImputationOptions opt;
    opt.clusters = 1;
    opt.seed = 9;
    auto cluster = fit_imputation(train, opt);
    opt.modality_strategy = ImputeStrategy::Mean;
    auto mean = fit_imputation(train, opt);
    REQUIRE(cluster.cross);
    auto a = apply_imputation(cluster, train);
    auto b = apply_imputation(mean, train);
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK((a[k].values - b[k].values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cluster imputation fills absent blocks from the matched cluster") {
    std::vector<FeatureMatrix> train{matrix(ModalityKind::Wearable, 80, 3, 4, 0.0, 0.0),
                                     matrix(ModalityKind::PhoneAgent, 80, 3, 5, 0.0, 0.25)};
    ImputationOptions opt;
    opt.clusters = 3;
    auto fit = fit_imputation(train, opt);
    Audit audit;
    auto done = apply_imputation(fit, train, &audit);
    for (const auto& b : done) CHECK(b.values.allFinite());
    bool any_cluster = false;
    for (const auto& e : audit) any_cluster = any_cluster || e.strategy == "cluster_cross_stream";
    CHECK(any_cluster);
    for (std::size_t r = 0; r < train[1].rows(); ++r) {
        if (!train[1].row_all_missing(r)) continue;
        std::vector<const Eigen::VectorXd*> row(2, nullptr);
        Eigen::VectorXd w = done[0].values.row(static_cast<Eigen::Index>(r)).transpose();
        row[0] = &w;
        auto [filled, c] = apply_cross_stream(*fit.cross, row);
        REQUIRE(c);
        for (Eigen::Index j = 0; j < 3; ++j)
            CHECK(done[1].values(static_cast<Eigen::Index>(r), j) == fit.cross->centroids[*c][1][static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("kmeans needs enough donor rows") {
    Matrix x = Matrix::Random(3, 2);
    CHECK_THROWS_AS(kmeans(x, 4, 1), NoDonorRows);
    auto km = kmeans(x, 1, 1);
    CHECK((km.centers.row(0) - x.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
}
