#include <catch_amalgamated.hpp>

#include <random>

#include "jointpred/reduce.hpp"

using namespace jointpred;
using namespace jointpred::reduce;

namespace {

Block random_block(std::size_t n, std::size_t p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Block b;
    for (std::size_t j = 0; j < p; ++j) b.columns.push_back("f" + std::to_string(j));
    b.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < b.values.rows(); ++i)
        for (Eigen::Index j = 0; j < b.values.cols(); ++j) b.values(i, j) = N(rng) * (1.0 + double(j));
    return b;
}

}  // namespace

TEST_CASE("PCA components are orthonormal and ordered by variance") {
    auto b = random_block(60, 6, 1);
    auto m = pca_fit(b, 4);
    REQUIRE(m.n_components() == 4);
    Matrix g = m.components * m.components.transpose();
    CHECK((g - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t i = 1; i < 4; ++i) CHECK(m.explained_variance[i - 1] >= m.explained_variance[i]);
    double ratio = 0.0;
    for (double r : m.explained_variance_ratio) ratio += r;
    CHECK(ratio <= 1.0 + 1e-12);
}

TEST_CASE("PCA variance matches the covariance eigenvalues") {
    auto b = random_block(80, 5, 2);
    auto m = pca_fit(b, 5);
    Matrix c = b.values.rowwise() - b.values.colwise().mean();
    Matrix cov = c.transpose() * c / double(b.values.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    for (int i = 0; i < 5; ++i)
        CHECK(m.explained_variance[static_cast<std::size_t>(i)] == Catch::Approx(es.eigenvalues()(4 - i)).epsilon(1e-9));
    Matrix back = pca_inverse(m, pca_transform(m, b));
    CHECK((back - b.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("PCA checks its inputs") {
    auto b = random_block(10, 3, 3);
    CHECK_THROWS(pca_fit(b, 0));
    auto m = pca_fit(b, 2);
    auto other = b;
    other.columns[0] = "zz";
    CHECK_THROWS_AS(pca_transform(m, other), SchemaMismatch);
}

TEST_CASE("top-k selection ranks by absolute correlation") {
    Block b;
    b.columns = {"weak", "strong_neg", "noise", "strong"};
    b.values.resize(6, 4);
    std::vector<std::optional<double>> y{1, 2, 3, 4, 5, std::nullopt};
    b.values << 1, 6, 3, 1,
                2, 5, 1, 2,
                4, 4, 6, 3,
                3, 3, 2, 4,
                5, 2, 5, 5,
                99, 99, 99, 99;
    auto mask = select_top_k(b, y, 2);
    REQUIRE(mask.features.size() == 2);
    CHECK(mask.features[0].name == "strong");
    CHECK(mask.features[1].name == "strong_neg");
    CHECK(mask.features[1].score == Catch::Approx(-1.0));
    auto applied = apply_mask(b, mask);
    CHECK(applied.columns == std::vector<std::string>{"strong", "strong_neg"});
    CHECK(applied.values(0, 1) == 6);

    Block constant;
    constant.columns = {"c"};
    constant.values = Matrix::Ones(6, 1);
    CHECK_THROWS_AS(select_top_k(constant, y, 2), NoUsableFeatures);
}
