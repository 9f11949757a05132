#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "ppcoad/kmeans.hpp"
#include "ppcoad/scoring.hpp"

using namespace ppcoad;

namespace {

Observation obs(std::vector<double> x, std::size_t c = 0, Truth t = Truth::inlier) {
    return Observation(std::move(x), ContextId{c}, t);
}

}  // namespace

TEST(DensityScoreTest, ClosedFormOneDimensional) {
    const std::vector<Observation> train{obs({0.0}), obs({2.0})};
    const auto m = fit_density_score(train, 1);
    const double expected = 0.5 * std::log(2.0 * std::numbers::pi * (1.0 + kVarianceFloor));
    EXPECT_NEAR(m->score(std::vector<double>{1.0}, ContextId{0}), expected, 1e-12);
    EXPECT_NEAR(expected, 0.9189, 1e-4);
}

TEST(DensityScoreTest, MinimizedAtTheMean) {
    const std::vector<Observation> train{obs({0.0}), obs({2.0}), obs({1.0})};
    const auto m = fit_density_score(train, 1);
    const double at_mean = m->score(std::vector<double>{1.0}, ContextId{0});
    for (double x : {-1.0, 0.5, 0.99, 1.01, 3.0}) EXPECT_GT(m->score(std::vector<double>{x}, ContextId{0}), at_mean);
}

TEST(DensityScoreTest, ContextsDiffer) {
    const std::vector<Observation> train{obs({0.0}, 0), obs({2.0}, 0), obs({10.0}, 1), obs({14.0}, 1)};
    const auto m = fit_density_score(train, 2);
    const std::vector<double> x{3.3};
    EXPECT_NE(m->score(x, ContextId{0}), m->score(x, ContextId{1}));

    const auto pooled = fit_density_score(train, 2, ContextMode::agnostic);
    EXPECT_EQ(pooled->score(x, ContextId{0}), pooled->score(x, ContextId{1}));
}

TEST(DensityScoreTest, Errors) {
    EXPECT_THROW(fit_density_score(std::vector<Observation>{obs({0.0}), obs({1.0}, 0, Truth::anomaly)}, 1), Error);
    EXPECT_THROW(fit_density_score(std::vector<Observation>{obs({0.0}, 0), obs({1.0}, 0), obs({1.0}, 1)}, 2), Error);
}

TEST(KMeansScoreTest, HandExamples) {
    Rng rng(1);
    const std::vector<Observation> train{obs({0.0, 0.0}), obs({10.0, 10.0})};
    const auto m = fit_kmeans_score(train, 2, 1, ContextMode::aware, rng);
    EXPECT_NEAR(m->score(std::vector<double>{0.0, 0.0}, ContextId{0}), 0.0, 1e-12);
    EXPECT_NEAR(m->score(std::vector<double>{5.0, 5.0}, ContextId{0}), std::sqrt(50.0), 1e-12);
}

TEST(KMeansScoreTest, SingleClusterIsGlobalMean) {
    Rng rng(2);
    const std::vector<Observation> train{obs({0.0, 1.0}), obs({2.0, 3.0}), obs({4.0, 8.0})};
    const auto m = fit_kmeans_score(train, 1, 1, ContextMode::aware, rng);
    ASSERT_EQ(m->centroids(0).size(), 1u);
    EXPECT_NEAR(m->centroids(0)[0][0], 2.0, 1e-12);
    EXPECT_NEAR(m->centroids(0)[0][1], 4.0, 1e-12);
    EXPECT_NEAR(m->score(std::vector<double>{2.0, 0.0}, ContextId{0}), 4.0, 1e-12);
}

TEST(KMeansScoreTest, DuplicateCentroidsRejected) {
    Rng rng(3);
    const std::vector<Observation> train{obs({1.0}), obs({1.0}), obs({1.0}), obs({2.0})};
    EXPECT_THROW(fit_kmeans_score(train, 3, 1, ContextMode::aware, rng), Error);
}

TEST(LloydTest, ObjectiveNonIncreasingAndDeterministic) {
    Rng data(9);
    std::vector<Point> pts;
    for (int i = 0; i < 600; ++i) pts.push_back({data.normal(i % 3 * 4.0, 1.0), data.normal(0.0, 1.0)});
    Rng a(4), b(4);
    const auto ra = lloyd_kmeans(pts, KMeansOptions{5}, a);
    const auto rb = lloyd_kmeans(pts, KMeansOptions{5}, b);
    EXPECT_EQ(ra.centroids, rb.centroids);
    for (std::size_t i = 1; i < ra.objective.size(); ++i) EXPECT_LE(ra.objective[i], ra.objective[i - 1] + 1e-9);
    EXPECT_TRUE(ra.converged);
}

TEST(NaiveBayesTest, HandExamples) {
    using detail::DiagGaussian;
    NaiveBayesScore::SlotModel sym{{0.5, DiagGaussian{{-1.0}, {1.0}}}, {0.5, DiagGaussian{{1.0}, {1.0}}}};
    NaiveBayesScore m({sym}, 1, ContextMode::aware);
    EXPECT_NEAR(m.score(std::vector<double>{0.0}, ContextId{0}), 0.5, 1e-15);
    EXPECT_NEAR(m.score(std::vector<double>{50.0}, ContextId{0}), 1.0, 1e-12);
    EXPECT_NEAR(m.score(std::vector<double>{-800.0}, ContextId{0}), 0.0, 1e-12);  // no overflow far out

    NaiveBayesScore::SlotModel prior{{0.9, DiagGaussian{{0.0}, {1.0}}}, {0.1, DiagGaussian{{0.0}, {1.0}}}};
    NaiveBayesScore p({prior}, 1, ContextMode::aware);
    EXPECT_NEAR(p.score(std::vector<double>{0.7}, ContextId{0}), 0.1, 1e-12);
}

TEST(NaiveBayesTest, FitNeedsBothClasses) {
    EXPECT_THROW(fit_supervised_score(std::vector<Observation>{obs({0.0}), obs({1.0})}, 1), Error);
    EXPECT_THROW(fit_supervised_score(std::vector<Observation>{obs({0.0}), obs({1.0}, 0, Truth::unknown)}, 1), Error);
    const std::vector<Observation> ok{obs({0.0}), obs({0.5}), obs({5.0}, 0, Truth::anomaly), obs({6.0}, 0, Truth::anomaly)};
    const auto m = fit_supervised_score(ok, 1);
    EXPECT_LT(m->score(std::vector<double>{0.2}, ContextId{0}), 0.5);
    EXPECT_GT(m->score(std::vector<double>{5.5}, ContextId{0}), 0.5);
}

TEST(QuantileTest, LowerEmpiricalQuantile) {
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) v.push_back(i);
    EXPECT_EQ(lower_quantile(v, 0.9), 90.0);
    EXPECT_EQ(lower_quantile(v, 1.0 - 1e-12), 100.0);
    EXPECT_EQ(lower_quantile(std::vector<double>(7, 3.5), 0.9), 3.5);
}

TEST(QuantileTest, FixedThresholdFlagsStrictExceedance) {
    std::vector<Observation> train;
    for (int i = 0; i < 20; ++i) train.push_back(obs({1.0}));
    train.push_back(obs({3.0}));
    const auto m = fit_density_score(train, 1);
    const auto thr = fit_fixed_threshold(*m, train, 0.1);
    EXPECT_TRUE(thr.warnings.empty());
    EXPECT_FALSE(thr.flags(thr.at(ContextId{0}), ContextId{0}));
    EXPECT_TRUE(thr.flags(std::nextafter(thr.at(ContextId{0}), 1e300), ContextId{0}));

    const auto few = fit_fixed_threshold(*m, std::vector<Observation>(train.begin(), train.begin() + 5), 0.1);
    EXPECT_EQ(few.warnings.size(), 1u);
}
