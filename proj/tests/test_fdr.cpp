#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ppcoad/fdr.hpp"

using namespace ppcoad;

TEST(Zeta, NormalizedPositiveDecreasing) {
    const auto& z = *ZetaSequence::shared_default();
    long double sum = 0.0L;
    for (std::size_t t = 1; t <= z.horizon(); ++t) sum += z(t);
    EXPECT_NEAR(static_cast<double>(sum), 1.0, 1e-9);
    for (std::size_t t = 2; t < 2000; ++t) {
        ASSERT_GT(z(t), 0.0);
        ASSERT_LE(z(t + 1), z(t));
    }
    EXPECT_THROW(z(0), Error);
    EXPECT_THROW(z(z.horizon() + 1), Error);
}

TEST(Zeta, RatioOfFirstTerms) {
    // t = 1 uses log(max(1, 2)) so zeta_1 / zeta_2 = 2 * exp(sqrt(log 2)).
    const auto& z = *ZetaSequence::shared_default();
    EXPECT_NEAR(z(1) / z(2), 2.0 * std::exp(std::sqrt(std::log(2.0))), 1e-12);
    EXPECT_NEAR(z(1) / z(2), 4.599, 1e-3);
}

TEST(Lord, NoDetectionsUsesFloor) {
    DecayingLord lord(LordParams{0.1, 0.99, 1.0});
    const auto& z = *ZetaSequence::shared_default();
    for (std::size_t t = 1; t <= 500; ++t) {
        ASSERT_DOUBLE_EQ(lord.next_threshold(), 0.1 * std::max(z(t), 0.01));
        lord.record(false);
    }
    // at t = 500 zeta_t is below 1 - delta, so the floor is active
    EXPECT_LT(z(500), 0.01);
    EXPECT_NEAR(lord.next_threshold(), 0.001, 1e-15);
}

TEST(Lord, OneDetectionAddsOneTerm) {
    const auto& z = *ZetaSequence::shared_default();
    DecayingLord lord(LordParams{0.1, 0.99, 1.0});
    for (int t = 1; t < 300; ++t) lord.record(false);
    lord.record(true);  // rho = 300
    EXPECT_NEAR(lord.next_threshold(), 0.001 + 0.1 * 0.99 * z(1), 1e-15);
}

TEST(Lord, ZeroAlphaNeverRejects) {
    DecayingLord lord(LordParams{0.0, 0.95, 1.0});
    for (int t = 0; t < 50; ++t) {
        EXPECT_EQ(lord.next_threshold(), 0.0);
        lord.record(t % 3 == 0);
    }
}

TEST(Lord, CausalityIgnoresCurrentAndFutureDetections) {
    DetectorState s(LordParams{0.1, 0.99, 1.0});
    s.t = 10;
    s.detection_times = {4, 10, 12};
    DetectorState past = s;
    past.detection_times = {4};
    EXPECT_EQ(next_threshold(s), next_threshold(past));
}

TEST(Lord, DetectionNeverLowersThreshold) {
    DecayingLord a(LordParams{0.1, 0.95, 1.0}), b(LordParams{0.1, 0.95, 1.0});
    for (int t = 0; t < 100; ++t) {
        const bool extra = t % 7 == 3;
        a.record(false);
        b.record(extra);
        ASSERT_GE(b.next_threshold(), a.next_threshold());
    }
}

TEST(Lord, ParameterValidation) {
    EXPECT_THROW(DetectorState(LordParams{1.0, 0.9, 1.0}), Error);
    EXPECT_THROW(DetectorState(LordParams{0.1, 1.0, 1.0}), Error);
    EXPECT_THROW(DetectorState(LordParams{0.1, 0.9, 0.0}), Error);
}

namespace {

StepInput fixed_input(double test, std::vector<double> syn, std::vector<double> real, double gamma, int* real_calls) {
    StepInput in;
    in.test_score = test;
    in.truth = Truth::inlier;
    in.gamma = gamma;
    in.synthetic_batch = [syn] { return CalibrationBatch(syn, BatchKind::synthetic); };
    in.real_batch = [real, real_calls] {
        ++*real_calls;
        return CalibrationBatch(real, BatchKind::real);
    };
    return in;
}

}  // namespace

TEST(Step, ZeroPValueAlwaysDetects) {
    int calls = 0;
    // Q = 0 forces U = 1; P = 0 gives Z = 0.
    Detector<> det(DecayingLord(LordParams{}), DetectorOptions{AcquisitionRule::active, false});
    Rng rng(1);
    const auto rec = det.step(fixed_input(10.0, {1, 2}, {1, 2}, 0.5, &calls), rng);
    EXPECT_TRUE(rec.u);
    EXPECT_EQ(rec.z, 0.0);
    EXPECT_TRUE(rec.decision);
}

TEST(Step, MaximalPValueNeverDetects) {
    int calls = 0;
    Detector<> det(DecayingLord(LordParams{}), DetectorOptions{AcquisitionRule::never_real, true});
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto rec = det.step(fixed_input(-10.0, {1, 2}, {1, 2}, 0.5, &calls), rng);
        EXPECT_EQ(rec.z, 1.0);
        EXPECT_FALSE(rec.decision);
        EXPECT_FALSE(rec.u);
        EXPECT_FALSE(rec.p.has_value());
    }
    EXPECT_EQ(calls, 0);  // never-real never touches real data
}

TEST(Step, AlwaysRealUsesRealPValue) {
    int calls = 0;
    Detector<> det(DecayingLord(LordParams{}), DetectorOptions{AcquisitionRule::always_real, true});
    Rng rng(1);
    const auto rec = det.step(fixed_input(2.5, {9, 9}, {1, 2, 3, 4}, 0.5, &calls), rng);
    EXPECT_TRUE(rec.u);
    EXPECT_FALSE(rec.q.has_value());
    EXPECT_DOUBLE_EQ(*rec.p, 0.6);
    EXPECT_EQ(rec.z, rec.p);
    EXPECT_EQ(calls, 1);
}

TEST(Step, ActiveOnlyFetchesRealDataWhenAcquired) {
    int calls = 0;
    Detector<> det(DecayingLord(LordParams{}), DetectorOptions{AcquisitionRule::active, true});
    Rng rng(3);
    std::size_t acquired = 0;
    for (int t = 0; t < 200; ++t) {
        const auto rec = det.step(fixed_input(0.5, {0, 1, 2, 3}, {0, 1, 2, 3}, 0.9, &calls), rng);
        acquired += rec.u;
        EXPECT_EQ(rec.p.has_value(), rec.u);
        EXPECT_EQ(rec.t, static_cast<std::size_t>(t + 1));
    }
    EXPECT_EQ(static_cast<std::size_t>(calls), acquired);
}

TEST(Step, ReplayIsBitwiseIdentical) {
    auto run = [] {
        Rng data(77), acq(78);
        Detector<> det(DecayingLord(LordParams{0.2, 0.95, 1.0}), DetectorOptions{});
        std::vector<StepRecord> out;
        for (int t = 0; t < 300; ++t) {
            std::vector<double> syn(30), real(30);
            for (auto& s : syn) s = data.normal(0.0, 0.5);
            for (auto& s : real) s = data.normal();
            const double test = data.normal(data.uniform() < 0.2 ? 3.0 : 0.0, 1.0);
            StepInput in;
            in.test_score = test;
            in.truth = Truth::inlier;
            in.gamma = 0.6;
            in.synthetic_batch = [syn] { return CalibrationBatch(syn, BatchKind::synthetic); };
            in.real_batch = [real] { return CalibrationBatch(real, BatchKind::real); };
            out.push_back(det.step(in, acq));
        }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Step, MissingSourceIsAnError) {
    Detector<> det(DecayingLord(LordParams{}), DetectorOptions{AcquisitionRule::always_real, true});
    Rng rng(1);
    StepInput in;
    EXPECT_THROW(det.step(in, rng), Error);
}
