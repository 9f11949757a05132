#pragma once

// Conformal, proxy and active p-values, and the real-data acquisition rule.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "ppcoad/core.hpp"
#include "ppcoad/random.hpp"

namespace ppcoad {

/// Largest admissible acquisition propensity is 1 - kGammaMargin, so the
/// inflation factor 1 / (1 - gamma) stays bounded.
inline constexpr double kGammaMargin = 1e-3;
inline constexpr double kGammaMax = 1.0 - kGammaMargin;

enum class BatchKind { real, synthetic };

/// Scores of one calibration batch under the current score model and context.
class CalibrationBatch {
public:
    CalibrationBatch(std::vector<double> scores, BatchKind kind) : scores_(std::move(scores)), kind_(kind) {
        if (scores_.empty()) throw Error("calibration batch is empty");
        for (double s : scores_)
            if (!std::isfinite(s)) throw Error("calibration batch holds a non-finite score");
    }

    std::span<const double> scores() const noexcept { return scores_; }
    std::size_t size() const noexcept { return scores_.size(); }
    BatchKind kind() const noexcept { return kind_; }

private:
    std::vector<double> scores_;
    BatchKind kind_;
};

/// Rank p-value of test_score against the batch. plus_one adds the test point
/// itself to the count, which makes the p-value superuniform; without it the
/// statistic can be 0 under the null.
inline PValue conformal_pvalue(const CalibrationBatch& cal, double test_score, bool plus_one = true) {
    if (!std::isfinite(test_score)) throw Error("test score is not finite");
    std::size_t exceed = 0;
    for (double s : cal.scores())
        if (s >= test_score) ++exceed;
    const double num = static_cast<double>(exceed + (plus_one ? 1 : 0));
    return PValue(num / static_cast<double>(cal.size() + 1));
}

inline void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma <= kGammaMax))
        throw Error("acquisition propensity gamma must lie in (0, " + std::to_string(kGammaMax) + "]");
}

/// Probability of buying real calibration data: 1 - gamma * q.
inline double acquisition_probability(PValue q, double gamma) {
    check_gamma(gamma);
    return 1.0 - gamma * q.value();
}

/// Bernoulli draw of the acquisition indicator.
inline bool draw_acquisition(PValue q, double gamma, Rng& rng) {
    return rng.bernoulli(acquisition_probability(q, gamma));
}

/// Z = q if no real data was bought, otherwise min(1, p / (1 - gamma)).
inline PValue active_pvalue(PValue q, bool acquired, std::optional<PValue> p, double gamma) {
    if (!acquired) return q;
    if (!p) throw Error("active p-value: real data acquired but no real p-value supplied");
    check_gamma(gamma);
    return PValue::clamped(p->value() / (1.0 - gamma));
}

/// Record of one acquisition decision.
struct AcquisitionOutcome {
    bool u = false;
    PValue q;
    std::optional<PValue> p;
    PValue z;
    double gamma = kGammaMax;
};

}  // namespace ppcoad
