#pragma once

// Shared domain types for streaming conformal anomaly detection.

#include <cassert>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppcoad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Index into the discrete context set.
struct ContextId {
    std::size_t id = 0;

    constexpr ContextId() = default;
    constexpr explicit ContextId(std::size_t v) : id(v) {}

    friend constexpr auto operator<=>(ContextId, ContextId) = default;
};

/// Ground-truth label of a test point, when known.
enum class Truth : std::uint8_t { inlier = 0, anomaly = 1, unknown = 2 };

inline const char* to_string(Truth t) {
    switch (t) {
    case Truth::inlier: return "0";
    case Truth::anomaly: return "1";
    case Truth::unknown: return "";
    }
    return "";
}

/// Value stored in masked feature slots. Never read before imputation.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One timestep's input: features, missingness mask, context and label.
class Observation {
public:
    Observation() = default;

    Observation(std::vector<double> features, ContextId context, Truth truth = Truth::unknown)
        : features_(std::move(features)), mask_(features_.size(), 0), context_(context), truth_(truth) {
        if (features_.empty()) throw Error("observation needs at least one feature");
    }

    Observation(std::vector<double> features, std::vector<std::uint8_t> mask, ContextId context,
                Truth truth = Truth::unknown)
        : features_(std::move(features)), mask_(std::move(mask)), context_(context), truth_(truth) {
        if (features_.empty()) throw Error("observation needs at least one feature");
        if (features_.size() != mask_.size()) throw Error("features and mask differ in length");
        for (std::size_t i = 0; i < features_.size(); ++i)
            if (mask_[i]) features_[i] = kMissing;
    }

    std::size_t dim() const noexcept { return features_.size(); }
    ContextId context() const noexcept { return context_; }
    Truth truth() const noexcept { return truth_; }
    bool missing(std::size_t i) const { return mask_.at(i) != 0; }
    bool complete() const noexcept {
        for (auto m : mask_)
            if (m) return false;
        return true;
    }
    const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

    /// Value of an observed slot. Reading a masked slot is a programming error.
    double value(std::size_t i) const {
        assert(!mask_.at(i) && "read of a masked feature before imputation");
        return features_.at(i);
    }

    /// Full feature vector; only valid once every slot is observed.
    const std::vector<double>& features() const {
        assert(complete() && "feature vector read before imputation");
        return features_;
    }

    /// Raw storage including sentinels, for serializers and the imputer.
    const std::vector<double>& raw() const noexcept { return features_; }

    void set_context(ContextId c) noexcept { context_ = c; }
    void set_truth(Truth t) noexcept { truth_ = t; }

    void mask_slot(std::size_t i) {
        mask_.at(i) = 1;
        features_[i] = kMissing;
    }

    void fill_slot(std::size_t i, double v) {
        features_.at(i) = v;
        mask_[i] = 0;
    }

    friend bool operator==(const Observation& a, const Observation& b) {
        if (a.context_ != b.context_ || a.truth_ != b.truth_ || a.mask_ != b.mask_) return false;
        for (std::size_t i = 0; i < a.features_.size(); ++i) {
            if (a.mask_[i]) continue;
            if (a.features_[i] != b.features_[i]) return false;
        }
        return a.features_.size() == b.features_.size();
    }

private:
    std::vector<double> features_;
    std::vector<std::uint8_t> mask_;
    ContextId context_{};
    Truth truth_ = Truth::unknown;
};

/// A probability in [0, 1].
class PValue {
public:
    constexpr PValue() = default;

    explicit PValue(double v) : value_(v) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("p-value outside [0, 1]: " + std::to_string(v));
    }

    /// Values above 1 saturate at 1.
    static PValue clamped(double v) {
        if (std::isnan(v) || v < 0.0) throw Error("p-value is negative or NaN");
        return PValue(v > 1.0 ? 1.0 : v);
    }

    constexpr double value() const noexcept { return value_; }

    friend constexpr auto operator<=>(PValue, PValue) = default;

private:
    double value_ = 1.0;
};

/// Outcome of one hypothesis test.
struct Decision {
    bool reject = false;
    double threshold = 0.0;
    PValue statistic;
};

/// Reject iff the statistic is at most the threshold.
inline Decision decide(PValue z, double alpha_t) {
    if (!(alpha_t >= 0.0 && alpha_t <= 1.0)) throw Error("threshold outside [0, 1]");
    return Decision{z.value() <= alpha_t, alpha_t, z};
}

/// Exponentially decayed running sum: value' = delta * value + x.
class DecayedSum {
public:
    explicit DecayedSum(double delta) : delta_(delta) {
        if (!(delta > 0.0 && delta < 1.0)) throw Error("decay factor must lie in (0, 1)");
    }

    DecayedSum update(double x) const {
        if (!(x >= 0.0)) throw Error("decayed sum increments must be non-negative");
        DecayedSum next = *this;
        next.value_ = delta_ * value_ + x;
        return next;
    }

    void push(double x) { *this = update(x); }

    double value() const noexcept { return value_; }
    double delta() const noexcept { return delta_; }

private:
    double delta_;
    double value_ = 0.0;
};

/// Free-function form of DecayedSum::update.
inline DecayedSum decayed_update(const DecayedSum& s, double x) { return s.update(x); }

}  // namespace ppcoad
