#pragma once

// Decaying-memory LORD thresholds and the sequential detector loop.

#include <cmath>
#include <concepts>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ppcoad/conformal.hpp"
#include "ppcoad/core.hpp"
#include "ppcoad/random.hpp"

namespace ppcoad {

/// Default horizon over which the spending sequence is normalized.
inline constexpr std::size_t kZetaHorizon = 1'000'000;

/// Non-increasing spending sequence zeta_t proportional to
/// log(max(t, 2)) / (t * exp(sqrt(log t))), normalized to sum to 1 over 1..horizon.
class ZetaSequence {
public:
    explicit ZetaSequence(std::size_t horizon = kZetaHorizon) : values_(horizon) {
        if (horizon == 0) throw Error("zeta horizon must be positive");
        long double total = 0.0L;
        for (std::size_t t = 1; t <= horizon; ++t) {
            const double raw = unnormalized(t);
            values_[t - 1] = raw;
            total += raw;
        }
        norm_ = static_cast<double>(1.0L / total);
        for (auto& v : values_) v = static_cast<double>(static_cast<long double>(v) / total);
    }

    static double unnormalized(std::size_t t) {
        const double td = static_cast<double>(t);
        const double lt = std::log(td);
        return std::log(std::max(td, 2.0)) / (td * std::exp(std::sqrt(lt)));
    }

    /// zeta_t for 1 <= t <= horizon.
    double operator()(std::size_t t) const {
        if (t == 0 || t > values_.size())
            throw Error("zeta index " + std::to_string(t) + " outside 1.." + std::to_string(values_.size()));
        return values_[t - 1];
    }

    std::size_t horizon() const noexcept { return values_.size(); }
    double normalization() const noexcept { return norm_; }

    /// Process-wide sequence at the default horizon, built on first use.
    static std::shared_ptr<const ZetaSequence> shared_default() {
        static const auto seq = std::make_shared<const ZetaSequence>();
        return seq;
    }

private:
    std::vector<double> values_;
    double norm_ = 1.0;
};

struct LordParams {
    double alpha = 0.1;
    double delta = 0.99;
    double eta = 1.0;
};

/// Sequential LORD state. `t` is the timestep about to be tested (1-based);
/// detection_times holds every rejection strictly before t.
struct DetectorState {
    std::size_t t = 1;
    std::vector<std::size_t> detection_times;
    LordParams params;
    std::shared_ptr<const ZetaSequence> zeta = ZetaSequence::shared_default();

    DetectorState() = default;
    explicit DetectorState(LordParams p, std::shared_ptr<const ZetaSequence> z = ZetaSequence::shared_default())
        : params(p), zeta(std::move(z)) {
        if (!(p.alpha >= 0.0 && p.alpha < 1.0)) throw Error("target level alpha must lie in [0, 1)");
        if (!(p.delta > 0.0 && p.delta < 1.0)) throw Error("decay delta must lie in (0, 1)");
        if (!(p.eta > 0.0)) throw Error("smoothing eta must be positive");
    }

    /// Close timestep t with the given decision.
    void record(bool reject) {
        if (reject) detection_times.push_back(t);
        ++t;
    }
};

/// alpha_t = alpha * eta * max(zeta_t, 1 - delta)
///         + alpha * sum_{rho_j <= t-1} delta^(t - rho_j) * zeta_(t - rho_j)
inline double next_threshold(const DetectorState& s) {
    const auto& p = s.params;
    const auto& zeta = *s.zeta;
    double a = p.alpha * p.eta * std::max(zeta(s.t), 1.0 - p.delta);
    for (std::size_t rho : s.detection_times) {
        if (rho >= s.t) continue;  // causality: only past decisions earn wealth
        const std::size_t lag = s.t - rho;
        a += p.alpha * std::pow(p.delta, static_cast<double>(lag)) * zeta(lag);
    }
    return a;
}

/// Anything that yields a threshold for the current step and then learns the decision.
template <class S>
concept ThresholdSchedule = requires(S s, const S cs, bool reject) {
    { cs.next_threshold() } -> std::convertible_to<double>;
    s.record(reject);
};

/// Decaying-memory LORD as a ThresholdSchedule.
class DecayingLord {
public:
    explicit DecayingLord(LordParams p, std::shared_ptr<const ZetaSequence> z = ZetaSequence::shared_default())
        : state_(p, std::move(z)) {}

    double next_threshold() const { return ppcoad::next_threshold(state_); }
    void record(bool reject) { state_.record(reject); }
    const DetectorState& state() const noexcept { return state_; }

private:
    DetectorState state_;
};

static_assert(ThresholdSchedule<DecayingLord>);

/// How a step decides whether to use real calibration data.
enum class AcquisitionRule { active, always_real, never_real };

/// Audit row for one timestep.
struct StepRecord {
    std::size_t t = 0;
    ContextId context;
    std::optional<double> q;
    bool u = false;
    std::optional<double> p;
    std::optional<double> z;
    std::optional<double> alpha_t;
    bool decision = false;
    Truth truth = Truth::unknown;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Inputs of one detector step. Calibration batches are produced lazily so
/// real data is only fetched when the acquisition rule asks for it.
struct StepInput {
    ContextId context;
    double test_score = 0.0;
    Truth truth = Truth::unknown;
    std::function<CalibrationBatch()> synthetic_batch;
    std::function<CalibrationBatch()> real_batch;
    double gamma = kGammaMax;
};

struct DetectorOptions {
    AcquisitionRule rule = AcquisitionRule::active;
    bool plus_one = true;
};

/// One pass of the detection loop: proxy p-value, acquisition draw, optional
/// real p-value, active p-value, threshold, decision.
template <ThresholdSchedule Schedule>
StepRecord step(Schedule& schedule, std::size_t t, const StepInput& in, const DetectorOptions& opt, Rng& rng) {
    StepRecord rec;
    rec.t = t;
    rec.context = in.context;
    rec.truth = in.truth;

    auto real_pvalue = [&] {
        if (!in.real_batch) throw Error("step needs real calibration data but no source was given");
        return conformal_pvalue(in.real_batch(), in.test_score, opt.plus_one);
    };
    auto proxy_pvalue = [&] {
        if (!in.synthetic_batch) throw Error("step needs synthetic calibration data but no source was given");
        return conformal_pvalue(in.synthetic_batch(), in.test_score, opt.plus_one);
    };

    PValue z;
    switch (opt.rule) {
    case AcquisitionRule::always_real: {
        const PValue p = real_pvalue();
        rec.u = true;
        rec.p = p.value();
        z = p;
        break;
    }
    case AcquisitionRule::never_real: {
        const PValue q = proxy_pvalue();
        rec.q = q.value();
        z = q;
        break;
    }
    case AcquisitionRule::active: {
        const PValue q = proxy_pvalue();
        rec.q = q.value();
        rec.u = draw_acquisition(q, in.gamma, rng);
        std::optional<PValue> p;
        if (rec.u) {
            p = real_pvalue();
            rec.p = p->value();
        }
        z = active_pvalue(q, rec.u, p, in.gamma);
        break;
    }
    }

    const double alpha_t = std::min(1.0, static_cast<double>(schedule.next_threshold()));
    const Decision d = decide(z, alpha_t);
    rec.z = z.value();
    rec.alpha_t = alpha_t;
    rec.decision = d.reject;
    schedule.record(d.reject);
    return rec;
}

/// A detector bundles the threshold schedule with a timestep counter.
template <ThresholdSchedule Schedule = DecayingLord>
class Detector {
public:
    Detector(Schedule schedule, DetectorOptions opt) : schedule_(std::move(schedule)), opt_(opt) {}

    StepRecord step(const StepInput& in, Rng& rng) { return ppcoad::step(schedule_, t_++, in, opt_, rng); }

    const Schedule& schedule() const noexcept { return schedule_; }
    std::size_t t() const noexcept { return t_; }

private:
    Schedule schedule_;
    DetectorOptions opt_;
    std::size_t t_ = 1;
};

}  // namespace ppcoad
