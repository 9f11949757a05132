#pragma once

// Anomaly score functions s(x | c). Higher scores mean stronger evidence that
// x is not a nominal sample for context c.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppcoad/core.hpp"
#include "ppcoad/kmeans.hpp"
#include "ppcoad/random.hpp"

namespace ppcoad {

/// Variance regularizer added to every fitted variance.
inline constexpr double kVarianceFloor = 1e-6;

enum class ContextMode { aware, agnostic };

inline const char* to_string(ContextMode m) { return m == ContextMode::aware ? "context-aware" : "context-agnostic"; }

/// A fitted, immutable score function.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual double score(std::span<const double> x, ContextId c) const = 0;
    virtual ContextMode mode() const noexcept = 0;
    virtual std::size_t contexts() const noexcept = 0;
    virtual nlohmann::json to_json() const = 0;

    double score(const Observation& obs) const { return score(obs.features(), obs.context()); }

protected:
    // Parameter slot for a context: per-context when aware, shared otherwise.
    std::size_t slot(ContextId c) const {
        if (mode() == ContextMode::agnostic) return 0;
        if (c.id >= contexts()) throw Error("context " + std::to_string(c.id) + " out of range");
        return c.id;
    }
};

using ScoreModelPtr = std::shared_ptr<const ScoreModel>;

namespace detail {

// Training points grouped by parameter slot.
inline std::vector<std::vector<const Observation*>> partition(std::span<const Observation> train, std::size_t contexts,
                                                              ContextMode mode) {
    const std::size_t slots = mode == ContextMode::aware ? contexts : 1;
    std::vector<std::vector<const Observation*>> parts(slots);
    for (const auto& o : train) {
        if (o.context().id >= contexts) throw Error("training point has context " + std::to_string(o.context().id) +
                                                    " but only " + std::to_string(contexts) + " contexts exist");
        parts[mode == ContextMode::aware ? o.context().id : 0].push_back(&o);
    }
    return parts;
}

inline std::string slot_name(std::size_t s, ContextMode mode) {
    return mode == ContextMode::aware ? "context " + std::to_string(s) : "pooled data";
}

struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> var;

    static DiagGaussian fit(std::span<const Observation* const> pts) {
        const std::size_t d = pts.front()->dim();
        DiagGaussian g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
        const double n = static_cast<double>(pts.size());
        for (const auto* o : pts)
            for (std::size_t j = 0; j < d; ++j) g.mean[j] += o->features()[j];
        for (auto& m : g.mean) m /= n;
        for (const auto* o : pts)
            for (std::size_t j = 0; j < d; ++j) {
                const double dv = o->features()[j] - g.mean[j];
                g.var[j] += dv * dv;
            }
        for (auto& v : g.var) v = v / n + kVarianceFloor;
        return g;
    }

    double log_density(std::span<const double> x) const {
        if (x.size() != mean.size()) throw Error("feature dimension mismatch");
        double ll = 0.0;
        for (std::size_t j = 0; j < mean.size(); ++j) {
            const double dv = x[j] - mean[j];
            ll -= 0.5 * std::log(2.0 * std::numbers::pi * var[j]) + dv * dv / (2.0 * var[j]);
        }
        return ll;
    }

    nlohmann::json to_json() const { return {{"mean", mean}, {"var", var}}; }
};

}  // namespace detail

/// Negative log-density under a per-context diagonal Gaussian.
class DensityScore final : public ScoreModel {
public:
    DensityScore(std::vector<detail::DiagGaussian> params, std::size_t contexts, ContextMode mode)
        : params_(std::move(params)), contexts_(contexts), mode_(mode) {}

    using ScoreModel::score;
    double score(std::span<const double> x, ContextId c) const override { return -params_[slot(c)].log_density(x); }
    ContextMode mode() const noexcept override { return mode_; }
    std::size_t contexts() const noexcept override { return contexts_; }

    const detail::DiagGaussian& params(std::size_t slot) const { return params_.at(slot); }

    nlohmann::json to_json() const override {
        nlohmann::json j{{"kind", "density"}, {"mode", to_string(mode_)}, {"contexts", contexts_}};
        for (const auto& p : params_) j["params"].push_back(p.to_json());
        return j;
    }

private:
    std::vector<detail::DiagGaussian> params_;
    std::size_t contexts_;
    ContextMode mode_;
};

/// Semi-supervised density score. Training data must be nominal.
inline std::shared_ptr<DensityScore> fit_density_score(std::span<const Observation> train, std::size_t contexts,
                                                       ContextMode mode = ContextMode::aware) {
    for (const auto& o : train)
        if (o.truth() == Truth::anomaly) throw Error("density score must be fitted on inliers only");
    auto parts = detail::partition(train, contexts, mode);
    std::vector<detail::DiagGaussian> params;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        if (parts[s].size() < 2)
            throw Error("density score: " + detail::slot_name(s, mode) + " has " + std::to_string(parts[s].size()) +
                        " training points, need at least 2");
        params.push_back(detail::DiagGaussian::fit(parts[s]));
    }
    return std::make_shared<DensityScore>(std::move(params), contexts, mode);
}

/// Euclidean distance to the nearest k-means centroid.
class KMeansScore final : public ScoreModel {
public:
    KMeansScore(std::vector<std::vector<Point>> centroids, std::size_t contexts, ContextMode mode)
        : centroids_(std::move(centroids)), contexts_(contexts), mode_(mode) {}

    using ScoreModel::score;
    double score(std::span<const double> x, ContextId c) const override {
        double d2 = 0.0;
        nearest_centroid(centroids_[slot(c)], x, &d2);
        return std::sqrt(d2);
    }
    ContextMode mode() const noexcept override { return mode_; }
    std::size_t contexts() const noexcept override { return contexts_; }

    const std::vector<Point>& centroids(std::size_t slot) const { return centroids_.at(slot); }

    nlohmann::json to_json() const override {
        nlohmann::json j{{"kind", "kmeans"}, {"mode", to_string(mode_)}, {"contexts", contexts_}};
        for (const auto& c : centroids_) j["centroids"].push_back(c);
        return j;
    }

private:
    std::vector<std::vector<Point>> centroids_;
    std::size_t contexts_;
    ContextMode mode_;
};

/// Unsupervised clustering score; labels are ignored.
inline std::shared_ptr<KMeansScore> fit_kmeans_score(std::span<const Observation> train, std::size_t k,
                                                     std::size_t contexts, ContextMode mode, Rng& rng) {
    auto parts = detail::partition(train, contexts, mode);
    std::vector<std::vector<Point>> centroids;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        std::vector<Point> pts;
        pts.reserve(parts[s].size());
        for (const auto* o : parts[s]) pts.push_back(o->features());
        if (pts.empty()) throw Error("k-means score: " + detail::slot_name(s, mode) + " has no training points");
        try {
            centroids.push_back(lloyd_kmeans(pts, KMeansOptions{k}, rng).centroids);
        } catch (const Error& e) {
            throw Error(detail::slot_name(s, mode) + ": " + e.what());
        }
    }
    return std::make_shared<KMeansScore>(std::move(centroids), contexts, mode);
}

/// Gaussian naive Bayes: posterior probability of the anomaly class.
class NaiveBayesScore final : public ScoreModel {
public:
    struct ClassModel {
        double prior = 0.5;
        detail::DiagGaussian likelihood;
    };
    struct SlotModel {
        ClassModel inlier;
        ClassModel anomaly;
    };

    NaiveBayesScore(std::vector<SlotModel> slots, std::size_t contexts, ContextMode mode)
        : slots_(std::move(slots)), contexts_(contexts), mode_(mode) {}

    using ScoreModel::score;
    double score(std::span<const double> x, ContextId c) const override {
        const auto& m = slots_[slot(c)];
        const double l0 = std::log(m.inlier.prior) + m.inlier.likelihood.log_density(x);
        const double l1 = std::log(m.anomaly.prior) + m.anomaly.likelihood.log_density(x);
        // sigmoid(l1 - l0), evaluated without overflow
        const double diff = l1 - l0;
        if (diff >= 0.0) return 1.0 / (1.0 + std::exp(-diff));
        const double e = std::exp(diff);
        return e / (1.0 + e);
    }
    ContextMode mode() const noexcept override { return mode_; }
    std::size_t contexts() const noexcept override { return contexts_; }

    nlohmann::json to_json() const override {
        nlohmann::json j{{"kind", "naive_bayes"}, {"mode", to_string(mode_)}, {"contexts", contexts_}};
        for (const auto& s : slots_) {
            j["params"].push_back({{"inlier", {{"prior", s.inlier.prior}, {"gaussian", s.inlier.likelihood.to_json()}}},
                                   {"anomaly", {{"prior", s.anomaly.prior}, {"gaussian", s.anomaly.likelihood.to_json()}}}});
        }
        return j;
    }

private:
    std::vector<SlotModel> slots_;
    std::size_t contexts_;
    ContextMode mode_;
};

/// Supervised score; every training point needs a known label and both classes must occur.
inline std::shared_ptr<NaiveBayesScore> fit_supervised_score(std::span<const Observation> train, std::size_t contexts,
                                                             ContextMode mode = ContextMode::aware) {
    auto parts = detail::partition(train, contexts, mode);
    std::vector<NaiveBayesScore::SlotModel> slots;
    for (std::size_t s = 0; s < parts.size(); ++s) {
        std::vector<const Observation*> in, out;
        for (const auto* o : parts[s]) {
            if (o->truth() == Truth::unknown) throw Error("supervised score needs labels on every training point");
            (o->truth() == Truth::anomaly ? out : in).push_back(o);
        }
        if (in.empty() || out.empty())
            throw Error("supervised score: " + detail::slot_name(s, mode) + " lacks " +
                        (in.empty() ? "inlier" : "anomaly") + " training points");
        const double n = static_cast<double>(parts[s].size());
        slots.push_back({{static_cast<double>(in.size()) / n, detail::DiagGaussian::fit(in)},
                         {static_cast<double>(out.size()) / n, detail::DiagGaussian::fit(out)}});
    }
    return std::make_shared<NaiveBayesScore>(std::move(slots), contexts, mode);
}

/// Lower empirical quantile: the ceil(level * n)-th smallest value.
inline double lower_quantile(std::vector<double> values, double level) {
    if (values.empty()) throw Error("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::ceil(level * static_cast<double>(values.size()) - 1e-9);
    const auto rank = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(values.size())));
    return values[rank - 1];
}

/// Fixed-threshold baseline: flag iff s(x|c) > s_alpha(c).
struct QuantileThreshold {
    std::vector<double> threshold;  // one per context, or one pooled value
    ContextMode mode = ContextMode::aware;
    std::vector<std::string> warnings;

    double at(ContextId c) const { return mode == ContextMode::aware ? threshold.at(c.id) : threshold.at(0); }
    bool flags(double score, ContextId c) const { return score > at(c); }
};

inline QuantileThreshold fit_fixed_threshold(const ScoreModel& model, std::span<const Observation> train, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("fixed threshold needs alpha in (0, 1)");
    const auto mode = model.mode();
    std::vector<std::vector<double>> scores(mode == ContextMode::aware ? model.contexts() : 1);
    for (const auto& o : train) scores[mode == ContextMode::aware ? o.context().id : 0].push_back(model.score(o));

    QuantileThreshold q;
    q.mode = mode;
    const auto needed = static_cast<std::size_t>(std::ceil(1.0 / alpha - 1e-9));
    for (std::size_t s = 0; s < scores.size(); ++s) {
        if (scores[s].empty()) throw Error("fixed threshold: " + detail::slot_name(s, mode) + " has no training scores");
        if (scores[s].size() < needed)
            q.warnings.push_back(detail::slot_name(s, mode) + ": only " + std::to_string(scores[s].size()) +
                                 " training scores for a " + std::to_string(1.0 - alpha) + " quantile");
        q.threshold.push_back(lower_quantile(std::move(scores[s]), 1.0 - alpha));
    }
    return q;
}

}  // namespace ppcoad
