#pragma once

// Digital twin: per-context diagonal Gaussian mixtures that mint synthetic
// calibration batches, plus the superuniformity gap D(C) and the acquisition
// propensity gamma(C) derived from it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "ppcoad/conformal.hpp"
#include "ppcoad/core.hpp"
#include "ppcoad/kmeans.hpp"
#include "ppcoad/random.hpp"
#include "ppcoad/scoring.hpp"

namespace ppcoad {

struct MixtureComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> var;
};

/// Diagonal-covariance Gaussian mixture.
class GaussianMixture {
public:
    GaussianMixture() = default;
    explicit GaussianMixture(std::vector<MixtureComponent> comps) : comps_(std::move(comps)) {}

    const std::vector<MixtureComponent>& components() const noexcept { return comps_; }
    std::vector<MixtureComponent>& components() noexcept { return comps_; }
    std::size_t dim() const { return comps_.empty() ? 0 : comps_.front().mean.size(); }

    Point sample(Rng& rng) const {
        double r = rng.uniform();
        std::size_t k = comps_.size() - 1;
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            r -= comps_[i].weight;
            if (r < 0.0) {
                k = i;
                break;
            }
        }
        const auto& c = comps_[k];
        Point x(c.mean.size());
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = rng.normal(c.mean[j], std::sqrt(c.var[j]));
        return x;
    }

    static double component_log_density(const MixtureComponent& c, std::span<const double> x) {
        double ll = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - c.mean[j];
            ll -= 0.5 * std::log(2.0 * std::numbers::pi * c.var[j]) + d * d / (2.0 * c.var[j]);
        }
        return ll;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& c : comps_) j.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
        return j;
    }

private:
    std::vector<MixtureComponent> comps_;
};

struct EmOptions {
    std::size_t k = 2;
    std::size_t max_iter = 100;
    double tol = 1e-6;  // on the mean log-likelihood per point
};

/// EM for a diagonal GMM, initialized from k-means++ seeds.
inline GaussianMixture fit_gmm(std::span<const Point> pts, const EmOptions& opt, Rng& rng) {
    if (opt.k == 0) throw Error("mixture needs at least one component");
    if (pts.size() < opt.k) throw Error("mixture needs at least k points");
    const std::size_t n = pts.size();
    const std::size_t d = pts.front().size();
    const std::size_t k = opt.k;

    // Global moments seed every component's variance.
    std::vector<double> gmean(d, 0.0), gvar(d, 0.0);
    for (const auto& x : pts)
        for (std::size_t j = 0; j < d; ++j) gmean[j] += x[j];
    for (auto& m : gmean) m /= static_cast<double>(n);
    for (const auto& x : pts)
        for (std::size_t j = 0; j < d; ++j) gvar[j] += (x[j] - gmean[j]) * (x[j] - gmean[j]);
    for (auto& v : gvar) v = v / static_cast<double>(n) + kVarianceFloor;

    std::vector<MixtureComponent> comps;
    if (k == 1) {
        comps.push_back({1.0, gmean, gvar});
        return GaussianMixture(std::move(comps));
    }
    // Seeds may coincide when data has fewer distinct points than k; EM then
    // starts from duplicated means and the weights split them evenly.
    std::vector<Point> seeds;
    if (count_distinct(pts) >= k) {
        seeds = kmeanspp_seed(pts, k, rng);
    } else {
        for (std::size_t c = 0; c < k; ++c) seeds.push_back(pts[rng.index(n)]);
    }
    for (std::size_t c = 0; c < k; ++c) comps.push_back({1.0 / static_cast<double>(k), seeds[c], gvar});

    std::vector<double> resp(n * k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
        // E step
        std::vector<double> log_norm(k), inv_var(k * d);
        for (std::size_t c = 0; c < k; ++c) {
            log_norm[c] = std::log(comps[c].weight);
            for (std::size_t j = 0; j < d; ++j) {
                log_norm[c] -= 0.5 * std::log(2.0 * std::numbers::pi * comps[c].var[j]);
                inv_var[c * d + j] = 0.5 / comps[c].var[j];
            }
        }
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double r = log_norm[c];
                for (std::size_t j = 0; j < d; ++j) {
                    const double dv = pts[i][j] - comps[c].mean[j];
                    r -= dv * dv * inv_var[c * d + j];
                }
                resp[i * k + c] = r;
                mx = std::max(mx, r);
            }
            double tot = 0.0;
            for (std::size_t c = 0; c < k; ++c) tot += std::exp(resp[i * k + c] - mx);
            const double lse = mx + std::log(tot);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
        }
        ll /= static_cast<double>(n);

        // M step
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + c];
            if (nk <= 1e-12) continue;  // collapsed component keeps its parameters
            auto& comp = comps[c];
            std::fill(comp.mean.begin(), comp.mean.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) comp.mean[j] += resp[i * k + c] * pts[i][j];
            for (auto& m : comp.mean) m /= nk;
            std::fill(comp.var.begin(), comp.var.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double dv = pts[i][j] - comp.mean[j];
                    comp.var[j] += resp[i * k + c] * dv * dv;
                }
            for (auto& v : comp.var) v = v / nk + kVarianceFloor;
            comp.weight = nk / static_cast<double>(n);
        }
        double wsum = 0.0;
        for (const auto& c : comps) wsum += c.weight;
        for (auto& c : comps) c.weight /= wsum;

        if (std::abs(ll - prev_ll) < opt.tol) break;
        prev_ll = ll;
    }
    return GaussianMixture(std::move(comps));
}

/// Per-context generative model of nominal data. A pooled twin has one
/// mixture shared by every context.
class TwinModel {
public:
    TwinModel() = default;
    TwinModel(std::vector<GaussianMixture> mixtures, std::size_t contexts, ContextMode mode)
        : mixtures_(std::move(mixtures)), contexts_(contexts), mode_(mode) {}

    bool fitted() const noexcept { return !mixtures_.empty(); }
    ContextMode mode() const noexcept { return mode_; }
    std::size_t contexts() const noexcept { return contexts_; }

    const GaussianMixture& mixture(ContextId c) const {
        if (!fitted()) throw Error("twin model is not fitted");
        if (mode_ == ContextMode::agnostic) return mixtures_.front();
        if (c.id >= mixtures_.size()) throw Error("twin has no mixture for context " + std::to_string(c.id));
        return mixtures_[c.id];
    }

    /// Emulate sim-to-real mismatch: scale every variance and shift every mean.
    void perturb(double variance_scale, double mean_shift) {
        for (auto& m : mixtures_)
            for (auto& c : m.components()) {
                for (auto& v : c.var) v *= variance_scale;
                for (auto& mu : c.mean) mu += mean_shift;
            }
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"mode", to_string(mode_)}, {"contexts", contexts_}};
        j["mixtures"] = nlohmann::json::array();
        for (const auto& m : mixtures_) j["mixtures"].push_back(m.to_json());
        return j;
    }

private:
    std::vector<GaussianMixture> mixtures_;
    std::size_t contexts_ = 0;
    ContextMode mode_ = ContextMode::aware;
};

inline TwinModel fit_twin(std::span<const Observation> train, std::size_t k, std::size_t contexts, ContextMode mode,
                          Rng& rng) {
    const std::size_t slots = mode == ContextMode::aware ? contexts : 1;
    std::vector<std::vector<Point>> parts(slots);
    for (const auto& o : train) {
        if (o.context().id >= contexts) throw Error("twin training point has an unknown context");
        parts[mode == ContextMode::aware ? o.context().id : 0].push_back(o.features());
    }
    std::vector<GaussianMixture> mixtures;
    for (std::size_t s = 0; s < slots; ++s) {
        if (parts[s].size() < k)
            throw Error("twin: " + detail::slot_name(s, mode) + " has " + std::to_string(parts[s].size()) +
                        " training points, need at least " + std::to_string(k));
        mixtures.push_back(fit_gmm(parts[s], EmOptions{k}, rng));
    }
    return TwinModel(std::move(mixtures), contexts, mode);
}

inline std::vector<Point> sample_synthetic(const TwinModel& model, ContextId c, std::size_t n_tilde, Rng& rng) {
    if (!model.fitted()) throw Error("cannot sample from an unfitted twin");
    if (n_tilde == 0) throw Error("synthetic batch size must be positive");
    const auto& gmm = model.mixture(c);
    std::vector<Point> out;
    out.reserve(n_tilde);
    for (std::size_t i = 0; i < n_tilde; ++i) out.push_back(gmm.sample(rng));
    return out;
}

/// p-values of validation scores against the synthetic scores.
inline std::vector<double> validation_pvalues(std::span<const double> synthetic_scores,
                                              std::span<const double> validation_scores, bool plus_one = true) {
    const CalibrationBatch cal(std::vector<double>(synthetic_scores.begin(), synthetic_scores.end()), BatchKind::synthetic);
    std::vector<double> p;
    p.reserve(validation_scores.size());
    for (double s : validation_scores) p.push_back(conformal_pvalue(cal, s, plus_one).value());
    return p;
}

/// sup_p (F_hat(p) - p) for the empirical CDF of `pvalues`. F_hat is a right-
/// continuous step function, so the supremum sits at a jump or at p = 0.
inline double gap_from_pvalues(std::vector<double> pvalues) {
    if (pvalues.empty()) throw Error("superuniformity gap needs at least one p-value");
    std::sort(pvalues.begin(), pvalues.end());
    const double m = static_cast<double>(pvalues.size());
    double best = 0.0;  // p = 0 where F_hat(0) - 0 >= 0
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        if (i + 1 < pvalues.size() && pvalues[i + 1] == pvalues[i]) continue;  // take the top of a tie run
        best = std::max(best, static_cast<double>(i + 1) / m - pvalues[i]);
    }
    return best;
}

inline double superuniformity_gap(std::span<const double> synthetic_scores, std::span<const double> validation_scores,
                                  bool plus_one = true) {
    if (synthetic_scores.empty() || validation_scores.empty())
        throw Error("superuniformity gap needs non-empty synthetic and validation scores");
    return gap_from_pvalues(validation_pvalues(synthetic_scores, validation_scores, plus_one));
}

/// gamma = min(1 - margin, exp(-lambda * max(0, d))).
inline double gamma_of_context(double d, double lambda) {
    if (!(lambda > 0.0)) throw Error("lambda must be positive");
    return std::min(kGammaMax, std::exp(-lambda * std::max(0.0, d)));
}

struct ValidityReport {
    std::vector<double> gap;    // D(C) per slot
    std::vector<double> gamma;  // gamma(C) per slot
    std::vector<std::vector<double>> pvalues;
    ContextMode mode = ContextMode::aware;

    double gamma_at(ContextId c) const { return mode == ContextMode::aware ? gamma.at(c.id) : gamma.at(0); }

    nlohmann::json to_json() const {
        return {{"mode", to_string(mode)}, {"D", gap}, {"gamma", gamma}};
    }
};

/// Estimate D(C) and gamma(C) for every slot from held-out inlier validation
/// points and `synthetic_per_slot` twin samples.
inline ValidityReport assess_twin(const TwinModel& twin, const ScoreModel& score, std::span<const Observation> validation,
                                  std::size_t synthetic_per_slot, double lambda, Rng& rng, bool plus_one = true) {
    const ContextMode mode = twin.mode();
    const std::size_t slots = mode == ContextMode::aware ? twin.contexts() : 1;
    std::vector<std::vector<double>> val(slots);
    for (const auto& o : validation) val[mode == ContextMode::aware ? o.context().id : 0].push_back(score.score(o));

    ValidityReport rep;
    rep.mode = mode;
    for (std::size_t s = 0; s < slots; ++s) {
        if (val[s].empty()) throw Error("twin validation: " + detail::slot_name(s, mode) + " has no validation points");
        const ContextId c{s};
        std::vector<double> syn;
        syn.reserve(synthetic_per_slot);
        for (const auto& x : sample_synthetic(twin, c, synthetic_per_slot, rng)) syn.push_back(score.score(x, c));
        auto p = validation_pvalues(syn, val[s], plus_one);
        rep.gap.push_back(gap_from_pvalues(p));
        rep.gamma.push_back(gamma_of_context(rep.gap.back(), lambda));
        rep.pvalues.push_back(std::move(p));
    }
    return rep;
}

}  // namespace ppcoad
