#pragma once

// Benchmark runner: method variants, run configuration, the per-run
// pipeline (split, fit, calibrate, detect, evaluate) and artifact emission.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ppcoad/config.hpp"
#include "ppcoad/conformal.hpp"
#include "ppcoad/core.hpp"
#include "ppcoad/data.hpp"
#include "ppcoad/fdr.hpp"
#include "ppcoad/metrics.hpp"
#include "ppcoad/oran.hpp"
#include "ppcoad/random.hpp"
#include "ppcoad/scoring.hpp"
#include "ppcoad/twin.hpp"

namespace ppcoad {

enum class Method { FIXED, COAD, PP_COAD, C_COAD, PO_COAD, C_PO_COAD, C_PP_COAD };

inline constexpr std::array<Method, 7> kAllMethods{Method::FIXED,  Method::COAD,      Method::PP_COAD,  Method::C_COAD,
                                                   Method::PO_COAD, Method::C_PO_COAD, Method::C_PP_COAD};

inline const char* to_string(Method m) {
    switch (m) {
    case Method::FIXED: return "FIXED";
    case Method::COAD: return "COAD";
    case Method::PP_COAD: return "PP_COAD";
    case Method::C_COAD: return "C_COAD";
    case Method::PO_COAD: return "PO_COAD";
    case Method::C_PO_COAD: return "C_PO_COAD";
    case Method::C_PP_COAD: return "C_PP_COAD";
    }
    return "?";
}

inline Method parse_method(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return c == '-' ? '_' : std::toupper(c); });
    for (auto m : kAllMethods)
        if (s == to_string(m)) return m;
    throw Error("unknown method '" + s + "'");
}

/// How a variant configures the shared step pipeline.
struct MethodTraits {
    ContextMode mode;
    bool uses_twin;
    AcquisitionRule rule;
    SplitKind split;
    bool fixed_threshold;
};

inline MethodTraits traits(Method m) {
    using enum AcquisitionRule;
    switch (m) {
    case Method::FIXED: return {ContextMode::aware, false, never_real, SplitKind::twinless, true};
    case Method::COAD: return {ContextMode::agnostic, false, always_real, SplitKind::twinless, false};
    case Method::PP_COAD: return {ContextMode::agnostic, true, active, SplitKind::prediction_powered, false};
    case Method::C_COAD: return {ContextMode::aware, false, always_real, SplitKind::twinless, false};
    case Method::PO_COAD: return {ContextMode::agnostic, true, never_real, SplitKind::prediction_only, false};
    case Method::C_PO_COAD: return {ContextMode::aware, true, never_real, SplitKind::prediction_only, false};
    case Method::C_PP_COAD: return {ContextMode::aware, true, active, SplitKind::prediction_powered, false};
    }
    throw Error("unknown method");
}

enum class ScoreKind { supervised, unsupervised, semi_supervised };

inline const char* to_string(ScoreKind k) {
    switch (k) {
    case ScoreKind::supervised: return "supervised";
    case ScoreKind::unsupervised: return "unsupervised";
    case ScoreKind::semi_supervised: return "semi-supervised";
    }
    return "?";
}

inline ScoreKind parse_score_kind(const std::string& s) {
    if (s == "supervised") return ScoreKind::supervised;
    if (s == "unsupervised") return ScoreKind::unsupervised;
    if (s == "semi-supervised" || s == "semi_supervised") return ScoreKind::semi_supervised;
    throw Error("unknown score kind '" + s + "'");
}

enum class DatasetSource { csv, oran, gaussian };

inline const char* to_string(DatasetSource d) {
    switch (d) {
    case DatasetSource::csv: return "csv";
    case DatasetSource::oran: return "oran";
    case DatasetSource::gaussian: return "gaussian";
    }
    return "?";
}

inline DatasetSource parse_dataset(const std::string& s) {
    if (s == "csv") return DatasetSource::csv;
    if (s == "oran") return DatasetSource::oran;
    if (s == "gaussian") return DatasetSource::gaussian;
    throw Error("unknown dataset '" + s + "'");
}

/// Known-law environment: context c is N(c * spacing, (1 + c * scale_step)^2 I)
/// in `dim` dimensions; anomalies add `anomaly_shift` to every coordinate.
struct GaussianOracle {
    std::size_t contexts = 2;
    std::size_t dim = 2;
    double spacing = 3.0;
    double scale_step = 0.5;
    double anomaly_shift = 4.0;
    double anomaly_rate = 0.1;
    std::size_t train_size = 1000;       // score-training rows
    std::size_t twin_train_size = 1000;  // twin-training rows
    double twin_variance_scale = 1.0;    // applied to the fitted twin
    double twin_mean_shift = 0.0;

    double mean(ContextId c) const { return static_cast<double>(c.id) * spacing; }
    double sd(ContextId c) const { return 1.0 + static_cast<double>(c.id) * scale_step; }

    Observation draw(ContextId c, bool anomaly, Rng& rng) const {
        std::vector<double> x(dim);
        const double mu = mean(c) + (anomaly ? anomaly_shift : 0.0);
        for (auto& v : x) v = rng.normal(mu, sd(c));
        return Observation(std::move(x), c, anomaly ? Truth::anomaly : Truth::inlier);
    }
    Observation nominal(ContextId c, Rng& rng) const { return draw(c, false, rng); }
    ContextId context(Rng& rng) const { return ContextId{rng.index(contexts)}; }

    /// Labeled row: uniform context, anomaly with probability anomaly_rate.
    Observation labeled(Rng& rng) const {
        const ContextId c = context(rng);
        const bool a = rng.bernoulli(anomaly_rate);
        return draw(c, a, rng);
    }
};

/// T test points, each paired with a fresh nominal calibration batch of size
/// n_cal drawn from the test point's context.
inline std::vector<StreamStep> gaussian_synthetic_stream(const GaussianOracle& g, std::size_t steps, std::size_t n_cal,
                                                         Rng& rng) {
    std::vector<StreamStep> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        StreamStep s{g.labeled(rng), {}};
        s.calibration.reserve(n_cal);
        for (std::size_t i = 0; i < n_cal; ++i) s.calibration.push_back(g.nominal(s.test.context(), rng));
        out.push_back(std::move(s));
    }
    return out;
}

struct RunConfig {
    std::vector<Method> methods{Method::C_PP_COAD};
    ScoreKind score = ScoreKind::semi_supervised;
    double alpha = 0.1;
    double delta = 0.99;
    double eta = 1.0;
    double lambda = 5.0;
    std::optional<double> gamma;  // overrides the twin-derived gamma(C)
    std::size_t steps = 50;
    std::size_t runs = 20;
    std::uint64_t seed = 1;
    DatasetSource dataset = DatasetSource::gaussian;
    std::size_t n = 0;        // real batch size for prediction-powered plans; 0 = derive
    std::size_t n_tilde = 0;  // synthetic batch size; 0 = same as n
    double q_miss = 0.0;
    bool plus_one = true;
    std::size_t gmm_k = 2;
    std::size_t kmeans_k = 5;
    double validation_fraction = 0.2;
    std::size_t validity_samples = 500;
    std::size_t threads = 0;  // 0 = hardware concurrency
    bool dump_models = false;

    std::string csv_path;
    std::string schema_path;
    oran::OranOptions oran;
    GaussianOracle gaussian;

    void validate() const {
        if (methods.empty()) throw Error("no methods selected");
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
        if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
        if (!(eta > 0.0)) throw Error("eta must be positive");
        if (!(lambda > 0.0)) throw Error("lambda must be positive");
        if (gamma) check_gamma(*gamma);
        if (steps == 0 || runs == 0) throw Error("steps and runs must be at least 1");
        if (!(q_miss >= 0.0 && q_miss < 1.0)) throw Error("q_miss must lie in [0, 1)");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw Error("validation_fraction must lie in (0, 1)");
        if (dataset == DatasetSource::csv && (csv_path.empty() || schema_path.empty()))
            throw Error("csv dataset needs csv.path and csv.schema");
    }

    static RunConfig from_config(const Config& c) {
        RunConfig r;
        if (c.has("method")) {
            r.methods.clear();
            for (const auto& m : c.list("method")) {
                if (m == "all" || m == "ALL") {
                    r.methods.assign(kAllMethods.begin(), kAllMethods.end());
                    break;
                }
                r.methods.push_back(parse_method(m));
            }
        }
        if (c.has("score")) r.score = parse_score_kind(c.str("score"));
        r.alpha = c.real("alpha", r.alpha);
        r.delta = c.real("delta", r.delta);
        r.eta = c.real("eta", r.eta);
        r.lambda = c.real("lambda", r.lambda);
        if (c.has("gamma") && !c.str("gamma").empty()) r.gamma = c.real("gamma", 0.0);
        r.steps = c.uint("steps", r.steps);
        r.runs = c.uint("runs", r.runs);
        r.seed = c.uint("seed", r.seed);
        if (c.has("dataset")) r.dataset = parse_dataset(c.str("dataset"));
        r.n = c.uint("n", r.n);
        r.n_tilde = c.uint("n_tilde", r.n_tilde);
        r.q_miss = c.real("q_miss", r.q_miss);
        r.plus_one = c.flag("plus_one", r.plus_one);
        r.gmm_k = c.uint("gmm_k", r.gmm_k);
        r.kmeans_k = c.uint("kmeans_k", r.kmeans_k);
        r.validation_fraction = c.real("validation_fraction", r.validation_fraction);
        r.validity_samples = c.uint("validity_samples", r.validity_samples);
        r.threads = c.uint("threads", r.threads);
        r.dump_models = c.flag("dump_models", r.dump_models);
        r.csv_path = c.str("csv.path", r.csv_path);
        r.schema_path = c.str("csv.schema", r.schema_path);
        r.oran.n_samples = c.uint("oran.samples", r.oran.n_samples);
        r.oran.anomaly_frac = c.real("oran.anomaly_frac", r.oran.anomaly_frac);
        r.oran.graph_seed = c.uint("oran.graph_seed", r.oran.graph_seed);
        r.oran.sample_seed = c.uint("oran.sample_seed", r.oran.sample_seed);
        auto& g = r.gaussian;
        g.contexts = c.uint("gaussian.contexts", g.contexts);
        g.dim = c.uint("gaussian.dim", g.dim);
        g.spacing = c.real("gaussian.spacing", g.spacing);
        g.scale_step = c.real("gaussian.scale_step", g.scale_step);
        g.anomaly_shift = c.real("gaussian.anomaly_shift", g.anomaly_shift);
        g.anomaly_rate = c.real("gaussian.anomaly_rate", g.anomaly_rate);
        g.train_size = c.uint("gaussian.train_size", g.train_size);
        g.twin_train_size = c.uint("gaussian.twin_train_size", g.twin_train_size);
        g.twin_variance_scale = c.real("gaussian.twin_variance_scale", g.twin_variance_scale);
        g.twin_mean_shift = c.real("gaussian.twin_mean_shift", g.twin_mean_shift);
        r.validate();
        return r;
    }

    /// Fully resolved configuration as JSON.
    nlohmann::json to_json() const {
        nlohmann::json j;
        std::vector<std::string> ms;
        for (auto m : methods) ms.push_back(to_string(m));
        j["method"] = ms;
        j["score"] = to_string(score);
        j["alpha"] = alpha;
        j["delta"] = delta;
        j["eta"] = eta;
        j["lambda"] = lambda;
        j["gamma"] = gamma ? nlohmann::json(*gamma) : nlohmann::json(nullptr);
        j["steps"] = steps;
        j["runs"] = runs;
        j["seed"] = seed;
        j["dataset"] = to_string(dataset);
        j["n"] = n;
        j["n_tilde"] = n_tilde;
        j["q_miss"] = q_miss;
        j["plus_one"] = plus_one;
        j["gmm_k"] = gmm_k;
        j["kmeans_k"] = kmeans_k;
        j["validation_fraction"] = validation_fraction;
        j["validity_samples"] = validity_samples;
        if (dataset == DatasetSource::csv) j["csv"] = {{"path", csv_path}, {"schema", schema_path}};
        if (dataset == DatasetSource::oran)
            j["oran"] = {{"samples", oran.n_samples},
                         {"anomaly_frac", oran.anomaly_frac},
                         {"graph_seed", oran.graph_seed},
                         {"sample_seed", oran.sample_seed}};
        if (dataset == DatasetSource::gaussian)
            j["gaussian"] = {{"contexts", gaussian.contexts},
                             {"dim", gaussian.dim},
                             {"spacing", gaussian.spacing},
                             {"scale_step", gaussian.scale_step},
                             {"anomaly_shift", gaussian.anomaly_shift},
                             {"anomaly_rate", gaussian.anomaly_rate},
                             {"train_size", gaussian.train_size},
                             {"twin_train_size", gaussian.twin_train_size},
                             {"twin_variance_scale", gaussian.twin_variance_scale},
                             {"twin_mean_shift", gaussian.twin_mean_shift}};
        return j;
    }
};

/// Loaded once per benchmark and shared read-only across runs.
struct Dataset {
    std::vector<Observation> rows;
    std::vector<FeatureKind> kinds;
    std::size_t contexts = 1;
    std::optional<oran::OranGraph> graph;  // set for O-RAN data
};

inline Dataset load_dataset(const RunConfig& cfg) {
    Dataset ds;
    switch (cfg.dataset) {
    case DatasetSource::csv: {
        auto csv = load_csv(cfg.csv_path, DatasetSchema::from_config(Config::load(cfg.schema_path)));
        for (const auto& w : csv.warnings) std::cerr << "warning: " << w << '\n';
        ds.rows = std::move(csv.rows);
        ds.kinds = csv.schema.kinds();
        ds.contexts = csv.schema.num_contexts();
        break;
    }
    case DatasetSource::oran: {
        auto gen = oran::generate_oran(cfg.oran);
        ds.rows = gen.observations();
        ds.kinds.assign(ds.rows.front().dim(), FeatureKind::categorical);
        ds.contexts = oran::kOranContexts;
        ds.graph = std::move(gen.graph);
        break;
    }
    case DatasetSource::gaussian:
        ds.kinds.assign(cfg.gaussian.dim, FeatureKind::continuous);
        ds.contexts = cfg.gaussian.contexts;
        break;
    }
    return ds;
}

struct RunResult {
    std::vector<StepRecord> records;
    RunTrace trace;
    nlohmann::json models;  // filled when dump_models is set
};

namespace detail {

inline ScoreModelPtr fit_score(const RunConfig& cfg, std::span<const Observation> train, std::size_t contexts,
                               ContextMode mode, Rng& rng) {
    switch (cfg.score) {
    case ScoreKind::supervised: return fit_supervised_score(train, contexts, mode);
    case ScoreKind::unsupervised: return fit_kmeans_score(train, cfg.kmeans_k, contexts, mode, rng);
    case ScoreKind::semi_supervised: {
        std::vector<Observation> nominal;
        for (const auto& o : train)
            if (o.truth() != Truth::anomaly) nominal.push_back(o);
        return fit_density_score(nominal, contexts, mode);
    }
    }
    throw Error("unknown score kind");
}

// Activity-quartile contexts for O-RAN rows, with boundaries from `train`.
inline void relabel_oran(const oran::OranGraph& g, std::vector<Observation>& train,
                         const std::vector<std::vector<Observation>*>& others) {
    const std::size_t X = g.shape().xapps;
    auto act = [&](const Observation& o) {
        double a = 0.0;
        for (std::size_t x = 0; x < X; ++x)
            if (!o.missing(x) && o.raw()[x] != 0.0) a += static_cast<double>(g.out_degree(x));
        return a;
    };
    std::vector<double> acts;
    for (const auto& o : train) acts.push_back(act(o));
    const auto q = oran::activity_quartiles(acts);
    for (auto& o : train) o.set_context(oran::activity_context(act(o), q));
    for (auto* v : others)
        for (auto& o : *v) o.set_context(oran::activity_context(act(o), q));
}

// Data for one run and one split layout.
struct RunData {
    std::vector<Observation> score_train;
    std::vector<Observation> twin_train;
    std::vector<StreamStep> stream;
    std::size_t n_tilde = 0;
};

inline RunData prepare_data(const RunConfig& cfg, const Dataset& ds, const MethodTraits& tr, std::size_t run) {
    RunData out;
    auto split_rng = Rng::derive(cfg.seed, run, Purpose::split);
    if (cfg.dataset == DatasetSource::gaussian) {
        const auto& g = cfg.gaussian;
        auto data_rng = Rng::derive(cfg.seed, run, Purpose::data);
        for (std::size_t i = 0; i < g.train_size; ++i) out.score_train.push_back(g.labeled(data_rng));
        for (std::size_t i = 0; i < g.twin_train_size; ++i) out.twin_train.push_back(g.nominal(g.context(data_rng), data_rng));
        const std::size_t n = cfg.n ? cfg.n : 1000;
        // Every method sees the same stream; twinless plans use all 2n points.
        auto stream_rng = Rng::derive(cfg.seed, run, Purpose::stream);
        out.stream = gaussian_synthetic_stream(g, cfg.steps, 2 * n, stream_rng);
        for (auto& s : out.stream) {
            switch (tr.split) {
            case SplitKind::twinless: break;
            case SplitKind::prediction_powered: s.calibration.resize(n); break;
            case SplitKind::prediction_only:
                s.calibration.resize(n);
                out.twin_train.insert(out.twin_train.end(), s.calibration.begin(), s.calibration.end());
                s.calibration.clear();
                break;
            }
        }
        out.n_tilde = cfg.n_tilde ? cfg.n_tilde : n;
        return out;
    }

    // Tabular sources: carve T test rows, split the rest.
    if (ds.rows.size() <= cfg.steps) throw Error("dataset has too few rows for " + std::to_string(cfg.steps) + " steps");
    std::vector<std::size_t> order(ds.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    std::vector<Observation> tests, pool;
    for (std::size_t i = 0; i < order.size(); ++i) (i < cfg.steps ? tests : pool).push_back(ds.rows[order[i]]);

    auto make = [&](SplitKind kind) {
        auto rng = Rng::derive(cfg.seed, run, Purpose::split, 1);
        return make_splits(pool, tests, SplitPlan{1.0 / 3, 1.0 / 3, 1.0 / 3, kind}, rng);
    };
    Splits sp = make(tr.split);
    const std::size_t n_pp = tr.split == SplitKind::prediction_powered ? sp.n : make(SplitKind::prediction_powered).n;
    if (cfg.n) {
        const std::size_t want = tr.split == SplitKind::twinless ? 2 * cfg.n : cfg.n;
        if (tr.split != SplitKind::prediction_only) {
            if (want > sp.n)
                throw Error("requested batch size " + std::to_string(want) + " exceeds the " + std::to_string(sp.n) +
                            " calibration rows available per step");
            for (auto& s : sp.stream) s.calibration.resize(want);
        }
    }
    out.n_tilde = cfg.n_tilde ? cfg.n_tilde : (cfg.n ? cfg.n : n_pp);
    out.score_train = std::move(sp.score_train);
    out.twin_train = std::move(sp.twin_train);
    out.stream = std::move(sp.stream);

    if (ds.graph) {
        std::vector<Observation> stream_tests;
        for (auto& s : out.stream) stream_tests.push_back(std::move(s.test));
        std::vector<std::vector<Observation>*> others{&out.twin_train, &stream_tests};
        for (auto& s : out.stream) others.push_back(&s.calibration);
        relabel_oran(*ds.graph, out.score_train, others);
        for (std::size_t t = 0; t < out.stream.size(); ++t) out.stream[t].test = std::move(stream_tests[t]);
    }
    return out;
}

}  // namespace detail

/// One replicate of one method.
inline RunResult run_once(const RunConfig& cfg, const Dataset& ds, Method method, std::size_t run) {
    const MethodTraits tr = traits(method);
    auto data = detail::prepare_data(cfg, ds, tr, run);

    // MCAR masks on test and calibration points, then impute everything with
    // statistics from the score-training split.
    auto mask_rng = Rng::derive(cfg.seed, run, Purpose::mask);
    for (auto& s : data.stream) {
        s.test = apply_mcar_mask(std::move(s.test), cfg.q_miss, mask_rng);
        for (auto& c : s.calibration) c = apply_mcar_mask(std::move(c), cfg.q_miss, mask_rng);
    }
    const Imputer imputer = Imputer::fit(data.score_train, ds.kinds);
    for (auto& o : data.score_train) o = imputer.impute(std::move(o));
    for (auto& o : data.twin_train) o = imputer.impute(std::move(o));
    for (auto& s : data.stream) {
        s.test = imputer.impute(std::move(s.test));
        for (auto& c : s.calibration) c = imputer.impute(std::move(c));
    }

    auto val_rng = Rng::derive(cfg.seed, run, Purpose::split, 2);
    auto [fit_set, validation] = carve_validation(data.score_train, cfg.validation_fraction, val_rng);
    auto score_rng = Rng::derive(cfg.seed, run, Purpose::score);
    const ScoreModelPtr model = detail::fit_score(cfg, fit_set, ds.contexts, tr.mode, score_rng);

    RunResult res;
    MetricsTracker metrics(cfg.delta, cfg.eta);
    if (cfg.dump_models) res.models["score"] = model->to_json();

    if (tr.fixed_threshold) {
        const auto thr = fit_fixed_threshold(*model, fit_set, cfg.alpha);
        if (cfg.dump_models) res.models["fixed_threshold"] = thr.threshold;
        for (std::size_t t = 0; t < data.stream.size(); ++t) {
            const auto& obs = data.stream[t].test;
            StepRecord rec;
            rec.t = t + 1;
            rec.context = obs.context();
            rec.decision = thr.flags(model->score(obs), obs.context());
            rec.truth = obs.truth();
            metrics.update(rec.decision, rec.truth, false);
            res.records.push_back(rec);
        }
        res.trace = metrics.trace();
        return res;
    }

    TwinModel twin;
    std::optional<ValidityReport> validity;
    if (tr.uses_twin) {
        auto twin_rng = Rng::derive(cfg.seed, run, Purpose::twin);
        twin = fit_twin(data.twin_train, cfg.gmm_k, ds.contexts, tr.mode, twin_rng);
        if (cfg.dataset == DatasetSource::gaussian)
            twin.perturb(cfg.gaussian.twin_variance_scale, cfg.gaussian.twin_mean_shift);
        if (tr.rule == AcquisitionRule::active && !cfg.gamma) {
            auto vr = Rng::derive(cfg.seed, run, Purpose::validity);
            validity = assess_twin(twin, *model, validation, cfg.validity_samples, cfg.lambda, vr, cfg.plus_one);
        }
        if (cfg.dump_models) {
            res.models["twin"] = twin.to_json();
            if (validity) res.models["validity"] = validity->to_json();
        }
    }

    Detector<DecayingLord> detector(DecayingLord(LordParams{cfg.alpha, cfg.delta, cfg.eta}),
                                    DetectorOptions{tr.rule, cfg.plus_one});
    auto syn_rng = Rng::derive(cfg.seed, run, Purpose::synthetic);
    auto acq_rng = Rng::derive(cfg.seed, run, Purpose::acquire);
    for (const auto& s : data.stream) {
        const ContextId c = s.test.context();
        StepInput in;
        in.context = c;
        in.test_score = model->score(s.test);
        in.truth = s.test.truth();
        if (tr.uses_twin) {
            in.synthetic_batch = [&] {
                std::vector<double> sc;
                sc.reserve(data.n_tilde);
                for (const auto& x : sample_synthetic(twin, c, data.n_tilde, syn_rng)) sc.push_back(model->score(x, c));
                return CalibrationBatch(std::move(sc), BatchKind::synthetic);
            };
        }
        if (tr.rule != AcquisitionRule::never_real) {
            in.real_batch = [&] {
                std::vector<double> sc;
                sc.reserve(s.calibration.size());
                for (const auto& o : s.calibration) sc.push_back(model->score(o));
                return CalibrationBatch(std::move(sc), BatchKind::real);
            };
        }
        if (tr.rule == AcquisitionRule::active) in.gamma = cfg.gamma ? *cfg.gamma : validity->gamma_at(c);
        StepRecord rec = detector.step(in, acq_rng);
        metrics.update(rec.decision, rec.truth, rec.u);
        res.records.push_back(std::move(rec));
    }
    res.trace = metrics.trace();
    return res;
}

struct MethodSummary {
    double final_sfdr = 0.0;
    double final_power = 0.0;
    double final_cdar = 0.0;
    double max_sfdr = 0.0;
    std::size_t max_sfdr_t = 0;
    bool sfdr_controlled = false;
};

struct MethodArtifacts {
    Method method;
    std::vector<RunResult> runs;
    AggregateTrace aggregate;
    MethodSummary summary;
};

struct RunArtifacts {
    RunConfig config;
    std::vector<MethodArtifacts> methods;

    const MethodArtifacts& at(Method m) const {
        for (const auto& a : methods)
            if (a.method == m) return a;
        throw Error(std::string("method ") + to_string(m) + " was not run");
    }
};

namespace detail {

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

inline MethodSummary summarize(const AggregateTrace& agg, double alpha) {
    MethodSummary s;
    const std::size_t T = agg.size();
    s.final_sfdr = agg.sfdr.mean[T - 1];
    s.final_power = agg.power.mean[T - 1];
    s.final_cdar = agg.cdar.mean[T - 1];
    for (std::size_t t = 0; t < T; ++t)
        if (agg.sfdr.mean[t] > s.max_sfdr || t == 0) {
            s.max_sfdr = agg.sfdr.mean[t];
            s.max_sfdr_t = t + 1;
        }
    s.sfdr_controlled = s.max_sfdr <= alpha;
    return s;
}

}  // namespace detail

/// Every configured method over `runs` replicates.
inline RunArtifacts run_benchmark(const RunConfig& cfg) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg);
    RunArtifacts art;
    art.config = cfg;
    for (Method m : cfg.methods) {
        MethodArtifacts ma{m, std::vector<RunResult>(cfg.runs), {}, {}};
        detail::parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) {
            try {
                ma.runs[r] = run_once(cfg, ds, m, r);
            } catch (const std::exception& e) {
                throw Error(std::string(to_string(m)) + " run " + std::to_string(r) + " (seed " +
                            std::to_string(cfg.seed) + ") failed: " + e.what());
            }
        });
        std::vector<RunTrace> traces;
        for (const auto& r : ma.runs) traces.push_back(r.trace);
        ma.aggregate = aggregate(traces);
        ma.summary = detail::summarize(ma.aggregate, cfg.alpha);
        art.methods.push_back(std::move(ma));
    }
    return art;
}

/// %.17g, the round-trip representation used in every CSV.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kStepCsvHeader = "run,t,context,method,q,u,p,z,alpha_t,decision,truth";
inline constexpr const char* kAggregateCsvHeader = "t,method,sfdr_mean,sfdr_se,power_mean,power_se,cdar_mean,cdar_se";

inline std::string step_csv_row(std::size_t run, Method m, const StepRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    std::ostringstream os;
    os << run << ',' << r.t << ',' << r.context.id << ',' << to_string(m) << ',' << opt(r.q) << ',' << (r.u ? 1 : 0)
       << ',' << opt(r.p) << ',' << opt(r.z) << ',' << opt(r.alpha_t) << ',' << (r.decision ? 1 : 0) << ','
       << to_string(r.truth);
    return os.str();
}

inline void write_step_csv(const RunArtifacts& art, std::ostream& out) {
    out << kStepCsvHeader << '\n';
    for (const auto& ma : art.methods)
        for (std::size_t r = 0; r < ma.runs.size(); ++r)
            for (const auto& rec : ma.runs[r].records) out << step_csv_row(r, ma.method, rec) << '\n';
}

inline void write_aggregate_csv(const RunArtifacts& art, std::ostream& out) {
    out << kAggregateCsvHeader << '\n';
    for (const auto& ma : art.methods) {
        const auto& a = ma.aggregate;
        for (std::size_t t = 0; t < a.size(); ++t)
            out << t + 1 << ',' << to_string(ma.method) << ',' << format_real(a.sfdr.mean[t]) << ','
                << format_real(a.sfdr.se[t]) << ',' << format_real(a.power.mean[t]) << ','
                << format_real(a.power.se[t]) << ',' << format_real(a.cdar.mean[t]) << ',' << format_real(a.cdar.se[t])
                << '\n';
    }
}

inline nlohmann::json summary_json(const RunArtifacts& art) {
    nlohmann::json j;
    j["config"] = art.config.to_json();
    j["per_method"] = nlohmann::json::object();
    for (const auto& ma : art.methods) {
        const auto& s = ma.summary;
        j["per_method"][to_string(ma.method)] = {{"final_sfdr", s.final_sfdr},
                                                 {"final_power", s.final_power},
                                                 {"final_cdar", s.final_cdar},
                                                 {"sfdr_controlled", s.sfdr_controlled},
                                                 {"max_sfdr", s.max_sfdr},
                                                 {"max_sfdr_t", s.max_sfdr_t}};
    }
    return j;
}

/// Write steps.csv, aggregate.csv, summary.json and config.json into out_dir.
inline void emit(const RunArtifacts& art, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    auto write = [&](const std::string& name, auto&& body) {
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open " + path.string() + " for writing");
        body(out);
        out.flush();
        if (!out) throw Error("failed writing " + path.string());
    };
    write("steps.csv", [&](std::ostream& o) { write_step_csv(art, o); });
    write("aggregate.csv", [&](std::ostream& o) { write_aggregate_csv(art, o); });
    write("summary.json", [&](std::ostream& o) { o << summary_json(art).dump(2) << '\n'; });
    write("config.json", [&](std::ostream& o) { o << art.config.to_json().dump(2) << '\n'; });
    if (art.config.dump_models) {
        write("models.json", [&](std::ostream& o) {
            nlohmann::json j;
            for (const auto& ma : art.methods)
                if (!ma.runs.empty()) j[to_string(ma.method)] = ma.runs.front().models;
            o << j.dump(2) << '\n';
        });
    }
}

}  // namespace ppcoad
