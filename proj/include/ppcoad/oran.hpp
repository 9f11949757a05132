#pragma once

// Synthetic O-RAN conflict data: a fixed random tripartite control graph
// (xApps -> parameters -> KPIs, plus parameter -> parameter couplings),
// nominal samples with no conflicts and anomaly samples with one injected
// conflict.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppcoad/core.hpp"
#include "ppcoad/random.hpp"
#include "ppcoad/scoring.hpp"

namespace ppcoad::oran {

enum class Conflict : std::uint8_t { none = 0, direct = 1, indirect = 2, implicit = 3 };

inline const char* to_string(Conflict c) {
    switch (c) {
    case Conflict::none: return "none";
    case Conflict::direct: return "direct";
    case Conflict::indirect: return "indirect";
    case Conflict::implicit: return "implicit";
    }
    return "none";
}

/// Set of conflict types present in a state.
struct ConflictSet {
    bool direct = false;
    bool indirect = false;
    bool implicit = false;

    bool empty() const noexcept { return !direct && !indirect && !implicit; }
    bool contains(Conflict c) const noexcept {
        switch (c) {
        case Conflict::direct: return direct;
        case Conflict::indirect: return indirect;
        case Conflict::implicit: return implicit;
        case Conflict::none: return empty();
        }
        return false;
    }
    friend bool operator==(const ConflictSet&, const ConflictSet&) = default;
};

struct GraphShape {
    std::size_t xapps = 10;
    std::size_t params = 15;
    std::size_t kpis = 5;
    double edge_prob = 0.5;
};

/// Adjacency matrices of the control graph.
class OranGraph {
public:
    OranGraph() = default;
    explicit OranGraph(GraphShape shape)
        : shape_(shape),
          x2p_(shape.xapps, std::vector<std::uint8_t>(shape.params, 0)),
          p2k_(shape.params, std::vector<std::uint8_t>(shape.kpis, 0)),
          p2p_(shape.params, std::vector<std::uint8_t>(shape.params, 0)) {}

    /// Every candidate edge included independently with probability edge_prob.
    static OranGraph random(GraphShape shape, Rng& rng) {
        OranGraph g(shape);
        for (auto& row : g.x2p_)
            for (auto& e : row) e = rng.bernoulli(shape.edge_prob);
        for (auto& row : g.p2k_)
            for (auto& e : row) e = rng.bernoulli(shape.edge_prob);
        for (std::size_t i = 0; i < shape.params; ++i)
            for (std::size_t j = 0; j < shape.params; ++j)
                if (i != j) g.p2p_[i][j] = rng.bernoulli(shape.edge_prob);
        return g;
    }

    const GraphShape& shape() const noexcept { return shape_; }
    bool controls(std::size_t x, std::size_t p) const { return x2p_.at(x).at(p) != 0; }
    bool affects(std::size_t p, std::size_t k) const { return p2k_.at(p).at(k) != 0; }
    bool couples(std::size_t p, std::size_t q) const { return p2p_.at(p).at(q) != 0; }
    bool coupled(std::size_t p, std::size_t q) const { return couples(p, q) || couples(q, p); }

    void set_control(std::size_t x, std::size_t p, bool on = true) { x2p_.at(x).at(p) = on; }
    void set_affect(std::size_t p, std::size_t k, bool on = true) { p2k_.at(p).at(k) = on; }
    void set_couple(std::size_t p, std::size_t q, bool on = true) {
        if (p == q) throw Error("parameter cannot couple to itself");
        p2p_.at(p).at(q) = on;
    }

    std::size_t out_degree(std::size_t x) const {
        return static_cast<std::size_t>(std::count(x2p_.at(x).begin(), x2p_.at(x).end(), 1));
    }

    nlohmann::json to_json() const {
        auto lists = [](const std::vector<std::vector<std::uint8_t>>& m) {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& row : m) {
                std::vector<std::size_t> targets;
                for (std::size_t c = 0; c < row.size(); ++c)
                    if (row[c]) targets.push_back(c);
                j.push_back(targets);
            }
            return j;
        };
        return {{"xapps", shape_.xapps},     {"params", shape_.params},   {"kpis", shape_.kpis},
                {"xapp_param", lists(x2p_)}, {"param_kpi", lists(p2k_)}, {"param_param", lists(p2p_)}};
    }

private:
    GraphShape shape_;
    std::vector<std::vector<std::uint8_t>> x2p_, p2k_, p2p_;
};

/// Binary node states: xApp active, parameter changed, KPI changed.
struct OranState {
    std::vector<std::uint8_t> xapp, param, kpi;

    explicit OranState(const GraphShape& s = {}) : xapp(s.xapps, 0), param(s.params, 0), kpi(s.kpis, 0) {}
    friend bool operator==(const OranState&, const OranState&) = default;
};

inline ConflictSet check_conflicts(const OranGraph& g, const OranState& s) {
    const auto& sh = g.shape();
    if (s.xapp.size() != sh.xapps || s.param.size() != sh.params || s.kpi.size() != sh.kpis)
        throw Error("state does not cover every graph node");
    ConflictSet out;
    for (std::size_t p = 0; p < sh.params && !out.direct; ++p) {
        std::size_t controllers = 0;
        for (std::size_t x = 0; x < sh.xapps; ++x)
            if (s.xapp[x] && g.controls(x, p)) ++controllers;
        out.direct = controllers >= 2;
    }
    for (std::size_t k = 0; k < sh.kpis && !out.indirect; ++k) {
        std::size_t changed = 0;
        for (std::size_t p = 0; p < sh.params; ++p)
            if (s.param[p] && g.affects(p, k)) ++changed;
        out.indirect = changed >= 2;
    }
    for (std::size_t p = 0; p < sh.params && !out.implicit; ++p)
        for (std::size_t q = p + 1; q < sh.params && !out.implicit; ++q)
            out.implicit = s.param[p] && s.param[q] && g.coupled(p, q);
    return out;
}

/// Total active xApp -> parameter control edges.
inline std::size_t activity(const OranGraph& g, const OranState& s) {
    std::size_t a = 0;
    for (std::size_t x = 0; x < g.shape().xapps; ++x)
        if (s.xapp[x]) a += g.out_degree(x);
    return a;
}

struct OranSample {
    OranState state;
    Conflict label = Conflict::none;
    std::size_t activity = 0;
    ContextId context;

    /// Node states as a feature vector: xApps, then parameters, then KPIs.
    std::vector<double> features() const {
        std::vector<double> f;
        f.reserve(state.xapp.size() + state.param.size() + state.kpi.size());
        for (auto v : state.xapp) f.push_back(v);
        for (auto v : state.param) f.push_back(v);
        for (auto v : state.kpi) f.push_back(v);
        return f;
    }

    Observation observation() const {
        return Observation(features(), context, label == Conflict::none ? Truth::inlier : Truth::anomaly);
    }
};

namespace detail {

inline void propagate_kpis(const OranGraph& g, OranState& s) {
    for (std::size_t k = 0; k < g.shape().kpis; ++k) {
        s.kpi[k] = 0;
        for (std::size_t p = 0; p < g.shape().params; ++p)
            if (s.param[p] && g.affects(p, k)) s.kpi[k] = 1;
    }
}

// Active xApps that share a controlled parameter with another active xApp.
inline std::vector<std::size_t> direct_participants(const OranGraph& g, const OranState& s) {
    const auto& sh = g.shape();
    std::vector<std::uint8_t> flag(sh.xapps, 0);
    for (std::size_t p = 0; p < sh.params; ++p) {
        std::vector<std::size_t> ctl;
        for (std::size_t x = 0; x < sh.xapps; ++x)
            if (s.xapp[x] && g.controls(x, p)) ctl.push_back(x);
        if (ctl.size() >= 2)
            for (auto x : ctl) flag[x] = 1;
    }
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < sh.xapps; ++x)
        if (flag[x]) out.push_back(x);
    return out;
}

// Changed parameters involved in an indirect or implicit conflict.
inline std::vector<std::size_t> param_participants(const OranGraph& g, const OranState& s) {
    const auto& sh = g.shape();
    std::vector<std::uint8_t> flag(sh.params, 0);
    for (std::size_t k = 0; k < sh.kpis; ++k) {
        std::vector<std::size_t> changed;
        for (std::size_t p = 0; p < sh.params; ++p)
            if (s.param[p] && g.affects(p, k)) changed.push_back(p);
        if (changed.size() >= 2)
            for (auto p : changed) flag[p] = 1;
    }
    for (std::size_t p = 0; p < sh.params; ++p)
        for (std::size_t q = p + 1; q < sh.params; ++q)
            if (s.param[p] && s.param[q] && g.coupled(p, q)) flag[p] = flag[q] = 1;
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < sh.params; ++p)
        if (flag[p]) out.push_back(p);
    return out;
}

}  // namespace detail

/// Conflict-free state: random activations, then repair. Direct conflicts are
/// repaired by deactivating a random participating xApp; indirect and
/// implicit conflicts by reverting a random participating parameter change.
inline OranState sample_nominal(const OranGraph& g, Rng& rng) {
    const auto& sh = g.shape();
    OranState s(sh);
    for (auto& x : s.xapp) x = rng.bernoulli(0.5);
    for (auto who = detail::direct_participants(g, s); !who.empty(); who = detail::direct_participants(g, s))
        s.xapp[who[rng.index(who.size())]] = 0;
    for (std::size_t p = 0; p < sh.params; ++p)
        for (std::size_t x = 0; x < sh.xapps; ++x)
            if (s.xapp[x] && g.controls(x, p)) s.param[p] = 1;
    for (auto who = detail::param_participants(g, s); !who.empty(); who = detail::param_participants(g, s))
        s.param[who[rng.index(who.size())]] = 0;
    detail::propagate_kpis(g, s);
    return s;
}

/// Conflict types the graph can express at all.
inline std::vector<Conflict> feasible_conflicts(const OranGraph& g) {
    const auto& sh = g.shape();
    std::vector<Conflict> out;
    for (std::size_t p = 0; p < sh.params; ++p) {
        std::size_t c = 0;
        for (std::size_t x = 0; x < sh.xapps; ++x) c += g.controls(x, p);
        if (c >= 2) {
            out.push_back(Conflict::direct);
            break;
        }
    }
    for (std::size_t k = 0; k < sh.kpis; ++k) {
        std::size_t c = 0;
        for (std::size_t p = 0; p < sh.params; ++p) c += g.affects(p, k);
        if (c >= 2) {
            out.push_back(Conflict::indirect);
            break;
        }
    }
    for (std::size_t p = 0; p < sh.params; ++p) {
        bool any = false;
        for (std::size_t q = 0; q < sh.params; ++q) any = any || (p != q && g.couples(p, q));
        if (any) {
            out.push_back(Conflict::implicit);
            break;
        }
    }
    return out;
}

namespace detail {

template <class T>
std::pair<T, T> pick_two(const std::vector<T>& v, Rng& rng) {
    const std::size_t i = rng.index(v.size());
    std::size_t j = rng.index(v.size() - 1);
    if (j >= i) ++j;
    return {v[i], v[j]};
}

}  // namespace detail

/// Inject a minimal witness of `type` into a nominal state.
inline OranState inject_conflict(const OranGraph& g, OranState s, Conflict type, Rng& rng) {
    const auto& sh = g.shape();
    switch (type) {
    case Conflict::direct: {
        std::vector<std::size_t> params;
        for (std::size_t p = 0; p < sh.params; ++p) {
            std::size_t c = 0;
            for (std::size_t x = 0; x < sh.xapps; ++x) c += g.controls(x, p);
            if (c >= 2) params.push_back(p);
        }
        if (params.empty()) throw Error("graph admits no direct conflict");
        const std::size_t p = params[rng.index(params.size())];
        std::vector<std::size_t> ctl;
        for (std::size_t x = 0; x < sh.xapps; ++x)
            if (g.controls(x, p)) ctl.push_back(x);
        auto [a, b] = detail::pick_two(ctl, rng);
        s.xapp[a] = s.xapp[b] = 1;
        s.param[p] = 1;
        break;
    }
    case Conflict::indirect: {
        std::vector<std::size_t> kpis;
        for (std::size_t k = 0; k < sh.kpis; ++k) {
            std::size_t c = 0;
            for (std::size_t p = 0; p < sh.params; ++p) c += g.affects(p, k);
            if (c >= 2) kpis.push_back(k);
        }
        if (kpis.empty()) throw Error("graph admits no indirect conflict");
        const std::size_t k = kpis[rng.index(kpis.size())];
        std::vector<std::size_t> parents;
        for (std::size_t p = 0; p < sh.params; ++p)
            if (g.affects(p, k)) parents.push_back(p);
        auto [a, b] = detail::pick_two(parents, rng);
        s.param[a] = s.param[b] = 1;
        break;
    }
    case Conflict::implicit: {
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t p = 0; p < sh.params; ++p)
            for (std::size_t q = 0; q < sh.params; ++q)
                if (p != q && g.couples(p, q)) edges.emplace_back(p, q);
        if (edges.empty()) throw Error("graph admits no implicit conflict");
        auto [a, b] = edges[rng.index(edges.size())];
        s.param[a] = s.param[b] = 1;
        break;
    }
    case Conflict::none: return s;
    }
    detail::propagate_kpis(g, s);
    return s;
}

/// Lower-empirical-quartile boundaries of the activity values.
inline std::array<double, 3> activity_quartiles(std::vector<double> activities) {
    if (activities.empty()) throw Error("activity quartiles need at least one sample");
    return {lower_quantile(activities, 0.25), lower_quantile(activities, 0.5), lower_quantile(activities, 0.75)};
}

/// Context 0..3: bins [min, q1), [q1, q2), [q2, q3), [q3, max].
inline ContextId activity_context(double activity, const std::array<double, 3>& q) {
    std::size_t c = 0;
    for (double b : q)
        if (activity >= b) ++c;
    return ContextId{c};
}

struct OranOptions {
    std::uint64_t graph_seed = 1;
    std::uint64_t sample_seed = 2;
    std::size_t n_samples = 10000;
    double anomaly_frac = 0.1;
    GraphShape shape;
    double train_fraction = 1.0 / 3.0;  // leading share of samples whose quartiles define contexts
};

struct OranDataset {
    OranGraph graph;
    std::vector<OranSample> samples;
    std::array<double, 3> quartiles{};

    std::vector<Observation> observations() const {
        std::vector<Observation> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.observation());
        return out;
    }

    /// Recompute contexts from the activity quartiles of `train_idx`.
    void assign_contexts(std::span<const std::size_t> train_idx) {
        std::vector<double> a;
        for (auto i : train_idx) a.push_back(static_cast<double>(samples.at(i).activity));
        quartiles = activity_quartiles(std::move(a));
        for (auto& s : samples) s.context = activity_context(static_cast<double>(s.activity), quartiles);
    }
};

inline constexpr std::size_t kOranContexts = 4;

inline OranDataset generate_oran(const OranOptions& opt) {
    if (!(opt.anomaly_frac >= 0.0 && opt.anomaly_frac < 1.0)) throw Error("anomaly fraction must lie in [0, 1)");
    if (opt.n_samples == 0) throw Error("O-RAN generator needs at least one sample");
    Rng graph_rng(opt.graph_seed);
    OranDataset ds;
    ds.graph = OranGraph::random(opt.shape, graph_rng);
    const auto feasible = feasible_conflicts(ds.graph);
    const auto n_anom = static_cast<std::size_t>(std::llround(opt.anomaly_frac * static_cast<double>(opt.n_samples)));
    if (n_anom > 0 && feasible.empty())
        throw Error("graph from seed " + std::to_string(opt.graph_seed) +
                    " admits no conflict type; choose another graph seed");

    Rng rng(opt.sample_seed);
    std::vector<std::uint8_t> is_anom(opt.n_samples, 0);
    std::fill(is_anom.begin(), is_anom.begin() + static_cast<std::ptrdiff_t>(n_anom), 1);
    rng.shuffle(is_anom);

    ds.samples.reserve(opt.n_samples);
    for (std::size_t i = 0; i < opt.n_samples; ++i) {
        OranSample s;
        s.state = sample_nominal(ds.graph, rng);
        if (is_anom[i]) {
            s.label = feasible[rng.index(feasible.size())];
            s.state = inject_conflict(ds.graph, std::move(s.state), s.label, rng);
        }
        s.activity = activity(ds.graph, s.state);
        ds.samples.push_back(std::move(s));
    }
    const auto n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(opt.n_samples) * opt.train_fraction + 1e-9)));
    std::vector<std::size_t> train(n_train);
    for (std::size_t i = 0; i < n_train; ++i) train[i] = i;
    ds.assign_contexts(train);
    return ds;
}

/// One binary column per node plus conflict_type and context.
inline void write_oran_csv(const OranDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    const auto& sh = ds.graph.shape();
    for (std::size_t x = 0; x < sh.xapps; ++x) out << "xapp_" << x << ',';
    for (std::size_t p = 0; p < sh.params; ++p) out << "param_" << p << ',';
    for (std::size_t k = 0; k < sh.kpis; ++k) out << "kpi_" << k << ',';
    out << "conflict_type,context\n";
    for (const auto& s : ds.samples) {
        for (auto v : s.state.xapp) out << int(v) << ',';
        for (auto v : s.state.param) out << int(v) << ',';
        for (auto v : s.state.kpi) out << int(v) << ',';
        out << to_string(s.label) << ',' << s.context.id << '\n';
    }
    if (!out) throw Error("failed writing " + path);
}

inline void write_graph_json(const OranGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << g.to_json().dump(2) << '\n';
    if (!out) throw Error("failed writing " + path);
}

}  // namespace ppcoad::oran
