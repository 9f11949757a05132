#pragma once

// Dataset ingestion, the score/twin/calibration split protocol, MCAR masking
// and impute-then-predict.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppcoad/config.hpp"
#include "ppcoad/core.hpp"
#include "ppcoad/random.hpp"

namespace ppcoad {

enum class FeatureKind { continuous, categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    std::vector<std::string> categories;  // code = index; learned on load when empty
};

/// Column layout of a CSV dataset and the rule mapping rows to contexts.
struct DatasetSchema {
    std::vector<FeatureSpec> features;
    std::string label_column;
    std::vector<std::string> inlier_labels;   // if set, every other label is an anomaly
    std::vector<std::string> anomaly_labels;  // used when inlier_labels is empty
    std::string context_column;               // empty: single context
    std::vector<double> context_bins;         // ascending lower edges of contexts 1..; right-open bins
    std::vector<std::string> missing_tokens{"?", ""};
    bool learn_categories = true;

    std::size_t num_contexts() const { return context_column.empty() ? 1 : context_bins.size() + 1; }

    ContextId context_of(double v) const {
        std::size_t c = 0;
        for (double b : context_bins)
            if (v >= b) ++c;
        return ContextId{c};
    }

    bool is_missing(const std::string& cell) const {
        return std::find(missing_tokens.begin(), missing_tokens.end(), cell) != missing_tokens.end();
    }

    std::vector<FeatureKind> kinds() const {
        std::vector<FeatureKind> k;
        for (const auto& f : features) k.push_back(f.kind);
        return k;
    }

    /// Keys: features, categorical, label, inlier_labels | anomaly_labels,
    /// context_column, context_bins, missing_tokens, categories.<name>.
    static DatasetSchema from_config(const Config& cfg) {
        DatasetSchema s;
        const auto cats = cfg.list("categorical");
        for (const auto& name : cfg.list("features")) {
            FeatureSpec f{name};
            if (std::find(cats.begin(), cats.end(), name) != cats.end()) f.kind = FeatureKind::categorical;
            f.categories = cfg.list("categories." + name);
            s.features.push_back(std::move(f));
        }
        if (s.features.empty()) throw Error("schema lists no features");
        s.label_column = cfg.str("label");
        s.inlier_labels = cfg.list("inlier_labels");
        s.anomaly_labels = cfg.list("anomaly_labels");
        if (s.inlier_labels.empty() && s.anomaly_labels.empty())
            throw Error("schema needs inlier_labels or anomaly_labels");
        s.context_column = cfg.str("context_column", "");
        for (const auto& b : cfg.list("context_bins")) s.context_bins.push_back(parse_double(b, "context_bins"));
        if (!std::is_sorted(s.context_bins.begin(), s.context_bins.end())) throw Error("context_bins must ascend");
        if (cfg.has("missing_tokens")) {
            s.missing_tokens = split(cfg.str("missing_tokens"), ',');
        }
        s.learn_categories = cfg.flag("learn_categories", true);
        return s;
    }
};

struct CsvDataset {
    std::vector<Observation> rows;
    DatasetSchema schema;  // with any categories learned during the load
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace detail

/// Read a headered CSV into observations. Missing tokens set the mask; a
/// categorical value outside a fixed category list is treated as missing.
inline CsvDataset load_csv(const std::string& path, DatasetSchema schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CSV file " + path);
    CsvDataset out;
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        out.warnings.push_back(path + ": empty file");
        out.schema = std::move(schema);
        return out;
    }
    const auto header = detail::csv_fields(line);
    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(path + ": column '" + name + "' not in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> feat_col;
    for (const auto& f : schema.features) feat_col.push_back(column(f.name));
    const std::size_t label_col = column(schema.label_column);
    const std::optional<std::size_t> ctx_col =
        schema.context_column.empty() ? std::nullopt : std::optional(column(schema.context_column));

    std::size_t unknown_categories = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = detail::csv_fields(line);
        if (cells.size() != header.size())
            throw Error(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " fields, header has " + std::to_string(header.size()));

        std::vector<double> x(schema.features.size(), 0.0);
        std::vector<std::uint8_t> mask(schema.features.size(), 0);
        for (std::size_t j = 0; j < schema.features.size(); ++j) {
            const auto& cell = cells[feat_col[j]];
            if (schema.is_missing(cell)) {
                mask[j] = 1;
                continue;
            }
            auto& spec = schema.features[j];
            if (spec.kind == FeatureKind::continuous) {
                x[j] = parse_double(cell, path + ": row " + std::to_string(row) + ", column " + spec.name);
            } else {
                auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
                if (it == spec.categories.end()) {
                    if (!schema.learn_categories) {
                        mask[j] = 1;
                        ++unknown_categories;
                        continue;
                    }
                    spec.categories.push_back(cell);
                    it = spec.categories.end() - 1;
                }
                x[j] = static_cast<double>(it - spec.categories.begin());
            }
        }

        const auto& lab = cells[label_col];
        if (schema.is_missing(lab)) throw Error(path + ": row " + std::to_string(row) + " has no label");
        Truth truth;
        if (!schema.inlier_labels.empty()) {
            truth = std::count(schema.inlier_labels.begin(), schema.inlier_labels.end(), lab) ? Truth::inlier
                                                                                            : Truth::anomaly;
        } else {
            truth = std::count(schema.anomaly_labels.begin(), schema.anomaly_labels.end(), lab) ? Truth::anomaly
                                                                                              : Truth::inlier;
        }

        ContextId ctx{0};
        if (ctx_col) {
            const auto& cell = cells[*ctx_col];
            if (schema.is_missing(cell))
                throw Error(path + ": row " + std::to_string(row) + " has no value for context column " +
                            schema.context_column);
            ctx = schema.context_of(parse_double(cell, path + ": row " + std::to_string(row) + ", context column"));
        }
        out.rows.emplace_back(std::move(x), std::move(mask), ctx, truth);
    }
    if (unknown_categories)
        out.warnings.push_back(path + ": " + std::to_string(unknown_categories) +
                               " unknown categorical values treated as missing");
    if (out.rows.empty()) out.warnings.push_back(path + ": no data rows");
    out.schema = std::move(schema);
    return out;
}

/// Median (continuous) or mode (categorical) per feature, fitted on training data.
class Imputer {
public:
    Imputer() = default;
    explicit Imputer(std::vector<double> fill) : fill_(std::move(fill)) {}

    static Imputer fit(std::span<const Observation> train, std::span<const FeatureKind> kinds) {
        if (train.empty()) throw Error("imputer needs training data");
        const std::size_t d = kinds.size();
        std::vector<double> fill(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> col;
            for (const auto& o : train)
                if (!o.missing(j)) col.push_back(o.raw()[j]);
            if (col.empty()) throw Error("imputer: feature " + std::to_string(j) + " is never observed in training");
            fill[j] = kinds[j] == FeatureKind::continuous ? median(col) : mode(col);
        }
        return Imputer(std::move(fill));
    }

    /// Median with the mean-of-middle-two convention for even counts.
    static double median(std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }

    /// Most frequent value; ties go to the value seen first.
    static double mode(std::span<const double> v) {
        std::vector<std::pair<double, std::size_t>> counts;
        for (double x : v) {
            auto it = std::find_if(counts.begin(), counts.end(), [x](const auto& p) { return p.first == x; });
            if (it == counts.end())
                counts.emplace_back(x, 1);
            else
                ++it->second;
        }
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (it->second > best->second) best = it;
        return best->first;
    }

    bool fitted() const noexcept { return !fill_.empty(); }
    const std::vector<double>& fill_values() const noexcept { return fill_; }

    Observation impute(Observation x) const {
        if (!fitted()) throw Error("imputer is not fitted");
        if (x.dim() != fill_.size()) throw Error("imputer dimension mismatch");
        for (std::size_t j = 0; j < x.dim(); ++j)
            if (x.missing(j)) x.fill_slot(j, fill_[j]);
        return x;
    }

private:
    std::vector<double> fill_;
};

inline Observation impute(const Imputer& imp, Observation x) { return imp.impute(std::move(x)); }

/// Mask each feature independently with probability q_miss.
inline Observation apply_mcar_mask(Observation x, double q_miss, Rng& rng) {
    if (!(q_miss >= 0.0 && q_miss < 1.0)) throw Error("missingness probability must lie in [0, 1)");
    if (q_miss == 0.0) return x;
    for (std::size_t j = 0; j < x.dim(); ++j)
        if (rng.bernoulli(q_miss)) x.mask_slot(j);
    return x;
}

/// Which data-split layout a method uses.
enum class SplitKind {
    prediction_powered,  // score | twin | calibration
    twinless,            // twin third folded into calibration
    prediction_only,     // calibration third folded into twin training
};

struct SplitPlan {
    double score_fraction = 1.0 / 3.0;
    double twin_fraction = 1.0 / 3.0;
    double calibration_fraction = 1.0 / 3.0;
    SplitKind kind = SplitKind::prediction_powered;

    void validate() const {
        if (score_fraction < 0 || twin_fraction < 0 || calibration_fraction < 0)
            throw Error("split fractions must be non-negative");
        if (std::abs(score_fraction + twin_fraction + calibration_fraction - 1.0) > 1e-9)
            throw Error("split fractions must sum to 1");
    }
};

struct StreamStep {
    Observation test;
    std::vector<Observation> calibration;  // fresh real batch; empty for prediction-only plans
};

struct Splits {
    std::vector<Observation> score_train;  // all labels
    std::vector<Observation> twin_train;   // nominal only
    std::vector<StreamStep> stream;
    std::size_t n = 0;  // real calibration batch size
};

/// Shuffle `pool` into score / twin / calibration parts and pair each test
/// point with a disjoint calibration batch. Twin and calibration parts keep
/// only nominal rows.
inline Splits make_splits(std::span<const Observation> pool, std::vector<Observation> test_points, const SplitPlan& plan,
                          Rng& rng) {
    plan.validate();
    const std::size_t T = test_points.size();
    if (T == 0) throw Error("split needs at least one test point");

    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    const double N = static_cast<double>(pool.size());
    const auto n_score = static_cast<std::size_t>(std::floor(N * plan.score_fraction + 1e-9));
    const auto n_twin = std::min(pool.size() - n_score, static_cast<std::size_t>(std::floor(N * plan.twin_fraction + 1e-9)));

    Splits out;
    std::vector<Observation> twin, cal;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Observation& o = pool[order[i]];
        if (i < n_score) {
            out.score_train.push_back(o);
        } else if (o.truth() != Truth::anomaly) {
            (i < n_score + n_twin ? twin : cal).push_back(o);
        }
    }
    switch (plan.kind) {
    case SplitKind::prediction_powered: break;
    case SplitKind::twinless:
        cal.insert(cal.end(), twin.begin(), twin.end());
        twin.clear();
        break;
    case SplitKind::prediction_only:
        twin.insert(twin.end(), cal.begin(), cal.end());
        cal.clear();
        break;
    }
    out.twin_train = std::move(twin);

    if (plan.kind != SplitKind::prediction_only) {
        out.n = cal.size() / T;
        if (out.n == 0)
            throw Error("split: " + std::to_string(cal.size()) + " nominal calibration rows cannot give " +
                        std::to_string(T) + " steps at least one point each; need at least " + std::to_string(T));
    }
    out.stream.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        StreamStep s{std::move(test_points[t]), {}};
        for (std::size_t i = 0; i < out.n; ++i) s.calibration.push_back(cal[t * out.n + i]);
        out.stream.push_back(std::move(s));
    }
    return out;
}

/// Hold out `fraction` of the nominal rows as validation points.
inline std::pair<std::vector<Observation>, std::vector<Observation>> carve_validation(std::span<const Observation> train,
                                                                                     double fraction, Rng& rng) {
    std::vector<std::size_t> nominal;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train[i].truth() != Truth::anomaly) nominal.push_back(i);
    rng.shuffle(nominal);
    const auto take = static_cast<std::size_t>(std::floor(static_cast<double>(nominal.size()) * fraction + 1e-9));
    std::vector<std::uint8_t> held(train.size(), 0);
    for (std::size_t i = 0; i < take; ++i) held[nominal[i]] = 1;
    std::vector<Observation> fit, val;
    for (std::size_t i = 0; i < train.size(); ++i) (held[i] ? val : fit).push_back(train[i]);
    return {std::move(fit), std::move(val)};
}

}  // namespace ppcoad
