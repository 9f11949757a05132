#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ppcoad/config.hpp"
#include "ppcoad/data.hpp"

using namespace ppcoad;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto p = std::filesystem::temp_directory_path() / ("ppcoad_test_" + name);
    std::ofstream(p) << body;
    return p;
}

DatasetSchema thyroid_like() {
    std::istringstream cfg(
        "features = age, tsh, sex\n"
        "categorical = sex\n"
        "label = class\n"
        "inlier_labels = negative\n"
        "context_column = age\n"
        "context_bins = 50\n");
    return DatasetSchema::from_config(Config::parse(cfg, "schema"));
}

// Rows whose first feature records their index so splits can be audited.
std::vector<Observation> indexed(std::size_t n, std::size_t offset = 0) {
    std::vector<Observation> v;
    for (std::size_t i = 0; i < n; ++i)
        v.emplace_back(std::vector<double>{static_cast<double>(offset + i)}, ContextId{0}, Truth::inlier);
    return v;
}

}  // namespace

TEST(Csv, ContextsMissingAndLabels) {
    const auto path = write_temp("thyroid.csv",
                                 "age,tsh,sex,class\n"
                                 "30,1.5,F,negative\n"
                                 "70,?,M,hypothyroid\n"
                                 "50,2.0,F,negative\n");
    const auto ds = load_csv(path.string(), thyroid_like());
    ASSERT_EQ(ds.rows.size(), 3u);
    EXPECT_EQ(ds.rows[0].context(), ContextId{0});
    EXPECT_EQ(ds.rows[1].context(), ContextId{1});
    EXPECT_EQ(ds.rows[2].context(), ContextId{1});  // right-open bins: 50 starts context 1
    EXPECT_TRUE(ds.rows[1].missing(1));
    EXPECT_FALSE(ds.rows[0].missing(1));
    EXPECT_EQ(ds.rows[0].truth(), Truth::inlier);
    EXPECT_EQ(ds.rows[1].truth(), Truth::anomaly);
    EXPECT_EQ(ds.rows[0].value(2), 0.0);  // F learned first
    EXPECT_EQ(ds.rows[1].value(2), 1.0);
    EXPECT_EQ(ds.schema.num_contexts(), 2u);
}

TEST(Csv, EmptyFileWarns) {
    const auto path = write_temp("empty.csv", "");
    const auto ds = load_csv(path.string(), thyroid_like());
    EXPECT_TRUE(ds.rows.empty());
    EXPECT_EQ(ds.warnings.size(), 1u);
}

TEST(Csv, MalformedRowNamesTheRow) {
    const auto path = write_temp("bad.csv", "age,tsh,sex,class\n30,1.5,F,negative\n40,1.0\n");
    try {
        load_csv(path.string(), thyroid_like());
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }
}

TEST(Csv, UnknownCategoryIsMissingWhenListFixed) {
    auto schema = thyroid_like();
    schema.learn_categories = false;
    schema.features[2].categories = {"F", "M"};
    const auto path = write_temp("cats.csv", "age,tsh,sex,class\n30,1.5,X,negative\n");
    const auto ds = load_csv(path.string(), schema);
    EXPECT_TRUE(ds.rows[0].missing(2));
    EXPECT_EQ(ds.warnings.size(), 1u);
}

TEST(Csv, MissingLabelIsAnError) {
    const auto path = write_temp("nolabel.csv", "age,tsh,sex,class\n30,1.5,F,?\n");
    EXPECT_THROW(load_csv(path.string(), thyroid_like()), Error);
}

TEST(Splits, PredictionPoweredThirds) {
    Rng rng(1);
    const auto sp = make_splits(indexed(90), indexed(10, 1000), SplitPlan{}, rng);
    EXPECT_EQ(sp.score_train.size(), 30u);
    EXPECT_EQ(sp.twin_train.size(), 30u);
    EXPECT_EQ(sp.n, 3u);
    ASSERT_EQ(sp.stream.size(), 10u);
    for (const auto& s : sp.stream) EXPECT_EQ(s.calibration.size(), 3u);
}

TEST(Splits, TwinlessDoublesBatch) {
    Rng rng(1);
    const auto sp = make_splits(indexed(90), indexed(10, 1000), SplitPlan{1.0 / 3, 1.0 / 3, 1.0 / 3, SplitKind::twinless}, rng);
    EXPECT_EQ(sp.score_train.size(), 30u);
    EXPECT_EQ(sp.twin_train.size(), 0u);
    EXPECT_EQ(sp.n, 6u);
}

TEST(Splits, PredictionOnlyHasNoCalibration) {
    Rng rng(1);
    const auto sp =
        make_splits(indexed(90), indexed(10, 1000), SplitPlan{1.0 / 3, 1.0 / 3, 1.0 / 3, SplitKind::prediction_only}, rng);
    EXPECT_EQ(sp.twin_train.size(), 60u);
    for (const auto& s : sp.stream) EXPECT_TRUE(s.calibration.empty());
}

TEST(Splits, DisjointFreshAndReplayable) {
    Rng a(2), b(2);
    const auto sp = make_splits(indexed(300), indexed(20, 1000), SplitPlan{}, a);
    const auto again = make_splits(indexed(300), indexed(20, 1000), SplitPlan{}, b);
    std::multiset<double> seen;
    auto take = [&](const Observation& o) { seen.insert(o.value(0)); };
    for (const auto& o : sp.score_train) take(o);
    for (const auto& o : sp.twin_train) take(o);
    for (const auto& s : sp.stream)
        for (const auto& o : s.calibration) take(o);
    EXPECT_EQ(seen.size(), std::set<double>(seen.begin(), seen.end()).size());  // no point used twice
    EXPECT_EQ(seen.size(), 300u);
    for (std::size_t t = 0; t < sp.stream.size(); ++t) {
        EXPECT_EQ(sp.stream[t].test.value(0), 1000.0 + static_cast<double>(t));
        EXPECT_EQ(sp.stream[t].calibration, again.stream[t].calibration);
    }
    EXPECT_EQ(sp.score_train, again.score_train);
}

TEST(Splits, AnomaliesStayOutOfTwinAndCalibration) {
    auto pool = indexed(90);
    for (std::size_t i = 0; i < pool.size(); i += 3) pool[i].set_truth(Truth::anomaly);
    Rng rng(3);
    const auto sp = make_splits(pool, indexed(5, 1000), SplitPlan{}, rng);
    for (const auto& o : sp.twin_train) EXPECT_NE(o.truth(), Truth::anomaly);
    for (const auto& s : sp.stream)
        for (const auto& o : s.calibration) EXPECT_NE(o.truth(), Truth::anomaly);
}

TEST(Splits, TooFewCalibrationRows) {
    Rng rng(4);
    EXPECT_THROW(make_splits(indexed(9), indexed(10, 1000), SplitPlan{}, rng), Error);
}

TEST(Mcar, IdentityAtZero) {
    Rng rng(5);
    const Observation x({1.0, 2.0}, ContextId{0}, Truth::inlier);
    EXPECT_EQ(apply_mcar_mask(x, 0.0, rng), x);
    EXPECT_TRUE(apply_mcar_mask(x, 0.0, rng).complete());
}

TEST(Mcar, BinomialMaskCount) {
    Rng rng(6);
    const int N = 10000, d = 10;
    const double q = 0.3;
    double total = 0.0;
    for (int i = 0; i < N; ++i) {
        const auto m = apply_mcar_mask(Observation(std::vector<double>(d, 1.0), ContextId{0}, Truth::inlier), q, rng);
        for (int j = 0; j < d; ++j) total += m.missing(j);
    }
    const double mean = total / N;
    EXPECT_NEAR(mean, d * q, 3.0 * std::sqrt(d * q * (1 - q) / N));
}

TEST(Imputation, MedianModeAndIdempotence) {
    std::vector<Observation> train;
    const double cont[] = {1, 2, 3, 100};
    const double cat[] = {0, 0, 1, 1};  // a, a, b, b: tie, first seen wins
    for (int i = 0; i < 4; ++i) train.emplace_back(std::vector<double>{cont[i], cat[i]}, ContextId{0}, Truth::inlier);
    const std::vector<FeatureKind> kinds{FeatureKind::continuous, FeatureKind::categorical};
    const auto imp = Imputer::fit(train, kinds);
    const Observation x({0.0, 0.0}, {1, 1}, ContextId{0}, Truth::inlier);
    const auto y = imp.impute(x);
    EXPECT_EQ(y.value(0), 2.5);
    EXPECT_EQ(y.value(1), 0.0);
    EXPECT_EQ(impute(imp, y), y);
    const Observation full({7.0, 1.0}, ContextId{0}, Truth::inlier);
    EXPECT_EQ(imp.impute(full), full);
}

TEST(Imputation, ModeCountsBeatOrder) {
    const std::vector<double> v{1, 0, 0};  // b, a, a
    EXPECT_EQ(Imputer::mode(v), 0.0);
    const std::vector<double> w{1, 0, 0, 1, 1};
    EXPECT_EQ(Imputer::mode(w), 1.0);
}
