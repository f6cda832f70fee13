#include "alphaflops/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace alphaflops;

namespace {

AlphaParams ground_truth() {
    AlphaParams p;
    p.regimes[1] = {0.02, 0.99, 1.0};
    p.regimes[2] = {0.001, 0.56, 4.0};
    p.time_per_flop_c = 2e-11;
    return p;
}

// Surfaces spanning 1..1e5 in both kernel regimes.
std::vector<LayerDescriptor> spanning_layouts() {
    std::vector<LayerDescriptor> layouts;
    layouts.push_back(DenseDescriptor{512, 512, true});
    layouts.push_back(DenseDescriptor{2048, 1024, true});
    for (std::uint64_t w : {1, 2, 3, 5, 8, 13, 21, 34, 55, 90, 144, 233, 316})
        layouts.push_back(Conv2dDescriptor{w, w, 64, 64, 1, 1, 1, Padding::Same, 1});
    for (std::uint64_t w : {1, 2, 4, 8, 16, 32, 64, 128, 256, 316})
        layouts.push_back(Conv2dDescriptor{w, w, 16, 16, 3, 3, 1, Padding::Same, 1});
    for (std::uint64_t w : {3, 9, 27, 81, 243})
        layouts.push_back(Conv2dDescriptor{w, w, 8, 24, 5, 5, 1, Padding::Same, 2});
    return layouts;
}

std::vector<TimingRecord> four_point_regression() {
    std::vector<TimingRecord> recs;
    auto add = [&](std::uint64_t w, std::uint64_t h, std::uint64_t ci, std::uint64_t co,
                   double ms) {
        recs.push_back({Conv2dDescriptor{w, h, ci, co, 1, 1, 1, Padding::Same, 1},
                        "bench-a", ms, 30, std::nullopt});
    };
    add(1, 1, 12800, 12800, 6.392);
    add(1, 2, 6400, 12800, 3.224);
    add(2, 2, 6400, 6400, 1.626);
    add(4, 4, 3200, 3200, 0.454);
    return recs;
}

}  // namespace

TEST(Synthesize, NoiselessTimesEqualModelPrediction) {
    AlphaParams truth = ground_truth();
    auto layouts = spanning_layouts();
    auto records = synthesize_dataset(truth, layouts, 0.0, 7);
    ASSERT_EQ(records.size(), layouts.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].layer, layouts[i]);
        EXPECT_EQ(records[i].device, "synthetic");
        EXPECT_EQ(records[i].time_ms, predicted_time(layouts[i], truth) * 1e3);
    }
}

TEST(Synthesize, DeterministicPerSeedAndNoiseBounded) {
    AlphaParams truth = ground_truth();
    auto layouts = spanning_layouts();
    auto a = synthesize_dataset(truth, layouts, 0.05, 11);
    auto b = synthesize_dataset(truth, layouts, 0.05, 11);
    EXPECT_EQ(a, b);
    auto c = synthesize_dataset(truth, layouts, 0.05, 12);
    EXPECT_NE(a, c);
    for (std::size_t i = 0; i < a.size(); ++i) {
        double clean = predicted_time(layouts[i], truth) * 1e3;
        EXPECT_LE(std::abs(a[i].time_ms / clean - 1.0), 0.05 + 1e-12);
    }
}

TEST(Synthesize, RejectsOutOfRangeNoise) {
    EXPECT_THROW(synthesize_dataset(ground_truth(), spanning_layouts(), 0.5, 1),
                 std::invalid_argument);
    EXPECT_THROW(synthesize_dataset(ground_truth(), spanning_layouts(), -0.1, 1),
                 std::invalid_argument);
}

TEST(Evaluate, ZeroErrorOnNoiselessData) {
    AlphaParams truth = ground_truth();
    auto records = synthesize_dataset(truth, spanning_layouts(), 0.0, 3);
    FitResult res = evaluate(records, truth);
    EXPECT_EQ(res.mape, 0.0);
    EXPECT_EQ(res.max_ape, 0.0);
    EXPECT_EQ(res.n_records, records.size());
}

TEST(Evaluate, EmptyListRejected) {
    EXPECT_THROW(evaluate({}, ground_truth()), DataError);
}

TEST(Fit, RecoversGroundTruthFromNoiselessData) {
    AlphaParams truth = ground_truth();
    auto records = synthesize_dataset(truth, spanning_layouts(), 0.0, 7);
    FitResult res = fit(records);
    EXPECT_LT(res.mape, 1.0);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.n_records, records.size());
    EXPECT_NEAR(res.params.regimes.at(1).beta, 0.02, 0.2 * 0.02);
    EXPECT_NEAR(res.params.regimes.at(1).gamma, 0.99, 0.05);
    EXPECT_EQ(res.params.regimes.at(1).s_k, 1.0);
    EXPECT_NEAR(res.params.time_per_flop_c, 2e-11, 0.2 * 2e-11);
}

TEST(Fit, FivePercentNoiseStaysUnderFivePercentError) {
    AlphaParams truth = ground_truth();
    auto records = synthesize_dataset(truth, spanning_layouts(), 0.05, 19);
    FitResult res = fit(records);
    EXPECT_LT(res.mape, 5.0);
}

TEST(Fit, Deterministic) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.05, 23);
    FitResult a = fit(records);
    FitResult b = fit(records);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.mape, b.mape);
    EXPECT_EQ(a.max_ape, b.max_ape);
    EXPECT_EQ(a.converged, b.converged);
}

TEST(Fit, DuplicateRecordsDoNotMoveTheOptimum) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.05, 29);
    auto padded = records;
    padded.insert(padded.end(), records.begin(), records.begin() + 6);
    EXPECT_EQ(fit(padded).params, fit(records).params);
}

TEST(Fit, EvaluateReproducesReportedError) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.05, 31);
    FitResult res = fit(records);
    FitResult re = evaluate(records, res.params);
    EXPECT_EQ(re.mape, res.mape);
    EXPECT_EQ(re.max_ape, res.max_ape);
}

TEST(Fit, MixedDevicesRejectedWithBothLabels) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.0, 2);
    records[1].device = "other-box";
    try {
        fit(records);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("synthetic"), std::string::npos) << msg;
        EXPECT_NE(msg.find("other-box"), std::string::npos) << msg;
    }
}

TEST(Fit, RejectsTooFewRecordsPerRegime) {
    EXPECT_THROW(fit({}), DataError);
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.0, 2);
    std::vector<TimingRecord> three(records.begin() + 2, records.begin() + 5);
    try {
        fit(three);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("need at least 4"), std::string::npos);
    }
}

TEST(Fit, DenseOnlyDataIsNonIdentifiable) {
    std::vector<LayerDescriptor> layouts;
    for (std::uint64_t d : {64, 128, 256, 512, 1024})
        layouts.push_back(DenseDescriptor{d, d, true});
    auto records = synthesize_dataset(ground_truth(), layouts, 0.0, 2);
    try {
        fit(records);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("non-identifiable"), std::string::npos);
    }
}

TEST(Fit, RegimeWithoutDataStaysNeutral) {
    std::vector<LayerDescriptor> layouts;
    for (std::uint64_t w : {1, 4, 16, 64, 256})
        layouts.push_back(Conv2dDescriptor{w, w, 32, 32, 1, 1, 1, Padding::Same, 1});
    auto records = synthesize_dataset(ground_truth(), layouts, 0.0, 2);
    FitResult res = fit(records);
    EXPECT_EQ(res.params.regimes.at(2), RegimeParams{});
}

TEST(Fit, FixedValuesAreHeldExactly) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.02, 37);
    FixedParams fixed;
    fixed.gamma = 1.0;
    fixed.c = 2e-11;
    FitResult res = fit(records, fixed);
    EXPECT_EQ(res.params.regimes.at(1).gamma, 1.0);
    EXPECT_EQ(res.params.regimes.at(2).gamma, 1.0);
    EXPECT_EQ(res.params.time_per_flop_c, 2e-11);

    FixedParams bad;
    bad.c = 0.0;
    EXPECT_THROW(fit(records, bad), std::invalid_argument);
}

TEST(Fit, FixedBetaSurvivesTransformRoundTrip) {
    auto records = synthesize_dataset(ground_truth(), spanning_layouts(), 0.0, 41);
    FixedParams fixed;
    fixed.beta = 0.02;
    FitResult res = fit(records, fixed);
    EXPECT_NEAR(res.params.regimes.at(1).beta, 0.02, 0.02 * 1e-12);
    EXPECT_NEAR(res.params.regimes.at(2).beta, 0.02, 0.02 * 1e-12);
}

TEST(Fit, TrimDropsTheOutlier) {
    AlphaParams truth = ground_truth();
    auto records = synthesize_dataset(truth, spanning_layouts(), 0.0, 43);
    records[5].time_ms *= 10.0;

    FitResult raw = fit(records);
    FitConfig cfg;
    cfg.trim = true;
    FitResult trimmed = fit(records, {}, cfg);
    EXPECT_LT(trimmed.mape, raw.mape);
    EXPECT_LT(trimmed.mape, 0.5);
    EXPECT_EQ(trimmed.n_records, records.size() - 1);
}

TEST(Fit, FourPointRegressionWithinFifteenPercent) {
    FitResult res = fit(four_point_regression());
    EXPECT_LE(res.mape, 15.0);
    EXPECT_EQ(res.n_records, 4u);
}
