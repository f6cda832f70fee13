#include "alphaflops/alpha.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace alphaflops;

namespace {

// High-precision reference evaluations of the correction factor at the
// default k=1 parameters (beta=0.02, gamma=0.99, s_1=1), frozen from an
// independent arbitrary-precision computation.
constexpr double kAlphaS2 = 0.5134456447336343;
constexpr double kAlphaS4 = 0.26854273962457925;
constexpr double kAlphaS16 = 0.08331537165212957;

RegimeParams k1_defaults() { return {0.02, 0.99, 1.0}; }

}  // namespace

TEST(AlphaFactor, UnitSurfaceIsOne) {
    for (double beta : {0.001, 0.02, 0.3, 1.0})
        for (double gamma : {0.05, 0.56, 0.99, 1.0})
            EXPECT_EQ(alpha_factor(1.0, {beta, gamma, 1.0}), 1.0);
}

TEST(AlphaFactor, BetaOneIsIdentity) {
    for (double s : {1.0, 2.0, 37.5, 1e6})
        for (double gamma : {0.05, 0.5, 1.0})
            EXPECT_EQ(alpha_factor(s, {1.0, gamma, 4.0}), 1.0);
}

TEST(AlphaFactor, FrozenReferenceValues) {
    EXPECT_NEAR(alpha_factor(2.0, k1_defaults()), kAlphaS2, 5e-16);
    EXPECT_NEAR(alpha_factor(4.0, k1_defaults()), kAlphaS4, 5e-16);
    EXPECT_NEAR(alpha_factor(16.0, k1_defaults()), kAlphaS16, 5e-16);
}

TEST(AlphaFactor, ClampsBelowMinimumSurface) {
    RegimeParams p{0.001, 0.56, 8.0};
    EXPECT_EQ(alpha_factor(1.0, p), 1.0);
    EXPECT_EQ(alpha_factor(8.0, p), 1.0);
    EXPECT_LT(alpha_factor(9.0, p), 1.0);
}

TEST(AlphaFactor, StrictlyDecreasingAboveMinimumSurface) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        double beta = 0.0001 + 0.9 * (rng() % 1000) / 1000.0;
        double gamma = 0.05 + 0.95 * (rng() % 1000) / 1000.0;
        double s_k = 1.0 + (rng() % 40);
        RegimeParams p{beta, gamma, s_k};
        double s = s_k + 1 + (rng() % 1000);
        double a1 = alpha_factor(s, p);
        double a2 = alpha_factor(s * 1.5, p);
        EXPECT_LT(a2, a1);
        EXPECT_GT(a2, 0.0);
        EXPECT_LE(a1, 1.0);
    }
}

TEST(AlphaFactor, RejectsSubUnitSurface) {
    EXPECT_THROW(alpha_factor(0.5, k1_defaults()), std::invalid_argument);
}

TEST(Gustafson, Endpoints) {
    EXPECT_EQ(gustafson_ratio(1.0, 7.0), 1.0);
    EXPECT_DOUBLE_EQ(gustafson_ratio(0.0, 4.0), 0.25);
    EXPECT_NEAR(gustafson_ratio(0.02, 2.0), 0.51, 1e-15);
}

TEST(Gustafson, MatchesAlphaWithGammaOneUnitSk) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        double beta = 0.0001 + 0.9999 * (rng() % 10000) / 10000.0;
        double s = 1.0 + (rng() % 100000) / 7.0;
        double a = alpha_factor(s, {beta, 1.0, 1.0});
        double g = gustafson_ratio(beta, s);
        EXPECT_NEAR(a, g, 1e-12 * g);
    }
}

TEST(Gustafson, RejectsOutOfRangeInputs) {
    EXPECT_THROW(gustafson_ratio(-0.1, 2.0), std::invalid_argument);
    EXPECT_THROW(gustafson_ratio(1.1, 2.0), std::invalid_argument);
    EXPECT_THROW(gustafson_ratio(0.5, 0.5), std::invalid_argument);
}

TEST(Params, RegimeLookupUsesLargestThresholdBelow) {
    AlphaParams p = default_params();
    EXPECT_EQ(regime_for(p, 1).beta, 0.02);
    EXPECT_EQ(regime_for(p, 2).beta, 0.001);
    EXPECT_EQ(regime_for(p, 9).beta, 0.001);
    p.regimes[5] = {0.7, 0.5, 2.0};
    EXPECT_EQ(regime_for(p, 4).beta, 0.001);
    EXPECT_EQ(regime_for(p, 5).beta, 0.7);
    EXPECT_EQ(regime_for(p, 11).beta, 0.7);
}

TEST(Params, ValidationRejectsBrokenTables) {
    AlphaParams p = default_params();
    p.time_per_flop_c = 0.0;
    EXPECT_THROW(validate(p), std::invalid_argument);

    p = default_params();
    p.regimes.erase(1);
    EXPECT_THROW(validate(p), std::invalid_argument);

    p = default_params();
    p.regimes.erase(2);
    EXPECT_THROW(validate(p), std::invalid_argument);

    p = default_params();
    p.regimes[1].s_k = 2.0;
    EXPECT_THROW(validate(p), std::invalid_argument);

    p = default_params();
    p.regimes[2].beta = 0.0;
    EXPECT_THROW(validate(p), std::invalid_argument);
}

TEST(AlphaFlops, DenseUnitSurfacePassesThrough) {
    AlphaParams p = default_params();
    EXPECT_DOUBLE_EQ(alpha_flops(DenseDescriptor{12800, 12800, true}, p), 327.68e6);
}

TEST(AlphaFlops, AppliesSurfaceCorrection) {
    AlphaParams p = default_params();
    Conv2dDescriptor c{2, 2, 6400, 6400, 1, 1, 1, Padding::Same, 1};
    EXPECT_DOUBLE_EQ(alpha_flops(c, p), 327.68e6 * alpha_factor(4.0, k1_defaults()));
}

TEST(AlphaFlops, NeverExceedsRawFlops) {
    AlphaParams p = default_params();
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
        Conv2dDescriptor c;
        c.w_in = 1 + rng() % 30;
        c.h_in = 1 + rng() % 30;
        c.c_in = 1 + rng() % 16;
        c.c_out = 1 + rng() % 16;
        c.k1 = 1 + rng() % 5;
        c.k2 = 1 + rng() % 5;
        c.batch = 1 + rng() % 4;
        double af = alpha_flops(c, p);
        double raw = static_cast<double>(conv_flops(c));
        EXPECT_LE(af, raw);
        EXPECT_GT(af, 0.0);
    }
}

TEST(AlphaFlops, BetaOneRegimeEqualsRawFlops) {
    AlphaParams p;
    p.regimes[1] = {1.0, 1.0, 1.0};
    p.regimes[2] = {1.0, 1.0, 1.0};
    p.time_per_flop_c = 1e-11;
    Conv2dDescriptor c{8, 8, 3, 5, 3, 3, 1, Padding::Same, 2};
    EXPECT_EQ(alpha_flops(c, p), static_cast<double>(conv_flops(c)));
}

TEST(AlphaFlops, DenseMatchesItsUnaryConvolution) {
    AlphaParams p = default_params();
    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        DenseDescriptor d{1 + rng() % 2000, 1 + rng() % 2000, bool(rng() % 2)};
        EXPECT_EQ(alpha_flops(d, p), alpha_flops(dense_as_conv(d), p));
    }
}

TEST(PredictedTime, LinearInCalibrationConstant) {
    AlphaParams p = default_params();
    Conv2dDescriptor c{4, 4, 320, 320, 1, 1, 1, Padding::Same, 1};
    double t1 = predicted_time(c, p);
    p.time_per_flop_c *= 2.0;
    EXPECT_DOUBLE_EQ(predicted_time(c, p), 2.0 * t1);
}

TEST(PredictedTime, CalibratedAnchor) {
    AlphaParams p = default_params();
    p.time_per_flop_c = 6.154e-3 / 327.68e6;
    Conv2dDescriptor config1{1, 1, 12800, 12800, 1, 1, 1, Padding::Same, 1};
    EXPECT_NEAR(predicted_time(config1, p) * 1e3, 6.154, 1e-9);
}

TEST(ParamsFile, FormatParsesBackExactly) {
    AlphaParams p = default_params();
    p.time_per_flop_c = 1.8780517578125e-11;
    AlphaParams back = parse_params(format_params(p), "mem");
    EXPECT_EQ(back, p);
}

TEST(ParamsFile, ParsesReferenceText) {
    const char* text =
        "time_per_flop_c = 1.878e-11\n"
        "\n"
        "[regime k=1]\n"
        "beta = 0.02\n"
        "gamma = 0.99\n"
        "s_k = 1\n"
        "\n"
        "[regime k=2]\n"
        "beta = 0.001\n"
        "gamma = 0.56\n"
        "s_k = 1\n";
    AlphaParams p = parse_params(text, "mem");
    EXPECT_EQ(p, default_params());
}

TEST(ParamsFile, StrictParsingRejectsStrays) {
    const char* good =
        "time_per_flop_c = 1e-11\n[regime k=1]\nbeta = 0.5\ngamma = 0.5\ns_k = 1\n"
        "[regime k=2]\nbeta = 0.5\ngamma = 0.5\ns_k = 2\n";
    EXPECT_NO_THROW(parse_params(good, "mem"));

    EXPECT_THROW(parse_params("time_per_flop_c = 1e-11\nfoo = 1\n", "mem"), DataError);
    EXPECT_THROW(parse_params("time_per_flop_c = 1e-11\n[device gpu]\n", "mem"),
                 DataError);
    EXPECT_THROW(
        parse_params("time_per_flop_c = 1e-11\n[regime k=1]\nbeta = 0.5\nfoo = 2\n",
                     "mem"),
        DataError);
    // missing keys
    EXPECT_THROW(
        parse_params("time_per_flop_c = 1e-11\n[regime k=1]\nbeta = 0.5\ngamma = 1\n"
                     "[regime k=2]\nbeta = 0.5\ngamma = 1\ns_k = 1\n",
                     "mem"),
        DataError);
    EXPECT_THROW(parse_params("[regime k=1]\nbeta = 0.5\ngamma = 1\ns_k = 1\n"
                              "[regime k=2]\nbeta = 0.5\ngamma = 1\ns_k = 1\n",
                              "mem"),
                 DataError);
    // duplicate and malformed entries
    EXPECT_THROW(
        parse_params("time_per_flop_c = 1e-11\ntime_per_flop_c = 2e-11\n", "mem"),
        DataError);
    EXPECT_THROW(parse_params("time_per_flop_c = fast\n", "mem"), DataError);
    // out-of-range values are data errors here, not invariant aborts
    EXPECT_THROW(
        parse_params("time_per_flop_c = 1e-11\n[regime k=1]\nbeta = 0\ngamma = 1\n"
                     "s_k = 1\n[regime k=2]\nbeta = 0.5\ngamma = 1\ns_k = 1\n",
                     "mem"),
        DataError);
}

TEST(ParamsFile, SaveLoadRoundTrip) {
    std::string path = testing::TempDir() + "alphaflops_params_roundtrip.txt";
    AlphaParams p = default_params();
    p.regimes[2].s_k = 3.5;
    save_params(p, path);
    EXPECT_EQ(load_params(path), p);
    EXPECT_THROW(load_params(path + ".missing"), DataError);
}
