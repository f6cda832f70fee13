#include "alphaflops/report.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "alphaflops/fit.hpp"

using namespace alphaflops;

namespace {

ReportRow stub_row(std::uint64_t flops) {
    ReportRow row;
    row.layer = DenseDescriptor{1, 1, true};
    row.flops = flops;
    return row;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST(ReportRowOp, FieldsAreMutuallyConsistent) {
    AlphaParams params = default_params();
    Conv2dDescriptor layer{14, 14, 8, 8, 3, 3, 1, Padding::Same, 2};
    ReportRow row = report_row(layer, params);
    EXPECT_EQ(row.flops, layer_flops(LayerDescriptor(layer)));
    EXPECT_EQ(row.alpha, alpha_factor(alpha_input_of(layer), params));
    EXPECT_EQ(row.alpha_flops, static_cast<double>(row.flops) * row.alpha);
    ASSERT_TRUE(row.predicted_ms.has_value());
    EXPECT_EQ(*row.predicted_ms, predicted_time(layer, params) * 1e3);
    EXPECT_FALSE(row.measured_ms.has_value());
    EXPECT_FALSE(row.ape.has_value());
}

TEST(BuildReport, RecordsGainMeasuredColumnsAndApe) {
    AlphaParams params = default_params();
    std::vector<LayerDescriptor> layouts{
        Conv2dDescriptor{10, 10, 16, 16, 1, 1, 1, Padding::Same, 1},
        Conv2dDescriptor{12, 12, 8, 8, 3, 3, 1, Padding::Same, 1}};
    auto records = synthesize_dataset(params, layouts, 0.0, 5);
    auto rows = build_report(records, params);
    ASSERT_EQ(rows.size(), 2u);
    for (const ReportRow& row : rows) {
        ASSERT_TRUE(row.measured_ms.has_value());
        ASSERT_TRUE(row.ape.has_value());
        EXPECT_EQ(*row.ape, 0.0);
    }

    auto bare = build_report(layouts, params);
    ASSERT_EQ(bare.size(), 2u);
    EXPECT_FALSE(bare[0].measured_ms.has_value());
}

TEST(BuildReport, ApeMatchesHandComputation) {
    AlphaParams params = default_params();
    DenseDescriptor layer{100, 100, true};
    double predicted = *report_row(layer, params).predicted_ms;
    std::vector<TimingRecord> records{
        {layer, "cpu", predicted * 2.0, 1, std::nullopt}};
    auto rows = build_report(records, params);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_NEAR(*rows[0].ape, 50.0, 1e-9);
}

TEST(ReportTsv, ByteStableLayout) {
    AlphaParams params;
    params.regimes[1] = {1.0, 1.0, 1.0};
    params.regimes[2] = {1.0, 1.0, 1.0};
    params.time_per_flop_c = 9.5367431640625e-07;  // 2^-20

    DenseDescriptor layer{1, 1, false};
    double predicted = *report_row(layer, params).predicted_ms;
    std::vector<TimingRecord> records{{layer, "cpu", predicted, 1, std::nullopt}};
    std::string tsv = format_report_tsv(build_report(records, params));

    std::string p = detail::format_double(predicted);
    std::string expected =
        "layer\tflops\talpha\talpha_flops\tpredicted_ms\tmeasured_ms\tape_pct\n"
        "dense din=1 dout=1 bias=false\t2\t1\t2\t" + p + "\t" + p + "\t0\n"
        "# records = 1\n"
        "# mape_pct = 0\n"
        "# max_ape_pct = 0\n";
    EXPECT_EQ(tsv, expected);
    EXPECT_EQ(format_report_tsv(build_report(records, params)), tsv);
}

TEST(ReportTsv, FooterSkipsErrorStatsWithoutMeasurements) {
    AlphaParams params = default_params();
    std::vector<LayerDescriptor> layouts{DenseDescriptor{4, 4, true}};
    std::string tsv = format_report_tsv(build_report(layouts, params));
    EXPECT_NE(tsv.find("# records = 1\n"), std::string::npos);
    EXPECT_EQ(tsv.find("# mape_pct"), std::string::npos);
    EXPECT_EQ(tsv.find("# max_ape_pct"), std::string::npos);
}

TEST(GroupRows, SplitsOnTenPercentFlopsJump) {
    std::vector<ReportRow> rows{stub_row(100), stub_row(101), stub_row(99),
                                stub_row(200)};
    auto groups = group_report_rows(rows);
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(groups[1], (std::vector<std::size_t>{3}));

    EXPECT_TRUE(group_report_rows({}).empty());
    auto one = group_report_rows({stub_row(42)});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].size(), 1u);
}

TEST(SweepSvg, EmbedsDataTableAndBothLineStyles) {
    AlphaParams params = default_params();
    std::vector<LayerDescriptor> layouts{
        Conv2dDescriptor{10, 10, 16, 16, 1, 1, 1, Padding::Same, 1},
        Conv2dDescriptor{12, 12, 8, 8, 3, 3, 1, Padding::Same, 1},
        Conv2dDescriptor{14, 14, 6, 6, 3, 3, 1, Padding::Same, 1}};
    auto records = synthesize_dataset(params, layouts, 0.1, 5);
    auto rows = build_report(records, params);
    std::vector<std::size_t> group{0, 1, 2};
    std::string svg = render_sweep_svg(rows, group);

    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("<!-- data"), std::string::npos);
    EXPECT_NE(svg.find(format_layer(rows[1].layer)), std::string::npos);
    EXPECT_NE(svg.find("stroke=\"#1030a0\""), std::string::npos);
    EXPECT_NE(svg.find("stroke=\"#c03020\" stroke-dasharray=\"6 3\""),
              std::string::npos);
    EXPECT_NE(svg.find("</svg>\n"), std::string::npos);
    EXPECT_EQ(render_sweep_svg(rows, group), svg);
}

TEST(WritePlots, OneFilePerGroup) {
    std::vector<ReportRow> rows{stub_row(100), stub_row(102), stub_row(5000)};
    for (ReportRow& row : rows) {
        row.measured_ms = 1.0 + static_cast<double>(row.flops) * 1e-3;
        row.predicted_ms = 1.1;
    }
    std::string prefix = testing::TempDir() + "alphaflops_plot";
    auto paths = write_plots(rows, prefix);
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_EQ(paths[0], prefix + "-1.svg");
    EXPECT_EQ(paths[1], prefix + "-2.svg");
    for (const std::string& path : paths) {
        std::string content = slurp(path);
        EXPECT_EQ(content.rfind("<svg", 0), 0u) << path;
        EXPECT_NE(content.find("</svg>"), std::string::npos) << path;
    }
}
