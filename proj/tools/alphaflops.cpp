// Command-line front end: FLOPs and alpha-FLOPs queries, equal-FLOPs sweep
// generation, CPU benchmarking, parameter fitting, and prediction reports.
//
// Exit codes: 0 success, 1 usage or parse error, 2 data error, 3 partial
// success (some sweep points or bench layers dropped).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "alphaflops/alpha.hpp"
#include "alphaflops/bench.hpp"
#include "alphaflops/dataset.hpp"
#include "alphaflops/error.hpp"
#include "alphaflops/fit.hpp"
#include "alphaflops/layer.hpp"
#include "alphaflops/report.hpp"
#include "alphaflops/sweep.hpp"

namespace af = alphaflops;

namespace {

std::string join_args(const std::vector<std::string>& args) {
    std::string text;
    for (const std::string& a : args) {
        if (!text.empty()) text += ' ';
        text += a;
    }
    return text;
}

std::vector<af::LayerDescriptor> load_layers_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw af::DataError("cannot open layers file: " + path);
    std::vector<af::LayerDescriptor> layers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view v = af::detail::trim(line);
        if (v.empty() || v.front() == '#') continue;
        try {
            layers.push_back(af::parse_layer(v));
        } catch (const af::ParseError& e) {
            throw af::DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return layers;
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw af::DataError("cannot write file: " + path);
    out << text;
    if (!out) throw af::DataError("write failed: " + path);
}

struct GlobalFlags {
    std::string params_path;
    std::uint64_t seed = 1;
    std::string plot_prefix;
    std::vector<std::string> fix;
    bool trim = false;
};

af::AlphaParams params_or_default(const GlobalFlags& g) {
    if (g.params_path.empty()) return af::default_params();
    return af::load_params(g.params_path);
}

af::FixedParams parse_fixed(const std::vector<std::string>& fix) {
    af::FixedParams fixed;
    for (const std::string& f : fix) {
        std::size_t eq = f.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--fix expects key=value, got \"" + f + "\"");
        std::string key = f.substr(0, eq);
        std::string value = f.substr(eq + 1);
        double v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size())
            throw std::invalid_argument("--fix " + key + ": expected a number, got \"" +
                                        value + "\"");
        if (key == "beta")
            fixed.beta = v;
        else if (key == "gamma")
            fixed.gamma = v;
        else if (key == "s_k")
            fixed.s_k = v;
        else if (key == "c" || key == "time_per_flop_c")
            fixed.c = v;
        else
            throw std::invalid_argument("--fix: unknown key \"" + key +
                                        "\" (expected beta, gamma, s_k, or c)");
    }
    return fixed;
}

// Sweep construction flags shared by `sweep` and `bench`.
struct SweepFlags {
    std::uint64_t target = 0;
    std::string vary = "k";
    std::string compensate = "cin_cout";
    std::uint64_t from = 1, to = 1;
    std::vector<std::uint64_t> values;
    std::uint64_t w = 1, h = 1, cin = 1, cout = 1, k1 = 1, k2 = 1, stride = 1, batch = 1;
    std::string pad = "same";
};

void add_sweep_flags(CLI::App* sub, SweepFlags& f) {
    sub->set_help_flag("--help", "print help");  // frees -h for --h below
    sub->add_option("--target", f.target, "target FLOPs for every point")->required();
    sub->add_option("--vary", f.vary, "varied axis: k, w_h, cin, cout, batch");
    sub->add_option("--compensate", f.compensate,
                    "compensating axis: cin_cout, w_h, none");
    sub->add_option("--from", f.from, "first axis value (inclusive)");
    sub->add_option("--to", f.to, "last axis value (inclusive)");
    sub->add_option("--values", f.values, "explicit axis values")->delimiter(',');
    sub->add_option("--w", f.w, "fixed input width");
    sub->add_option("--h", f.h, "fixed input height");
    sub->add_option("--cin", f.cin, "fixed input channels");
    sub->add_option("--cout", f.cout, "fixed output channels");
    sub->add_option("--k1", f.k1, "fixed kernel width");
    sub->add_option("--k2", f.k2, "fixed kernel height");
    sub->add_option("--stride", f.stride, "stride");
    sub->add_option("--pad", f.pad, "padding: same or valid");
    sub->add_option("--batch", f.batch, "batch size");
}

af::SweepSpec sweep_spec_of(const SweepFlags& f) {
    af::SweepSpec spec;
    spec.target_flops = f.target;

    if (f.vary == "k")
        spec.varied_axis = af::SweepAxis::K;
    else if (f.vary == "w_h")
        spec.varied_axis = af::SweepAxis::W_H;
    else if (f.vary == "cin")
        spec.varied_axis = af::SweepAxis::C_in;
    else if (f.vary == "cout")
        spec.varied_axis = af::SweepAxis::C_out;
    else if (f.vary == "batch")
        spec.varied_axis = af::SweepAxis::Batch;
    else
        throw std::invalid_argument("--vary: unknown axis \"" + f.vary + "\"");

    if (f.compensate == "cin_cout")
        spec.compensating_axis = af::CompensatingAxis::C_in_C_out;
    else if (f.compensate == "w_h")
        spec.compensating_axis = af::CompensatingAxis::W_H;
    else if (f.compensate == "none")
        spec.compensating_axis = af::CompensatingAxis::None;
    else
        throw std::invalid_argument("--compensate: unknown axis \"" + f.compensate +
                                    "\"");

    spec.range_lo = f.from;
    spec.range_hi = f.to;
    spec.axis_values = f.values;
    spec.base.w_in = f.w;
    spec.base.h_in = f.h;
    spec.base.c_in = f.cin;
    spec.base.c_out = f.cout;
    spec.base.k1 = f.k1;
    spec.base.k2 = f.k2;
    spec.base.stride = f.stride;
    spec.base.batch = f.batch;
    if (f.pad == "same")
        spec.base.padding = af::Padding::Same;
    else if (f.pad == "valid")
        spec.base.padding = af::Padding::Valid;
    else
        throw std::invalid_argument("--pad: expected same or valid, got \"" + f.pad +
                                    "\"");
    return spec;
}

int report_dropped(const af::SweepResult& result) {
    for (const af::DroppedPoint& d : result.dropped)
        std::cerr << "warning: axis value " << d.axis_value << ": " << d.reason << "\n";
    return result.dropped.empty() ? 0 : 3;
}

std::string describe_layer(const af::LayerDescriptor& layer, bool with_alpha,
                           const af::AlphaParams& params) {
    std::string out = "layer         " + af::format_layer(layer) + "\n";
    out += "flops         " + std::to_string(af::layer_flops(layer)) + "\n";
    out += "flops_exact   " + std::to_string(af::layer_flops_exact(layer)) + "\n";
    if (with_alpha) {
        double alpha = af::alpha_factor(af::alpha_input_of(layer), params);
        out += "alpha         " + af::detail::format_double(alpha) + "\n";
        out += "alpha_flops   " +
               af::detail::format_double(af::alpha_flops(layer, params)) + "\n";
        out += "predicted_ms  " +
               af::detail::format_double(af::predicted_time(layer, params) * 1e3) +
               "\n";
    }
    return out;
}

std::string fit_summary(const af::FitResult& res) {
    std::string out;
    out += "n_records     " + std::to_string(res.n_records) + "\n";
    out += "mape_pct      " + af::detail::format_double(res.mape) + "\n";
    out += "max_ape_pct   " + af::detail::format_double(res.max_ape) + "\n";
    out += std::string("converged     ") + (res.converged ? "true" : "false") + "\n";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FLOPs and alpha-FLOPs cost estimation toolkit"};
    app.require_subcommand(1);

    GlobalFlags global;
    app.add_option("--params", global.params_path, "alpha parameter file");
    app.add_option("--seed", global.seed, "seed for data generation");
    app.add_option("--plot", global.plot_prefix, "write SVG charts with this prefix");
    app.add_option("--fix", global.fix, "pin a fit parameter, key=value (repeatable)");
    app.add_flag("--trim", global.trim, "drop the top APE percentile and refit");

    // flops LAYER...
    auto* sub_flops = app.add_subcommand("flops", "count FLOPs of one layer");
    std::vector<std::string> flops_args;
    sub_flops->add_option("layer", flops_args, "layer text, e.g. dense din=8 dout=8")
        ->required()
        ->expected(-1);
    sub_flops->fallthrough();

    // alpha LAYER...
    auto* sub_alpha = app.add_subcommand("alpha", "alpha-FLOPs and predicted time");
    std::vector<std::string> alpha_args;
    sub_alpha->add_option("layer", alpha_args, "layer text")->required()->expected(-1);
    sub_alpha->fallthrough();

    // sweep
    auto* sub_sweep = app.add_subcommand("sweep", "generate an equal-FLOPs sweep");
    SweepFlags sweep_flags;
    add_sweep_flags(sub_sweep, sweep_flags);
    std::string sweep_out;
    sub_sweep->add_option("-o,--out", sweep_out, "write layer lines here");
    sub_sweep->fallthrough();

    // bench
    auto* sub_bench = app.add_subcommand("bench", "time layers on this CPU");
    SweepFlags bench_sweep_flags;
    std::string bench_layers_path, bench_out, bench_variant = "naive";
    std::uint64_t bench_runs = 30, bench_warmup = 3;
    std::optional<std::uint64_t> bench_memcap;
    sub_bench->add_option("--layers", bench_layers_path,
                          "layers file (one descriptor per line)");
    add_sweep_flags(sub_bench, bench_sweep_flags);
    sub_bench->get_option("--target")->required(false);
    sub_bench->add_option("-o,--out", bench_out, "timing CSV output")->required();
    sub_bench->add_option("--runs", bench_runs, "timed runs per layer");
    sub_bench->add_option("--warmup", bench_warmup, "warmup runs per layer");
    sub_bench->add_option("--variant", bench_variant, "kernel: naive or im2col");
    sub_bench->add_option("--memcap-mb", bench_memcap, "memory cap in MiB");
    sub_bench->fallthrough();

    // fit
    auto* sub_fit = app.add_subcommand("fit", "fit alpha parameters to timings");
    std::string fit_dataset, fit_out, fit_map;
    sub_fit->add_option("dataset", fit_dataset, "timing CSV")->required();
    sub_fit->add_option("-o,--out", fit_out, "write fitted params here");
    sub_fit->add_option("--map", fit_map, "column mapping for foreign CSV layouts");
    sub_fit->fallthrough();

    // predict
    auto* sub_predict = app.add_subcommand("predict", "predicted vs measured report");
    std::string predict_dataset, predict_out, predict_map;
    sub_predict->add_option("dataset", predict_dataset, "timing CSV")->required();
    sub_predict->add_option("-o,--out", predict_out, "write TSV report here");
    sub_predict->add_option("--map", predict_map,
                            "column mapping for foreign CSV layouts");
    sub_predict->fallthrough();

    // report
    auto* sub_report = app.add_subcommand("report", "cost report for a layers file");
    std::string report_layers, report_out;
    sub_report->add_option("layers", report_layers, "layers file")->required();
    sub_report->add_option("-o,--out", report_out, "write TSV report here");
    sub_report->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*sub_flops) {
            af::LayerDescriptor layer = af::parse_layer(join_args(flops_args));
            std::cout << describe_layer(layer, false, {});
            return 0;
        }

        if (*sub_alpha) {
            af::LayerDescriptor layer = af::parse_layer(join_args(alpha_args));
            std::cout << describe_layer(layer, true, params_or_default(global));
            return 0;
        }

        if (*sub_sweep) {
            af::SweepResult result = af::generate_sweep(sweep_spec_of(sweep_flags));
            std::string text;
            for (const af::Conv2dDescriptor& c : result.layers)
                text += af::format_layer(c) + "\n";
            if (sweep_out.empty())
                std::cout << text;
            else
                write_text(text, sweep_out);
            return report_dropped(result);
        }

        if (*sub_bench) {
            std::vector<af::LayerDescriptor> layers;
            if (!bench_layers_path.empty()) {
                layers = load_layers_file(bench_layers_path);
            } else {
                if (bench_sweep_flags.target == 0)
                    throw std::invalid_argument(
                        "bench needs --layers or a sweep spec (--target ...)");
                af::SweepResult result =
                    af::generate_sweep(sweep_spec_of(bench_sweep_flags));
                report_dropped(result);
                for (const af::Conv2dDescriptor& c : result.layers) layers.push_back(c);
            }
            af::BenchConfig cfg;
            cfg.warmup_runs = bench_warmup;
            cfg.timed_runs = bench_runs;
            cfg.seed = global.seed;
            cfg.memcap_mb = bench_memcap;
            if (bench_variant == "naive")
                cfg.kernel_variant = af::KernelVariant::NaiveDirect;
            else if (bench_variant == "im2col")
                cfg.kernel_variant = af::KernelVariant::Im2colGemm;
            else
                throw std::invalid_argument("--variant: expected naive or im2col");

            af::SweepBenchSummary summary = af::run_sweep_bench(layers, cfg, bench_out);
            for (const af::SkippedLayer& s : summary.skipped)
                std::cerr << "warning: skipped " << af::format_layer(s.layer) << ": "
                          << s.reason << "\n";
            std::cerr << "benched " << summary.records.size() << " of " << layers.size()
                      << " layers -> " << bench_out << "\n";
            return summary.skipped.empty() ? 0 : 3;
        }

        if (*sub_fit) {
            std::vector<af::TimingRecord> records =
                fit_map.empty() ? af::load_dataset(fit_dataset)
                                : af::load_dataset_mapped(fit_dataset, fit_map);
            af::FitConfig cfg;
            cfg.trim = global.trim;
            af::FitResult res = af::fit(records, parse_fixed(global.fix), cfg);
            if (fit_out.empty()) {
                std::cout << af::format_params(res.params);
                std::cerr << fit_summary(res);
            } else {
                af::save_params(res.params, fit_out);
                std::cout << fit_summary(res);
            }
            return 0;
        }

        if (*sub_predict) {
            std::vector<af::TimingRecord> records =
                predict_map.empty() ? af::load_dataset(predict_dataset)
                                    : af::load_dataset_mapped(predict_dataset, predict_map);
            if (records.empty())
                throw af::DataError(predict_dataset + ": no records to predict");
            for (const af::TimingRecord& r : records)
                if (r.device != records.front().device)
                    throw af::DataError(
                        "dataset mixes device labels; run predict per device");
            if (global.params_path.empty())
                throw std::invalid_argument("predict requires --params");
            af::AlphaParams params = af::load_params(global.params_path);
            std::vector<af::ReportRow> rows = af::build_report(records, params);
            std::string tsv = af::format_report_tsv(rows);
            if (predict_out.empty())
                std::cout << tsv;
            else
                write_text(tsv, predict_out);
            if (!global.plot_prefix.empty()) af::write_plots(rows, global.plot_prefix);
            return 0;
        }

        if (*sub_report) {
            std::vector<af::LayerDescriptor> layers = load_layers_file(report_layers);
            std::vector<af::ReportRow> rows =
                af::build_report(layers, params_or_default(global));
            std::string tsv = af::format_report_tsv(rows);
            if (report_out.empty())
                std::cout << tsv;
            else
                write_text(tsv, report_out);
            if (!global.plot_prefix.empty()) af::write_plots(rows, global.plot_prefix);
            return 0;
        }
    } catch (const af::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const af::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
