#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "alphaflops/dataset.hpp"
#include "alphaflops/error.hpp"
#include "alphaflops/kernels.hpp"
#include "alphaflops/layer.hpp"

namespace alphaflops {

inline constexpr const char* kBenchDevice = "cpu-singlethread";
inline constexpr const char* kMemcapEnvVar = "ALPHAFLOPS_BENCH_MEMCAP_MB";

enum class KernelVariant { NaiveDirect, Im2colGemm };

struct BenchConfig {
    std::uint64_t warmup_runs = 3;
    std::uint64_t timed_runs = 30;
    std::uint64_t seed = 1;
    KernelVariant kernel_variant = KernelVariant::NaiveDirect;
    // Counting-mode size guard: instrumented runs stay under a second.
    std::uint64_t count_guard_flops = 3'000'000'000ULL;
    std::optional<std::uint64_t> memcap_mb;  // unset: environment, then 2048
};

inline void validate(const BenchConfig& c) {
    if (c.timed_runs < 1)
        throw std::invalid_argument("bench: timed_runs must be >= 1");
}

struct BenchResult {
    LayerDescriptor layer;
    OpCount op_count;
    double median_ms = 0.0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double output_checksum = 0.0;
};

namespace detail {

inline std::uint64_t memcap_bytes(const BenchConfig& cfg) {
    std::uint64_t mb = 2048;
    if (cfg.memcap_mb) {
        mb = *cfg.memcap_mb;
    } else if (const char* env = std::getenv(kMemcapEnvVar)) {
        std::string value(env);
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), mb);
        if (ec != std::errc() || ptr != value.data() + value.size() || mb < 1)
            throw DataError(std::string(kMemcapEnvVar) +
                            ": expected positive integer megabytes, got \"" + value +
                            "\"");
    }
    return mul_checked(mb, 1024 * 1024);
}

inline std::uint64_t buffer_bytes(const LayerDescriptor& layer, KernelVariant variant) {
    constexpr std::uint64_t f = sizeof(float);
    if (std::holds_alternative<DenseDescriptor>(layer)) {
        const auto& d = std::get<DenseDescriptor>(layer);
        std::uint64_t total = mul_checked(mul_checked(d.d_in, d.d_out), f);
        total = add_checked(total, mul_checked(add_checked(d.d_in, 2 * d.d_out), f));
        return total;
    }
    const auto& c = std::get<Conv2dDescriptor>(layer);
    ConvGeometry g = conv_geometry(c);
    std::uint64_t input = mul_checked(mul_checked(c.batch, mul_checked(c.h_in, c.w_in)),
                                      mul_checked(c.c_in, f));
    std::uint64_t padded = mul_checked(mul_checked(c.batch, mul_checked(g.h_pad, g.w_pad)),
                                       mul_checked(c.c_in, f));
    std::uint64_t weights = mul_checked(mul_checked(c.k1, c.k2),
                                        mul_checked(c.c_in, mul_checked(c.c_out, f)));
    std::uint64_t out = mul_checked(mul_checked(c.batch, mul_checked(g.h_out, g.w_out)),
                                    mul_checked(c.c_out, f));
    std::uint64_t total = add_checked(add_checked(input, padded), add_checked(weights, out));
    if (variant == KernelVariant::Im2colGemm)
        total = add_checked(total, mul_checked(im2col_patch_elems(c), f));
    return total;
}

inline void check_memcap(const LayerDescriptor& layer, const BenchConfig& cfg) {
    std::uint64_t cap = memcap_bytes(cfg);
    std::uint64_t need = 0;
    try {
        need = buffer_bytes(layer, cfg.kernel_variant);
    } catch (const std::overflow_error&) {
        throw DataError("layer exceeds memory cap (" + format_layer(layer) + ")");
    }
    if (need > cap)
        throw DataError("layer needs " + std::to_string(need / (1024 * 1024)) +
                        " MiB, over the " + std::to_string(cap / (1024 * 1024)) +
                        " MiB cap (" + format_layer(layer) + ")");
}

struct BenchBuffers {
    std::vector<float> weights;
    std::vector<float> bias;
    std::vector<float> input;    // dense x, or pre-padded conv input
    std::vector<float> patches;  // im2col scratch
    std::vector<float> out;
};

inline BenchBuffers make_buffers(const LayerDescriptor& layer, const BenchConfig& cfg) {
    BenchBuffers buf;
    if (std::holds_alternative<DenseDescriptor>(layer)) {
        const auto& d = std::get<DenseDescriptor>(layer);
        buf.weights.resize(d.d_in * d.d_out);
        buf.bias.resize(d.d_out);
        buf.input.resize(d.d_in);
        buf.out.resize(d.d_out);
        fill_random(buf.input, cfg.seed);
        fill_random(buf.weights, cfg.seed + 1);
        fill_random(buf.bias, cfg.seed + 2);
        return buf;
    }
    const auto& c = std::get<Conv2dDescriptor>(layer);
    ConvGeometry g = conv_geometry(c);
    std::vector<float> raw(c.batch * c.h_in * c.w_in * c.c_in);
    fill_random(raw, cfg.seed);
    buf.input = pad_input(c, raw);
    buf.weights.resize(c.k1 * c.k2 * c.c_in * c.c_out);
    fill_random(buf.weights, cfg.seed + 1);
    buf.out.resize(c.batch * g.h_out * g.w_out * c.c_out);
    if (cfg.kernel_variant == KernelVariant::Im2colGemm)
        buf.patches.resize(im2col_patch_elems(c));
    return buf;
}

template <class Tally>
void run_kernel(const LayerDescriptor& layer, const BenchConfig& cfg,
                BenchBuffers& buf, Tally& tally) {
    if (std::holds_alternative<DenseDescriptor>(layer)) {
        const auto& d = std::get<DenseDescriptor>(layer);
        dense_forward(d, buf.weights, buf.bias, buf.input,
                      std::span<float>(buf.out), tally);
        return;
    }
    const auto& c = std::get<Conv2dDescriptor>(layer);
    if (cfg.kernel_variant == KernelVariant::Im2colGemm)
        conv2d_im2col(c, buf.input, buf.weights, std::span<float>(buf.patches),
                      std::span<float>(buf.out), tally);
    else
        conv2d_naive(c, buf.input, buf.weights, std::span<float>(buf.out), tally);
}

}  // namespace detail

/// Runs the instrumented kernel once and reports the op tally.
inline OpCount count_ops(const LayerDescriptor& layer, KernelVariant variant,
                         std::uint64_t guard_flops = 3'000'000'000ULL) {
    validate(layer);
    std::uint64_t expected = layer_flops_exact(layer);
    if (expected > guard_flops)
        throw DataError("counting guard: layer needs " + std::to_string(expected) +
                        " ops, over the " + std::to_string(guard_flops) + " limit");
    BenchConfig cfg;
    cfg.kernel_variant = variant;
    detail::check_memcap(layer, cfg);
    detail::BenchBuffers buf = detail::make_buffers(layer, cfg);
    OpTally tally;
    detail::run_kernel(layer, cfg, buf, tally);
    return tally.snapshot();
}

/// Times the layer single-threaded: one counting pass (checked against the
/// formula count), then warmup and timed runs with counting compiled out.
/// Output checksums are accumulated so the work cannot be elided.
inline BenchResult time_layer(const LayerDescriptor& layer, const BenchConfig& cfg) {
    validate(layer);
    validate(cfg);
    detail::check_memcap(layer, cfg);
    detail::BenchBuffers buf = detail::make_buffers(layer, cfg);

    BenchResult res;
    res.layer = layer;

    OpTally tally;
    detail::run_kernel(layer, cfg, buf, tally);
    res.op_count = tally.snapshot();
    if (res.op_count.total() != layer_flops_exact(layer))
        throw std::logic_error("bench: op tally disagrees with the formula count for " +
                               format_layer(layer));

    NoTally no_tally;
    for (std::uint64_t i = 0; i < cfg.warmup_runs; ++i) {
        detail::run_kernel(layer, cfg, buf, no_tally);
        res.output_checksum += checksum(buf.out);
    }

    std::vector<double> times_ms;
    times_ms.reserve(cfg.timed_runs);
    for (std::uint64_t i = 0; i < cfg.timed_runs; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        detail::run_kernel(layer, cfg, buf, no_tally);
        auto t1 = std::chrono::steady_clock::now();
        times_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        res.output_checksum += checksum(buf.out);
    }

    std::vector<double> sorted = times_ms;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double mean = 0.0;
    for (double t : times_ms) mean += t;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double t : times_ms) var += (t - mean) * (t - mean);
    var /= static_cast<double>(n);

    // clock-resolution floor keeps the time_ms > 0 invariant for tiny layers
    res.median_ms = std::max(median, 1e-6);
    res.mean_ms = std::max(mean, 1e-6);
    res.std_ms = std::sqrt(var);
    return res;
}

struct SkippedLayer {
    LayerDescriptor layer;
    std::string reason;
};

struct SweepBenchSummary {
    std::vector<TimingRecord> records;
    std::vector<SkippedLayer> skipped;
};

/// Benches each layer and writes the timing CSV (header-only if everything
/// was skipped). Layers over the memory cap are skipped and reported, not
/// fatal.
inline SweepBenchSummary run_sweep_bench(const std::vector<LayerDescriptor>& sweep,
                                         const BenchConfig& cfg,
                                         const std::string& out_path) {
    SweepBenchSummary summary;
    for (const LayerDescriptor& layer : sweep) {
        try {
            BenchResult bench = time_layer(layer, cfg);
            TimingRecord rec;
            rec.layer = layer;
            rec.device = kBenchDevice;
            rec.time_ms = bench.median_ms;
            rec.runs = cfg.timed_runs;
            rec.time_std_ms = bench.std_ms;
            summary.records.push_back(rec);
        } catch (const DataError& e) {
            summary.skipped.push_back({layer, e.what()});
        }
    }
    save_dataset(summary.records, out_path);
    return summary;
}

}  // namespace alphaflops
