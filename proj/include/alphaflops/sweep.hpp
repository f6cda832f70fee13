#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alphaflops/error.hpp"
#include "alphaflops/layer.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Equal-FLOPs sweep construction: one axis varies, a compensating axis is
// chosen per point as the integers bringing conv_flops closest to the target.
// ---------------------------------------------------------------------------

enum class SweepAxis { K, W_H, C_in, C_out, Batch };
enum class CompensatingAxis { C_in_C_out, W_H, None };

struct SweepSpec {
    std::uint64_t target_flops = 0;
    SweepAxis varied_axis = SweepAxis::K;
    CompensatingAxis compensating_axis = CompensatingAxis::C_in_C_out;
    std::uint64_t range_lo = 1;  // inclusive; ignored when axis_values is set
    std::uint64_t range_hi = 1;
    std::vector<std::uint64_t> axis_values;  // explicit axis points (optional)
    Conv2dDescriptor base;                   // fixed dims for everything else
    // Hand-crafted rows by point index (e.g. non-square spatial cases that the
    // axis rule cannot express); still subject to the tolerance check.
    std::map<std::size_t, Conv2dDescriptor> overrides;
    double tolerance = 0.05;
};

struct DroppedPoint {
    std::uint64_t axis_value = 0;
    std::string reason;
};

struct SweepResult {
    std::vector<Conv2dDescriptor> layers;
    std::vector<DroppedPoint> dropped;
};

inline void validate(const SweepSpec& s) {
    if (s.target_flops < 1)
        throw std::invalid_argument("sweep: target_flops must be >= 1");
    if (!(s.tolerance > 0.0 && s.tolerance < 1.0))
        throw std::invalid_argument("sweep: tolerance must be in (0, 1)");
    if (s.compensating_axis == CompensatingAxis::None)
        throw std::invalid_argument(
            "sweep: FLOPs cannot stay constant without a compensating axis");
    if (s.varied_axis == SweepAxis::W_H &&
        s.compensating_axis == CompensatingAxis::W_H)
        throw std::invalid_argument("sweep: varied and compensating axes overlap");
    if ((s.varied_axis == SweepAxis::C_in || s.varied_axis == SweepAxis::C_out) &&
        s.compensating_axis == CompensatingAxis::C_in_C_out)
        throw std::invalid_argument("sweep: varied and compensating axes overlap");
    if (s.axis_values.empty() && s.range_lo > s.range_hi)
        throw std::invalid_argument("sweep: empty axis range");
    for (std::uint64_t v : s.axis_values)
        if (v < 1) throw std::invalid_argument("sweep: axis values must be >= 1");
    if (s.axis_values.empty() && s.range_lo < 1)
        throw std::invalid_argument("sweep: axis values must be >= 1");
}

namespace detail {

inline std::uint64_t flops_or_zero(const Conv2dDescriptor& c) {
    try {
        return conv_flops(c);
    } catch (const std::exception&) {
        return 0;  // invalid or overflowing candidates never win
    }
}

// cin/cout chosen so per_unit*cin*cout lands nearest the target, split as
// equally as possible.
inline bool compensate_channels(Conv2dDescriptor& c, std::uint64_t target) {
    Conv2dDescriptor unit = c;
    unit.c_in = 1;
    unit.c_out = 1;
    std::uint64_t per_unit = flops_or_zero(unit);
    if (per_unit == 0) return false;
    double product = static_cast<double>(target) / static_cast<double>(per_unit);
    if (product < 1.0) product = 1.0;

    double root = std::sqrt(product);
    std::uint64_t fs = static_cast<std::uint64_t>(root);
    if (fs < 1) fs = 1;

    bool found = false;
    std::uint64_t best_ci = 1, best_co = 1;
    double best_delta = 0.0;
    std::uint64_t best_gap = 0;
    for (std::uint64_t ci = fs > 1 ? fs - 1 : 1; ci <= fs + 1; ++ci) {
        std::uint64_t co0 =
            static_cast<std::uint64_t>(std::llround(product / static_cast<double>(ci)));
        for (std::uint64_t co = co0 > 1 ? co0 - 1 : 1; co <= co0 + 1; ++co) {
            std::uint64_t flops;
            try {
                flops = mul_checked(mul_checked(per_unit, ci), co);
            } catch (const std::overflow_error&) {
                continue;
            }
            double delta = std::abs(static_cast<double>(flops) -
                                    static_cast<double>(target));
            std::uint64_t gap = ci > co ? ci - co : co - ci;
            bool better = !found || delta < best_delta ||
                          (delta == best_delta &&
                           (gap < best_gap ||
                            (gap == best_gap &&
                             (ci < best_ci || (ci == best_ci && co < best_co)))));
            if (better) {
                found = true;
                best_ci = ci;
                best_co = co;
                best_delta = delta;
                best_gap = gap;
            }
        }
    }
    if (!found) return false;
    c.c_in = best_ci;
    c.c_out = best_co;
    return true;
}

// Square spatial extent w=h chosen so conv_flops lands nearest the target.
inline bool compensate_spatial(Conv2dDescriptor& c, std::uint64_t target) {
    // per output pixel: batch * 2 * k1 * k2 * cin * cout
    double per_pixel = 2.0 * static_cast<double>(c.batch) *
                       static_cast<double>(c.k1) * static_cast<double>(c.k2) *
                       static_cast<double>(c.c_in) * static_cast<double>(c.c_out);
    double pixels = static_cast<double>(target) / per_pixel;
    if (pixels < 1.0) pixels = 1.0;
    double extent = std::sqrt(pixels) * static_cast<double>(c.stride);

    std::uint64_t w_min = 1;
    if (c.padding == Padding::Valid) w_min = c.k1 > c.k2 ? c.k1 : c.k2;
    std::uint64_t lo = extent > static_cast<double>(2 * c.stride + 2)
                           ? static_cast<std::uint64_t>(extent) - 2 * c.stride - 2
                           : 1;
    if (lo < w_min) lo = w_min;
    std::uint64_t hi = static_cast<std::uint64_t>(extent) + 2 * c.stride + 2;
    if (hi < lo) hi = lo;

    bool found = false;
    std::uint64_t best_w = lo;
    double best_delta = 0.0;
    for (std::uint64_t w = lo; w <= hi; ++w) {
        Conv2dDescriptor cand = c;
        cand.w_in = w;
        cand.h_in = w;
        std::uint64_t flops = flops_or_zero(cand);
        if (flops == 0) continue;
        double delta =
            std::abs(static_cast<double>(flops) - static_cast<double>(target));
        if (!found || delta < best_delta) {
            found = true;
            best_w = w;
            best_delta = delta;
        }
    }
    if (!found) return false;
    c.w_in = best_w;
    c.h_in = best_w;
    return true;
}

}  // namespace detail

inline SweepResult generate_sweep(const SweepSpec& spec) {
    validate(spec);

    std::vector<std::uint64_t> values = spec.axis_values;
    if (values.empty())
        for (std::uint64_t v = spec.range_lo; v <= spec.range_hi; ++v)
            values.push_back(v);

    SweepResult result;
    std::vector<std::uint64_t> emitted_values;
    const double target = static_cast<double>(spec.target_flops);

    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        std::uint64_t v = values[idx];
        Conv2dDescriptor cand;
        bool compensated = true;

        auto override_it = spec.overrides.find(idx);
        if (override_it != spec.overrides.end()) {
            cand = override_it->second;
        } else {
            cand = spec.base;
            switch (spec.varied_axis) {
                case SweepAxis::K:
                    cand.k1 = v;
                    cand.k2 = v;
                    break;
                case SweepAxis::W_H:
                    cand.w_in = v;
                    cand.h_in = v;
                    break;
                case SweepAxis::C_in: cand.c_in = v; break;
                case SweepAxis::C_out: cand.c_out = v; break;
                case SweepAxis::Batch: cand.batch = v; break;
            }
            if (spec.compensating_axis == CompensatingAxis::C_in_C_out)
                compensated = detail::compensate_channels(cand, spec.target_flops);
            else
                compensated = detail::compensate_spatial(cand, spec.target_flops);
        }

        if (!compensated) {
            result.dropped.push_back({v, "no integer dimensions reach the target"});
            continue;
        }
        std::uint64_t flops = 0;
        try {
            validate(cand);
            flops = conv_flops(cand);
        } catch (const std::exception& e) {
            result.dropped.push_back({v, e.what()});
            continue;
        }
        double deviation = std::abs(static_cast<double>(flops) - target) / target;
        if (deviation > spec.tolerance) {
            result.dropped.push_back(
                {v, "nearest achievable " + std::to_string(flops) + " deviates " +
                        std::to_string(deviation * 100.0) + "% from target"});
            continue;
        }
        result.layers.push_back(cand);
        emitted_values.push_back(v);
    }

    // Per-point tolerance alone allows a max/min spread slightly above 1.10
    // (two-sided 5%); enforce the spread bound by shedding the farthest
    // points, most-deviant first.
    while (result.layers.size() > 1) {
        double min_f = 0.0, max_f = 0.0;
        std::size_t worst = 0;
        double worst_dev = -1.0;
        for (std::size_t i = 0; i < result.layers.size(); ++i) {
            double f = static_cast<double>(conv_flops(result.layers[i]));
            if (i == 0 || f < min_f) min_f = f;
            if (i == 0 || f > max_f) max_f = f;
            double dev = std::abs(f - target);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst = i;
            }
        }
        if (max_f / min_f <= 1.10) break;
        result.dropped.push_back(
            {emitted_values[worst], "dropped to keep the sweep FLOPs spread within 10%"});
        result.layers.erase(result.layers.begin() + worst);
        emitted_values.erase(emitted_values.begin() + worst);
    }

    if (result.layers.empty())
        throw DataError("sweep: target FLOPs unachievable at every point");
    return result;
}

}  // namespace alphaflops
