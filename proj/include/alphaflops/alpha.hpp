#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "alphaflops/error.hpp"
#include "alphaflops/layer.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Correction-factor parameters
//
// alpha_K(S) = ((1 - beta_K) * S_K / S + beta_K) ^ gamma_K
//
// One (beta, gamma, s_k) triple per kernel-size regime; regimes are keyed by
// kernel-size threshold and selected as the largest threshold <= K. The
// calibration constant c converts alpha-FLOPs to seconds.
// ---------------------------------------------------------------------------

struct RegimeParams {
    double beta = 1.0;
    double gamma = 1.0;
    double s_k = 1.0;

    friend bool operator==(const RegimeParams&, const RegimeParams&) = default;
};

struct AlphaParams {
    std::map<std::uint64_t, RegimeParams> regimes;
    double time_per_flop_c = 1.0;

    friend bool operator==(const AlphaParams&, const AlphaParams&) = default;
};

struct AlphaInput {
    double surface = 1.0;       // S = w_out * h_out * batch
    std::uint64_t kernel_k = 1; // max(k1, k2)
};

inline void validate(const RegimeParams& p) {
    if (!(p.beta > 0.0 && p.beta <= 1.0))
        throw std::invalid_argument("regime: beta must be in (0, 1]");
    if (!(p.gamma > 0.0 && p.gamma <= 1.0))
        throw std::invalid_argument("regime: gamma must be in (0, 1]");
    if (!(p.s_k >= 1.0))
        throw std::invalid_argument("regime: s_k must be >= 1");
}

inline void validate(const AlphaParams& p) {
    if (!(p.time_per_flop_c > 0.0))
        throw std::invalid_argument("params: time_per_flop_c must be > 0");
    if (!p.regimes.count(1))
        throw std::invalid_argument("params: missing k=1 regime");
    if (p.regimes.rbegin()->first < 2)
        throw std::invalid_argument("params: missing k>1 regime");
    for (const auto& [threshold, regime] : p.regimes) {
        if (threshold < 1)
            throw std::invalid_argument("params: regime threshold must be >= 1");
        validate(regime);
        if (threshold == 1 && regime.s_k != 1.0)
            throw std::invalid_argument("params: k=1 regime requires s_k == 1");
    }
}

inline void validate(const AlphaInput& in) {
    if (!(in.surface >= 1.0))
        throw std::invalid_argument("alpha input: surface must be >= 1");
    if (in.kernel_k < 1)
        throw std::invalid_argument("alpha input: kernel_k must be >= 1");
}

/// Built-in regime table for a typical discrete accelerator plus a
/// calibration constant matched to it; refit with `fit` for other devices.
inline AlphaParams default_params() {
    AlphaParams p;
    p.regimes[1] = {0.02, 0.99, 1.0};
    p.regimes[2] = {0.001, 0.56, 1.0};
    p.time_per_flop_c = 1.878e-11;
    return p;
}

inline const RegimeParams& regime_for(const AlphaParams& p, std::uint64_t k) {
    auto it = p.regimes.upper_bound(k);
    if (it == p.regimes.begin())
        throw std::invalid_argument("params: no regime covers k=" + std::to_string(k));
    return std::prev(it)->second;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Core correction factor. S below s_k is clamped so alpha never exceeds 1.
inline double alpha_factor(double surface, const RegimeParams& p) {
    validate(p);
    if (!(surface >= 1.0))
        throw std::invalid_argument("alpha input: surface must be >= 1");
    double s = surface < p.s_k ? p.s_k : surface;
    double base = (1.0 - p.beta) * (p.s_k / s) + p.beta;
    return std::pow(base, p.gamma);
}

inline double alpha_factor(const AlphaInput& in, const AlphaParams& p) {
    validate(in);
    validate(p);
    return alpha_factor(in.surface, regime_for(p, in.kernel_k));
}

inline double surface_of(const Conv2dDescriptor& c) {
    auto [w_out, h_out] = output_shape(c);
    return static_cast<double>(w_out) * static_cast<double>(h_out) *
           static_cast<double>(c.batch);
}

inline std::uint64_t kernel_of(const Conv2dDescriptor& c) {
    return c.k1 > c.k2 ? c.k1 : c.k2;
}

inline AlphaInput alpha_input_of(const LayerDescriptor& layer) {
    const Conv2dDescriptor conv = std::holds_alternative<DenseDescriptor>(layer)
                                      ? dense_as_conv(std::get<DenseDescriptor>(layer))
                                      : std::get<Conv2dDescriptor>(layer);
    return {surface_of(conv), kernel_of(conv)};
}

/// conv_flops(layer) * alpha; dense layers are routed through dense_as_conv.
inline double alpha_flops(const LayerDescriptor& layer, const AlphaParams& p) {
    const Conv2dDescriptor conv = std::holds_alternative<DenseDescriptor>(layer)
                                      ? dense_as_conv(std::get<DenseDescriptor>(layer))
                                      : std::get<Conv2dDescriptor>(layer);
    double flops = static_cast<double>(conv_flops(conv));
    return flops * alpha_factor({surface_of(conv), kernel_of(conv)}, p);
}

/// Seconds: time_per_flop_c * alpha_flops.
inline double predicted_time(const LayerDescriptor& layer, const AlphaParams& p) {
    return p.time_per_flop_c * alpha_flops(layer, p);
}

/// Scaled-work ratio (1 - beta) / n + beta; alpha with gamma = 1, s_k = 1
/// reduces to it with n = S.
inline double gustafson_ratio(double beta, double n_scale) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::invalid_argument("gustafson: beta must be in [0, 1]");
    if (!(n_scale >= 1.0))
        throw std::invalid_argument("gustafson: n_scale must be >= 1");
    return (1.0 - beta) / n_scale + beta;
}

// ---------------------------------------------------------------------------
// Parameter file
//
//   time_per_flop_c = 1.878e-11
//
//   [regime k=1]
//   beta = 0.02
//   gamma = 0.99
//   s_k = 1
//
// Strict key=value lines; unknown keys are errors; '#' starts a comment.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline double parse_double_strict(std::string_view value, const std::string& where) {
    double v = 0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw DataError(where + ": expected a number, got \"" + std::string(value) + "\"");
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline AlphaParams parse_params(std::string_view text, const std::string& source) {
    AlphaParams params;
    params.time_per_flop_c = 0;  // must be supplied
    bool have_c = false;

    std::int64_t current_regime = -1;  // -1 = top level
    std::map<std::uint64_t, std::map<std::string, double>> regime_values;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view raw = eol == std::string_view::npos
                                   ? text.substr(pos)
                                   : text.substr(pos, eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string_view line = detail::trim(raw);
        std::string where = source + ":" + std::to_string(line_no);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw DataError(where + ": unterminated section header");
            std::string_view inner = detail::trim(line.substr(1, line.size() - 2));
            if (inner.substr(0, 9) != "regime k=")
                throw DataError(where + ": unknown section \"" + std::string(inner) + "\"");
            std::string_view kval = inner.substr(9);
            std::uint64_t k = 0;
            auto [ptr, ec] = std::from_chars(kval.data(), kval.data() + kval.size(), k);
            if (ec != std::errc() || ptr != kval.data() + kval.size() || k < 1)
                throw DataError(where + ": bad regime threshold \"" + std::string(kval) + "\"");
            if (regime_values.count(k))
                throw DataError(where + ": duplicate regime k=" + std::to_string(k));
            regime_values[k];
            current_regime = static_cast<std::int64_t>(k);
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw DataError(where + ": expected key = value");
        std::string key(detail::trim(line.substr(0, eq)));
        std::string_view value = detail::trim(line.substr(eq + 1));

        if (current_regime < 0) {
            if (key != "time_per_flop_c")
                throw DataError(where + ": unknown key \"" + key + "\"");
            if (have_c) throw DataError(where + ": duplicate time_per_flop_c");
            params.time_per_flop_c = detail::parse_double_strict(value, where);
            have_c = true;
        } else {
            if (key != "beta" && key != "gamma" && key != "s_k")
                throw DataError(where + ": unknown key \"" + key + "\"");
            auto& section = regime_values[static_cast<std::uint64_t>(current_regime)];
            if (section.count(key))
                throw DataError(where + ": duplicate key \"" + key + "\"");
            section[key] = detail::parse_double_strict(value, where);
        }
    }

    if (!have_c) throw DataError(source + ": missing time_per_flop_c");
    for (const auto& [k, section] : regime_values) {
        RegimeParams r;
        for (const char* key : {"beta", "gamma", "s_k"})
            if (!section.count(key))
                throw DataError(source + ": regime k=" + std::to_string(k) +
                                " missing key \"" + key + "\"");
        r.beta = section.at("beta");
        r.gamma = section.at("gamma");
        r.s_k = section.at("s_k");
        params.regimes[k] = r;
    }

    try {
        validate(params);
    } catch (const std::invalid_argument& e) {
        throw DataError(source + ": " + e.what());
    }
    return params;
}

inline std::string format_params(const AlphaParams& p) {
    validate(p);
    std::string out = "time_per_flop_c = " + detail::format_double(p.time_per_flop_c) + "\n";
    for (const auto& [k, regime] : p.regimes) {
        out += "\n[regime k=" + std::to_string(k) + "]\n";
        out += "beta = " + detail::format_double(regime.beta) + "\n";
        out += "gamma = " + detail::format_double(regime.gamma) + "\n";
        out += "s_k = " + detail::format_double(regime.s_k) + "\n";
    }
    return out;
}

inline AlphaParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open params file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_params(buf.str(), path);
}

inline void save_params(const AlphaParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write params file: " + path);
    out << format_params(p);
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace alphaflops
