#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "alphaflops/error.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Layer descriptors
// ---------------------------------------------------------------------------

enum class Padding { Same, Valid };

struct DenseDescriptor {
    std::uint64_t d_in = 1;
    std::uint64_t d_out = 1;
    bool has_bias = true;

    friend bool operator==(const DenseDescriptor&, const DenseDescriptor&) = default;
};

struct Conv2dDescriptor {
    std::uint64_t w_in = 1;   // spatial width
    std::uint64_t h_in = 1;   // spatial height
    std::uint64_t c_in = 1;
    std::uint64_t c_out = 1;
    std::uint64_t k1 = 1;     // kernel extent along width
    std::uint64_t k2 = 1;     // kernel extent along height
    std::uint64_t stride = 1;
    Padding padding = Padding::Same;
    std::uint64_t batch = 1;

    friend bool operator==(const Conv2dDescriptor&, const Conv2dDescriptor&) = default;
};

// Scalar multipliers of the C <- alpha*A*B + beta*C form enter the count only
// through their presence, never through their numeric values.
struct GemmSpec {
    std::uint64_t m = 1;
    std::uint64_t k = 1;
    std::uint64_t n = 1;
    bool use_alpha = true;
    bool use_beta = true;

    friend bool operator==(const GemmSpec&, const GemmSpec&) = default;
};

using LayerDescriptor = std::variant<DenseDescriptor, Conv2dDescriptor>;

// Tally of elementary float operations; a multiply-accumulate counts as 2.
struct OpCount {
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;

    std::uint64_t total() const { return multiplications + additions; }

    friend bool operator==(const OpCount&, const OpCount&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate(const DenseDescriptor& d) {
    if (d.d_in < 1 || d.d_out < 1)
        throw std::invalid_argument("dense: d_in and d_out must be >= 1");
}

inline void validate(const Conv2dDescriptor& c) {
    if (c.w_in < 1 || c.h_in < 1 || c.c_in < 1 || c.c_out < 1 || c.k1 < 1 ||
        c.k2 < 1 || c.stride < 1 || c.batch < 1)
        throw std::invalid_argument("conv2d: all dimensions must be >= 1");
    if (c.padding == Padding::Valid && (c.k1 > c.w_in || c.k2 > c.h_in))
        throw std::invalid_argument(
            "conv2d: kernel larger than input under valid padding");
}

inline void validate(const GemmSpec& g) {
    if (g.m < 1 || g.k < 1 || g.n < 1)
        throw std::invalid_argument("gemm: m, k, n must be >= 1");
}

inline void validate(const LayerDescriptor& layer) {
    std::visit([](const auto& d) { validate(d); }, layer);
}

// ---------------------------------------------------------------------------
// Checked 64-bit arithmetic (counts reject overflow instead of wrapping)
// ---------------------------------------------------------------------------

inline std::uint64_t mul_checked(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r))
        throw std::overflow_error("FLOP count exceeds 64-bit range");
    return r;
}

inline std::uint64_t add_checked(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r))
        throw std::overflow_error("FLOP count exceeds 64-bit range");
    return r;
}

// ---------------------------------------------------------------------------
// Counting
// ---------------------------------------------------------------------------

/// Dot product of length n: n multiplications, n-1 additions.
inline std::uint64_t inner_product_flops(std::uint64_t n) {
    if (n < 1) throw std::invalid_argument("inner product length must be >= 1");
    return 2 * n - 1;
}

/// GEMM count. Exact form tallies the zero-initialized multiply-accumulate
/// loop (2k per element) plus one multiply for the alpha scale and a
/// multiply-add for the beta*C accumulate; m*n*(2k+3) with both scalars.
/// The approximate form is the usual 2mkn.
inline std::uint64_t gemm_flops(const GemmSpec& g, bool exact) {
    validate(g);
    std::uint64_t per_element = mul_checked(2, g.k);
    if (exact) {
        if (g.use_alpha) per_element = add_checked(per_element, 1);
        if (g.use_beta) per_element = add_checked(per_element, 2);
    }
    return mul_checked(mul_checked(g.m, g.n), per_element);
}

/// Dense layer count. Approximate form 2*d_in*d_out; exact form additionally
/// tallies the bias addition per output element.
inline std::uint64_t dense_flops(const DenseDescriptor& d, bool exact) {
    validate(d);
    std::uint64_t flops = mul_checked(2, mul_checked(d.d_in, d.d_out));
    if (exact && d.has_bias) flops = add_checked(flops, d.d_out);
    return flops;
}

/// Output spatial extent. Same padding: ceil(in/stride); valid padding:
/// floor((in-k)/stride)+1.
inline std::pair<std::uint64_t, std::uint64_t> output_shape(const Conv2dDescriptor& c) {
    validate(c);
    if (c.padding == Padding::Same)
        return {(c.w_in + c.stride - 1) / c.stride,
                (c.h_in + c.stride - 1) / c.stride};
    return {(c.w_in - c.k1) / c.stride + 1, (c.h_in - c.k2) / c.stride + 1};
}

/// batch * 2 * k1 * k2 * c_in * w_out * h_out * c_out. Convolution bias is
/// excluded from the count.
inline std::uint64_t conv_flops(const Conv2dDescriptor& c) {
    auto [w_out, h_out] = output_shape(c);
    std::uint64_t flops = mul_checked(c.batch, 2);
    flops = mul_checked(flops, c.k1);
    flops = mul_checked(flops, c.k2);
    flops = mul_checked(flops, c.c_in);
    flops = mul_checked(flops, w_out);
    flops = mul_checked(flops, h_out);
    flops = mul_checked(flops, c.c_out);
    return flops;
}

/// A dense layer is a unary convolution over a 1x1 surface.
inline Conv2dDescriptor dense_as_conv(const DenseDescriptor& d) {
    validate(d);
    Conv2dDescriptor c;
    c.w_in = 1;
    c.h_in = 1;
    c.c_in = d.d_in;
    c.c_out = d.d_out;
    c.k1 = 1;
    c.k2 = 1;
    c.stride = 1;
    c.padding = Padding::Same;
    c.batch = 1;
    return c;
}

/// Asymptotic count for either layer kind (dense bias not included).
inline std::uint64_t layer_flops(const LayerDescriptor& layer) {
    return std::visit(
        [](const auto& d) -> std::uint64_t {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DenseDescriptor>)
                return dense_flops(d, false);
            else
                return conv_flops(d);
        },
        layer);
}

/// Exact count: what an instrumented kernel executing the layer tallies.
inline std::uint64_t layer_flops_exact(const LayerDescriptor& layer) {
    return std::visit(
        [](const auto& d) -> std::uint64_t {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DenseDescriptor>)
                return dense_flops(d, true);
            else
                return conv_flops(d);
        },
        layer);
}

// ---------------------------------------------------------------------------
// Text form
//
//   conv2d w=300 h=300 cin=64 cout=64 k1=3 k2=3 stride=1 pad=same batch=1
//   dense din=12800 dout=12800 bias=true
//
// Field order free, names fixed, case-sensitive, integers decimal.
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
    std::string_view text;
    std::size_t offset = 0;
};

inline std::vector<Token> split_tokens(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == ' ' || text[i] == '\t') {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
        tokens.push_back({text.substr(start, i - start), start});
    }
    return tokens;
}

inline std::uint64_t parse_positive_int(std::string_view key, std::string_view value,
                                        std::size_t offset) {
    std::uint64_t v = 0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || v < 1)
        throw ParseError("layer text: field \"" + std::string(key) +
                         "\" at offset " + std::to_string(offset) +
                         ": expected positive integer, got \"" + std::string(value) + "\"");
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view value, std::size_t offset) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ParseError("layer text: field \"" + std::string(key) + "\" at offset " +
                     std::to_string(offset) + ": expected true or false, got \"" +
                     std::string(value) + "\"");
}

inline Padding parse_padding(std::string_view key, std::string_view value,
                             std::size_t offset) {
    if (value == "same") return Padding::Same;
    if (value == "valid") return Padding::Valid;
    throw ParseError("layer text: field \"" + std::string(key) + "\" at offset " +
                     std::to_string(offset) + ": expected same or valid, got \"" +
                     std::string(value) + "\"");
}

}  // namespace detail

inline LayerDescriptor parse_layer(std::string_view text) {
    auto tokens = detail::split_tokens(text);
    if (tokens.empty()) throw ParseError("layer text: empty descriptor");

    std::string_view kind = tokens[0].text;
    if (kind != "dense" && kind != "conv2d")
        throw ParseError("layer text: unknown layer kind \"" + std::string(kind) +
                         "\" (expected dense or conv2d)");

    DenseDescriptor dense;
    Conv2dDescriptor conv;
    std::vector<std::string_view> seen;

    // required fields per kind
    const std::vector<std::string_view> required =
        kind == "dense" ? std::vector<std::string_view>{"din", "dout"}
                        : std::vector<std::string_view>{"w", "h", "cin", "cout", "k1", "k2"};

    for (std::size_t t = 1; t < tokens.size(); ++t) {
        std::string_view tok = tokens[t].text;
        std::size_t off = tokens[t].offset;
        std::size_t eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw ParseError("layer text: expected key=value at offset " +
                             std::to_string(off) + ", got \"" + std::string(tok) + "\"");
        std::string_view key = tok.substr(0, eq);
        std::string_view value = tok.substr(eq + 1);
        std::size_t value_off = off + eq + 1;

        for (std::string_view s : seen)
            if (s == key)
                throw ParseError("layer text: duplicate field \"" + std::string(key) +
                                 "\" at offset " + std::to_string(off));
        seen.push_back(key);

        if (kind == "dense") {
            if (key == "din")
                dense.d_in = detail::parse_positive_int(key, value, value_off);
            else if (key == "dout")
                dense.d_out = detail::parse_positive_int(key, value, value_off);
            else if (key == "bias")
                dense.has_bias = detail::parse_bool(key, value, value_off);
            else
                throw ParseError("layer text: unknown field \"" + std::string(key) +
                                 "\" at offset " + std::to_string(off));
        } else {
            if (key == "w")
                conv.w_in = detail::parse_positive_int(key, value, value_off);
            else if (key == "h")
                conv.h_in = detail::parse_positive_int(key, value, value_off);
            else if (key == "cin")
                conv.c_in = detail::parse_positive_int(key, value, value_off);
            else if (key == "cout")
                conv.c_out = detail::parse_positive_int(key, value, value_off);
            else if (key == "k1")
                conv.k1 = detail::parse_positive_int(key, value, value_off);
            else if (key == "k2")
                conv.k2 = detail::parse_positive_int(key, value, value_off);
            else if (key == "stride")
                conv.stride = detail::parse_positive_int(key, value, value_off);
            else if (key == "pad")
                conv.padding = detail::parse_padding(key, value, value_off);
            else if (key == "batch")
                conv.batch = detail::parse_positive_int(key, value, value_off);
            else
                throw ParseError("layer text: unknown field \"" + std::string(key) +
                                 "\" at offset " + std::to_string(off));
        }
    }

    for (std::string_view req : required) {
        bool found = false;
        for (std::string_view s : seen)
            if (s == req) found = true;
        if (!found)
            throw ParseError("layer text: missing required field \"" +
                             std::string(req) + "\"");
    }

    if (kind == "dense") {
        validate(dense);
        return dense;
    }
    try {
        validate(conv);
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("layer text: ") + e.what());
    }
    return conv;
}

inline std::string format_layer(const LayerDescriptor& layer) {
    return std::visit(
        [](const auto& d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, DenseDescriptor>) {
                return "dense din=" + std::to_string(d.d_in) +
                       " dout=" + std::to_string(d.d_out) +
                       " bias=" + (d.has_bias ? "true" : "false");
            } else {
                return "conv2d w=" + std::to_string(d.w_in) +
                       " h=" + std::to_string(d.h_in) +
                       " cin=" + std::to_string(d.c_in) +
                       " cout=" + std::to_string(d.c_out) +
                       " k1=" + std::to_string(d.k1) +
                       " k2=" + std::to_string(d.k2) +
                       " stride=" + std::to_string(d.stride) +
                       " pad=" + (d.padding == Padding::Same ? "same" : "valid") +
                       " batch=" + std::to_string(d.batch);
            }
        },
        layer);
}

}  // namespace alphaflops
