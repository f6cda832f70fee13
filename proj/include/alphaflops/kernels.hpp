#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "alphaflops/layer.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Tally policies. Counting and timing are mutually exclusive: instantiate
// with OpTally to count, with NoTally to run bare (the calls compile away).
// ---------------------------------------------------------------------------

struct OpTally {
    std::uint64_t multiplications = 0;
    std::uint64_t additions = 0;

    void count_mul() { ++multiplications; }
    void count_add() { ++additions; }
    OpCount snapshot() const { return {multiplications, additions}; }
};

struct NoTally {
    static void count_mul() {}
    static void count_add() {}
};

// ---------------------------------------------------------------------------
// Data plumbing
// ---------------------------------------------------------------------------

/// Deterministic fill in [-1, 1). mt19937_64 output is mapped by hand so the
/// stream is identical across standard libraries.
inline void fill_random(std::span<float> data, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (float& v : data) {
        std::uint64_t bits = rng() >> 40;  // top 24 bits
        v = static_cast<float>(bits) * (2.0f / 16777216.0f) - 1.0f;
    }
}

/// Kernel data is single precision; checksums accumulate in double.
inline double checksum(std::span<const float> data) {
    double sum = 0.0;
    for (float v : data) sum += v;
    return sum;
}

// ---------------------------------------------------------------------------
// Convolution geometry. Same padding zero-pads a copy of the input; the
// padded border multiplies are executed and counted like interior ones.
// ---------------------------------------------------------------------------

struct ConvGeometry {
    std::uint64_t w_out = 1, h_out = 1;
    std::uint64_t pad_left = 0, pad_top = 0;
    std::uint64_t w_pad = 1, h_pad = 1;  // padded input extent
};

inline ConvGeometry conv_geometry(const Conv2dDescriptor& c) {
    auto [w_out, h_out] = output_shape(c);
    ConvGeometry g;
    g.w_out = w_out;
    g.h_out = h_out;
    g.w_pad = c.w_in;
    g.h_pad = c.h_in;
    if (c.padding == Padding::Same) {
        std::uint64_t need_w = (w_out - 1) * c.stride + c.k1;
        std::uint64_t need_h = (h_out - 1) * c.stride + c.k2;
        std::uint64_t pad_w = need_w > c.w_in ? need_w - c.w_in : 0;
        std::uint64_t pad_h = need_h > c.h_in ? need_h - c.h_in : 0;
        g.pad_left = pad_w / 2;
        g.pad_top = pad_h / 2;
        g.w_pad = c.w_in + pad_w;
        g.h_pad = c.h_in + pad_h;
    }
    return g;
}

/// Copies [batch][h_in][w_in][c_in] into a zeroed [batch][h_pad][w_pad][c_in].
inline std::vector<float> pad_input(const Conv2dDescriptor& c,
                                    std::span<const float> input) {
    ConvGeometry g = conv_geometry(c);
    std::vector<float> padded(c.batch * g.h_pad * g.w_pad * c.c_in, 0.0f);
    for (std::uint64_t b = 0; b < c.batch; ++b)
        for (std::uint64_t y = 0; y < c.h_in; ++y) {
            const float* src = &input[((b * c.h_in + y) * c.w_in) * c.c_in];
            float* dst = &padded[((b * g.h_pad + y + g.pad_top) * g.w_pad + g.pad_left) * c.c_in];
            for (std::uint64_t i = 0; i < c.w_in * c.c_in; ++i) dst[i] = src[i];
        }
    return padded;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Scalar dot product: n multiplications, n-1 additions.
template <class Tally>
float dot(std::span<const float> v, std::span<const float> w, Tally& tally) {
    float acc = v[0] * w[0];
    tally.count_mul();
    for (std::size_t i = 1; i < v.size(); ++i) {
        acc += v[i] * w[i];
        tally.count_mul();
        tally.count_add();
    }
    return acc;
}

/// C <- alpha*A*B + beta*C over row-major buffers. The accumulator starts at
/// zero, so each of the k product terms tallies a multiply and an addition.
template <class Tally>
void gemm(const GemmSpec& spec, std::span<const float> a, std::span<const float> b,
          std::span<float> c, float alpha_scale, float beta_scale, Tally& tally) {
    for (std::uint64_t i = 0; i < spec.m; ++i)
        for (std::uint64_t j = 0; j < spec.n; ++j) {
            float acc = 0.0f;
            for (std::uint64_t q = 0; q < spec.k; ++q) {
                acc += a[i * spec.k + q] * b[q * spec.n + j];
                tally.count_mul();
                tally.count_add();
            }
            float result = acc;
            if (spec.use_alpha) {
                result = acc * alpha_scale;
                tally.count_mul();
            }
            if (spec.use_beta) {
                result = result + beta_scale * c[i * spec.n + j];
                tally.count_mul();
                tally.count_add();
            }
            c[i * spec.n + j] = result;
        }
}

/// y = W*x (+ bias). Weights are row-major [d_out][d_in].
template <class Tally>
void dense_forward(const DenseDescriptor& d, std::span<const float> weights,
                   std::span<const float> bias, std::span<const float> x,
                   std::span<float> y, Tally& tally) {
    for (std::uint64_t o = 0; o < d.d_out; ++o) {
        float acc = 0.0f;
        const float* row = &weights[o * d.d_in];
        for (std::uint64_t i = 0; i < d.d_in; ++i) {
            acc += row[i] * x[i];
            tally.count_mul();
            tally.count_add();
        }
        if (d.has_bias) {
            acc += bias[o];
            tally.count_add();
        }
        y[o] = acc;
    }
}

/// Direct convolution over a pre-padded input [batch][h_pad][w_pad][c_in].
/// Weights are [k2][k1][c_in][c_out]; output is [batch][h_out][w_out][c_out].
template <class Tally>
void conv2d_naive(const Conv2dDescriptor& c, std::span<const float> padded,
                  std::span<const float> weights, std::span<float> out, Tally& tally) {
    ConvGeometry g = conv_geometry(c);
    for (std::uint64_t b = 0; b < c.batch; ++b)
        for (std::uint64_t oy = 0; oy < g.h_out; ++oy)
            for (std::uint64_t ox = 0; ox < g.w_out; ++ox)
                for (std::uint64_t oc = 0; oc < c.c_out; ++oc) {
                    float acc = 0.0f;
                    for (std::uint64_t ky = 0; ky < c.k2; ++ky)
                        for (std::uint64_t kx = 0; kx < c.k1; ++kx) {
                            std::uint64_t iy = oy * c.stride + ky;
                            std::uint64_t ix = ox * c.stride + kx;
                            const float* in_px =
                                &padded[((b * g.h_pad + iy) * g.w_pad + ix) * c.c_in];
                            const float* w_px =
                                &weights[((ky * c.k1 + kx) * c.c_in) * c.c_out + oc];
                            for (std::uint64_t ic = 0; ic < c.c_in; ++ic) {
                                acc += in_px[ic] * w_px[ic * c.c_out];
                                tally.count_mul();
                                tally.count_add();
                            }
                        }
                    out[((b * g.h_out + oy) * g.w_out + ox) * c.c_out + oc] = acc;
                }
}

inline std::uint64_t im2col_patch_elems(const Conv2dDescriptor& c) {
    ConvGeometry g = conv_geometry(c);
    return mul_checked(mul_checked(g.w_out, g.h_out),
                       mul_checked(mul_checked(c.k1, c.k2), c.c_in));
}

/// Convolution lowered to one matrix product per batch item:
/// (w_out*h_out, k1*k2*c_in) x (k1*k2*c_in, c_out). Patch extraction moves
/// data only; the product is a plain zero-accumulated GEMM, 2mkn operations.
template <class Tally>
void conv2d_im2col(const Conv2dDescriptor& c, std::span<const float> padded,
                   std::span<const float> weights, std::span<float> patches,
                   std::span<float> out, Tally& tally) {
    ConvGeometry g = conv_geometry(c);
    const std::uint64_t m = g.w_out * g.h_out;
    const std::uint64_t k = c.k1 * c.k2 * c.c_in;
    const std::uint64_t n = c.c_out;
    for (std::uint64_t b = 0; b < c.batch; ++b) {
        for (std::uint64_t oy = 0; oy < g.h_out; ++oy)
            for (std::uint64_t ox = 0; ox < g.w_out; ++ox) {
                float* row = &patches[(oy * g.w_out + ox) * k];
                for (std::uint64_t ky = 0; ky < c.k2; ++ky)
                    for (std::uint64_t kx = 0; kx < c.k1; ++kx) {
                        std::uint64_t iy = oy * c.stride + ky;
                        std::uint64_t ix = ox * c.stride + kx;
                        const float* in_px =
                            &padded[((b * g.h_pad + iy) * g.w_pad + ix) * c.c_in];
                        float* dst = &row[(ky * c.k1 + kx) * c.c_in];
                        for (std::uint64_t ic = 0; ic < c.c_in; ++ic) dst[ic] = in_px[ic];
                    }
            }
        float* out_b = &out[b * m * n];
        for (std::uint64_t i = 0; i < m; ++i)
            for (std::uint64_t j = 0; j < n; ++j) {
                float acc = 0.0f;
                const float* row = &patches[i * k];
                for (std::uint64_t q = 0; q < k; ++q) {
                    acc += row[q] * weights[q * n + j];
                    tally.count_mul();
                    tally.count_add();
                }
                out_b[i * n + j] = acc;
            }
    }
}

}  // namespace alphaflops
