#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "alphaflops/alpha.hpp"
#include "alphaflops/dataset.hpp"
#include "alphaflops/error.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Fitting AlphaParams to timing data.
//
// Records are partitioned into the k=1 and k>1 regimes. Each regime's
// (beta, gamma, s_k) is found by a coarse grid search followed by compass
// (pattern) refinement with step halving; the scale c has a closed-form
// least-squares solution at every candidate, so the search is 3-dimensional
// at most. Loss is the mean squared relative error of predicted vs measured
// time. Everything runs in a fixed serial order, so results are bit-stable.
// ---------------------------------------------------------------------------

struct FitConfig {
    int beta_points = 25;    // log-spaced over [beta_min, beta_max]
    int gamma_points = 20;   // linear over [gamma_min, gamma_max]
    int sk_points = 13;      // log-spaced over [sk_min, sk_max]
    int refine_budget = 2000; // loss evaluations per regime during refinement
    bool trim = false;       // drop the top APE percentile and refit
    double beta_min = 1e-4, beta_max = 1.0;
    double gamma_min = 0.05, gamma_max = 1.0;
    double sk_min = 1.0, sk_max = 64.0;
};

// Constraints applied to every fitted regime; s_k pins only k>1 regimes
// (the k=1 regime always keeps s_k = 1).
struct FixedParams {
    std::optional<double> beta;
    std::optional<double> gamma;
    std::optional<double> s_k;
    std::optional<double> c;
};

struct FitResult {
    AlphaParams params;
    double mape = 0.0;     // percent
    double max_ape = 0.0;  // percent
    std::uint64_t n_records = 0;
    bool converged = false;
};

namespace detail {

struct FitPoint {
    double flops_ms = 0.0;  // conv_flops * 1e3: predicted ms per unit c at alpha=1
    double surface = 1.0;
    double time_ms = 1.0;
};

inline FitPoint fit_point_of(const TimingRecord& rec) {
    AlphaInput in = alpha_input_of(rec.layer);
    FitPoint p;
    p.flops_ms = static_cast<double>(layer_flops(rec.layer)) * 1e3;
    p.surface = in.surface;
    p.time_ms = rec.time_ms;
    return p;
}

inline double regime_alpha(double surface, double beta, double gamma, double s_k) {
    double s = surface < s_k ? s_k : surface;
    return std::pow((1.0 - beta) * (s_k / s) + beta, gamma);
}

// Ratio sums of the other regime's points at its current params; ties the
// candidate regime to the same closed-form c as the rest of the dataset.
struct LossContext {
    double sum_r = 0.0;
    double sum_r2 = 0.0;
    std::size_t count = 0;
};

// Least-squares c for loss sum((c*r_i - 1)^2), r_i = predicted_ms(c=1)/time_ms,
// summed over the candidate points and the context. Returns the loss mean;
// c through the out parameter.
inline double candidate_loss(const std::vector<FitPoint>& pts, double beta,
                             double gamma, double s_k, const LossContext& ctx,
                             const std::optional<double>& fixed_c, double& c_out) {
    double sum_r = ctx.sum_r, sum_r2 = ctx.sum_r2;
    std::vector<double> ratios(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double r = pts[i].flops_ms * regime_alpha(pts[i].surface, beta, gamma, s_k) /
                   pts[i].time_ms;
        ratios[i] = r;
        sum_r += r;
        sum_r2 += r * r;
    }
    double c = fixed_c ? *fixed_c : (sum_r2 > 0.0 ? sum_r / sum_r2 : 1.0);
    c_out = c;
    double loss = c * c * ctx.sum_r2 - 2.0 * c * ctx.sum_r +
                  static_cast<double>(ctx.count);
    for (double r : ratios) {
        double e = c * r - 1.0;
        loss += e * e;
    }
    return loss / static_cast<double>(pts.size() + ctx.count);
}

struct RegimeFit {
    RegimeParams params;
    bool converged = true;
};

// Search space in transformed coordinates (log10 beta, gamma, log10 s_k).
// `init`, when given, seeds the incumbent; grid points must beat it strictly.
inline RegimeFit fit_regime(const std::vector<FitPoint>& pts, const LossContext& ctx,
                            bool unary_regime, const FixedParams& fixed,
                            const FitConfig& cfg,
                            const std::optional<std::array<double, 3>>& init = {}) {
    const double lb_lo = std::log10(cfg.beta_min), lb_hi = std::log10(cfg.beta_max);
    const double g_lo = cfg.gamma_min, g_hi = cfg.gamma_max;
    const double ls_lo = std::log10(cfg.sk_min), ls_hi = std::log10(cfg.sk_max);

    auto axis = [](double lo, double hi, int n) {
        std::vector<double> v;
        if (n < 2 || lo == hi) return std::vector<double>{lo};
        v.reserve(n);
        for (int i = 0; i < n; ++i)
            v.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
        return v;
    };

    std::vector<double> lb_axis = fixed.beta
                                      ? std::vector<double>{std::log10(*fixed.beta)}
                                      : axis(lb_lo, lb_hi, cfg.beta_points);
    std::vector<double> g_axis = fixed.gamma ? std::vector<double>{*fixed.gamma}
                                             : axis(g_lo, g_hi, cfg.gamma_points);
    std::vector<double> ls_axis;
    if (unary_regime)
        ls_axis = {0.0};
    else if (fixed.s_k)
        ls_axis = {std::log10(*fixed.s_k)};
    else
        ls_axis = axis(ls_lo, ls_hi, cfg.sk_points);

    auto eval = [&](const std::array<double, 3>& x) {
        double c_unused = 0.0;
        return candidate_loss(pts, std::pow(10.0, x[0]), x[1], std::pow(10.0, x[2]),
                              ctx, fixed.c, c_unused);
    };

    // Coarse grid: nested ascending loops, strictly-better acceptance, so the
    // winner is the lexicographically smallest point among equal losses.
    std::array<double, 3> best_x{lb_axis[0], g_axis[0], ls_axis[0]};
    if (init)
        best_x = {std::clamp((*init)[0], lb_lo, lb_hi),
                  std::clamp((*init)[1], g_lo, g_hi),
                  unary_regime ? 0.0 : std::clamp((*init)[2], ls_lo, ls_hi)};
    double best_loss = eval(best_x);
    for (double lb : lb_axis)
        for (double g : g_axis)
            for (double ls : ls_axis) {
                std::array<double, 3> x{lb, g, ls};
                double loss = eval(x);
                if (loss < best_loss) {
                    best_loss = loss;
                    best_x = x;
                }
            }

    // Compass refinement over the free dimensions with step halving.
    const bool free_dim[3] = {!fixed.beta, !fixed.gamma, !unary_regime && !fixed.s_k};
    const double lo[3] = {lb_lo, g_lo, ls_lo};
    const double hi[3] = {lb_hi, g_hi, ls_hi};
    std::array<double, 3> step{
        lb_axis.size() > 1 ? (lb_hi - lb_lo) / (lb_axis.size() - 1) : 0.0,
        g_axis.size() > 1 ? (g_hi - g_lo) / (g_axis.size() - 1) : 0.0,
        ls_axis.size() > 1 ? (ls_hi - ls_lo) / (ls_axis.size() - 1) : 0.0};
    for (int d = 0; d < 3; ++d)
        if (free_dim[d] && step[d] == 0.0) step[d] = (hi[d] - lo[d]) / 12.0;

    const double step_eps = 1e-6;
    int evals = 0;
    auto max_free_step = [&] {
        double m = 0.0;
        for (int d = 0; d < 3; ++d)
            if (free_dim[d]) m = std::max(m, step[d]);
        return m;
    };

    bool any_free = free_dim[0] || free_dim[1] || free_dim[2];
    while (any_free && max_free_step() > step_eps && evals < cfg.refine_budget) {
        std::array<double, 3> move_x = best_x;
        double move_loss = best_loss;
        bool moved = false;
        for (int d = 0; d < 3 && evals < cfg.refine_budget; ++d) {
            if (!free_dim[d]) continue;
            for (double sign : {1.0, -1.0}) {
                if (evals >= cfg.refine_budget) break;
                std::array<double, 3> x = best_x;
                x[d] = std::clamp(x[d] + sign * step[d], lo[d], hi[d]);
                if (x[d] == best_x[d]) continue;
                double loss = eval(x);
                ++evals;
                if (loss < move_loss) {
                    move_loss = loss;
                    move_x = x;
                    moved = true;
                }
            }
        }
        if (moved) {
            best_loss = move_loss;
            best_x = move_x;
        } else {
            for (int d = 0; d < 3; ++d)
                if (free_dim[d]) step[d] *= 0.5;
        }
    }

    RegimeFit out;
    out.params.beta = std::pow(10.0, best_x[0]);
    out.params.gamma = best_x[1];
    out.params.s_k = unary_regime ? 1.0 : std::pow(10.0, best_x[2]);
    out.converged = !any_free || max_free_step() <= step_eps;
    return out;
}

inline std::uint64_t regime_key_of(const TimingRecord& rec) {
    return alpha_input_of(rec.layer).kernel_k <= 1 ? 1 : 2;
}

}  // namespace detail

/// MAPE / max-APE of predicted vs measured time over the records as given;
/// no refitting.
inline FitResult evaluate(const std::vector<TimingRecord>& records,
                          const AlphaParams& params) {
    if (records.empty()) throw DataError("empty record list: nothing to evaluate");
    validate(params);
    FitResult res;
    res.params = params;
    res.n_records = records.size();
    res.converged = true;
    double sum_ape = 0.0;
    for (const TimingRecord& rec : records) {
        validate(rec);
        double predicted_ms = predicted_time(rec.layer, params) * 1e3;
        double ape = std::abs(predicted_ms - rec.time_ms) / rec.time_ms * 100.0;
        sum_ape += ape;
        res.max_ape = std::max(res.max_ape, ape);
    }
    res.mape = sum_ape / static_cast<double>(records.size());
    return res;
}

inline FitResult fit(const std::vector<TimingRecord>& records,
                     const FixedParams& fixed = {}, const FitConfig& cfg = {}) {
    if (records.empty()) throw DataError("empty dataset: nothing to fit");
    for (const TimingRecord& rec : records) validate(rec);

    std::vector<std::string> devices;
    for (const TimingRecord& rec : records)
        if (std::find(devices.begin(), devices.end(), rec.device) == devices.end())
            devices.push_back(rec.device);
    if (devices.size() > 1) {
        std::string list;
        for (const std::string& d : devices) list += (list.empty() ? "" : ", ") + d;
        throw DataError("dataset mixes device labels (" + list +
                        "); fit one device at a time");
    }

    if (fixed.c && !(*fixed.c > 0.0))
        throw std::invalid_argument("fixed c must be > 0");

    // Duplicate observations carry no extra information for the optimizer;
    // collapse bit-identical records before searching.
    std::vector<TimingRecord> unique;
    for (const TimingRecord& rec : records)
        if (std::find(unique.begin(), unique.end(), rec) == unique.end())
            unique.push_back(rec);

    std::array<std::vector<detail::FitPoint>, 2> partition;  // [0]: k=1, [1]: k>1
    std::array<std::uint64_t, 2> raw_count{0, 0};
    std::array<std::vector<double>, 2> surfaces;
    for (const TimingRecord& rec : records)
        ++raw_count[detail::regime_key_of(rec) - 1];
    for (const TimingRecord& rec : unique) {
        std::size_t slot = detail::regime_key_of(rec) - 1;
        detail::FitPoint p = detail::fit_point_of(rec);
        partition[slot].push_back(p);
        if (std::find(surfaces[slot].begin(), surfaces[slot].end(), p.surface) ==
            surfaces[slot].end())
            surfaces[slot].push_back(p.surface);
    }

    AlphaParams params;
    params.regimes[1] = RegimeParams{};  // neutral unless fitted
    params.regimes[2] = RegimeParams{};

    for (std::size_t slot = 0; slot < 2; ++slot) {
        if (partition[slot].empty()) continue;
        std::string name = slot == 0 ? "regime k=1" : "regime k>1";
        if (raw_count[slot] < 4)
            throw DataError(name + ": need at least 4 records, got " +
                            std::to_string(raw_count[slot]));
        if (surfaces[slot].size() < 2)
            throw DataError(name +
                            ": all records share one surface; beta and gamma are "
                            "non-identifiable");
    }

    // Phase A: each regime alone, with its own implicit scale. This pins the
    // alpha shapes but may leave the two regimes on different scales.
    for (std::size_t slot = 0; slot < 2; ++slot) {
        if (partition[slot].empty()) continue;
        params.regimes[slot + 1] =
            detail::fit_regime(partition[slot], {}, slot == 0, fixed, cfg).params;
    }

    // Phase B, two block passes: re-fit each regime against the closed-form c
    // of the whole dataset, holding the other regime at its latest values and
    // seeding from the phase-A triple, so both shapes settle on one shared
    // scale. The second pass lets each regime react to the other's final shape.
    std::array<bool, 2> slot_converged{true, true};
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t slot = 0; slot < 2; ++slot) {
            if (partition[slot].empty()) continue;
            detail::LossContext ctx;
            const RegimeParams& other = params.regimes.at(2 - slot);
            for (const detail::FitPoint& p : partition[1 - slot]) {
                double r = p.flops_ms *
                           detail::regime_alpha(p.surface, other.beta, other.gamma,
                                                other.s_k) /
                           p.time_ms;
                ctx.sum_r += r;
                ctx.sum_r2 += r * r;
                ++ctx.count;
            }
            const RegimeParams& cur = params.regimes.at(slot + 1);
            std::array<double, 3> seed{std::log10(cur.beta), cur.gamma,
                                       std::log10(cur.s_k)};
            detail::RegimeFit rf = detail::fit_regime(partition[slot], ctx,
                                                      slot == 0, fixed, cfg, seed);
            params.regimes[slot + 1] = rf.params;
            slot_converged[slot] = rf.converged;
        }
    }
    bool converged = slot_converged[0] && slot_converged[1];

    // Shared c across regimes: one device, one scale.
    if (fixed.c) {
        params.time_per_flop_c = *fixed.c;
    } else {
        double sum_r = 0.0, sum_r2 = 0.0;
        for (const TimingRecord& rec : unique) {
            detail::FitPoint p = detail::fit_point_of(rec);
            const RegimeParams& rp = params.regimes.at(detail::regime_key_of(rec));
            double r = p.flops_ms * detail::regime_alpha(p.surface, rp.beta, rp.gamma,
                                                         rp.s_k) /
                       p.time_ms;
            sum_r += r;
            sum_r2 += r * r;
        }
        params.time_per_flop_c = sum_r2 > 0.0 ? sum_r / sum_r2 : 1.0;
    }
    if (!(params.time_per_flop_c > 0.0))
        throw DataError("degenerate dataset: fitted time_per_flop_c is not positive");

    if (cfg.trim) {
        // One full pass, then drop the top APE percentile and refit without it.
        std::vector<std::pair<double, std::size_t>> apes;
        for (std::size_t i = 0; i < records.size(); ++i) {
            double predicted_ms = predicted_time(records[i].layer, params) * 1e3;
            apes.push_back({std::abs(predicted_ms - records[i].time_ms) /
                                records[i].time_ms,
                            i});
        }
        std::sort(apes.begin(), apes.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::size_t drop =
            (records.size() + 99) / 100;  // ceil(1%), at least one record
        std::vector<bool> dropped(records.size(), false);
        for (std::size_t i = 0; i < drop && i < apes.size(); ++i)
            dropped[apes[i].second] = true;
        std::vector<TimingRecord> kept;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!dropped[i]) kept.push_back(records[i]);
        FitConfig no_trim = cfg;
        no_trim.trim = false;
        return fit(kept, fixed, no_trim);
    }

    FitResult res = evaluate(records, params);
    res.converged = converged;
    return res;
}

/// Fit-recovery oracle: timing records whose times are the model's own
/// predictions, optionally perturbed by uniform relative noise.
inline std::vector<TimingRecord> synthesize_dataset(
    const AlphaParams& params, const std::vector<LayerDescriptor>& layouts,
    double noise_rel, std::uint64_t seed) {
    validate(params);
    if (!(noise_rel >= 0.0 && noise_rel < 0.5))
        throw std::invalid_argument("noise_rel must be in [0, 0.5)");
    std::mt19937_64 rng(seed);
    std::vector<TimingRecord> records;
    records.reserve(layouts.size());
    for (const LayerDescriptor& layer : layouts) {
        validate(layer);
        // top 53 bits -> uniform in [0,1); mapped by hand for cross-platform
        // byte-stability
        double u = static_cast<double>(rng() >> 11) * 0x1p-53;
        double eps = (2.0 * u - 1.0) * noise_rel;
        TimingRecord rec;
        rec.layer = layer;
        rec.device = "synthetic";
        rec.time_ms = predicted_time(layer, params) * 1e3 * (1.0 + eps);
        rec.runs = 1;
        records.push_back(rec);
    }
    return records;
}

}  // namespace alphaflops
