/*
   Copyright 2026 The fsopam Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Bit error probability of Gray-mapped M-PAM on AWGN written in terms of the
// minimum distance, and its average over the channel gain distribution (the
// bound attained by a receiver that knows h exactly).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fsopam/channel.hpp"
#include "fsopam/constellation.hpp"
#include "fsopam/errors.hpp"
#include "fsopam/quadrature.hpp"
#include "fsopam/rng.hpp"

namespace fsopam {

// (2d)^2 / N0 at the stated order.
struct SnrPoint {
    double d2_over_n0 = 0.0;
    unsigned order = 2;
};

inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// One summand of the double sum: sign * weight / (M log2 M) * Q((2i+1) g),
// g = sqrt((2d)^2 / (2 N0)).
struct PamBepTerm {
    unsigned k = 0;
    unsigned i = 0;
    int sign = 1;
    std::int64_t weight = 0;
};

inline std::vector<PamBepTerm> pam_bep_terms(unsigned order)
{
    const unsigned bits = bits_per_symbol(order);
    const std::int64_t m = order;
    std::vector<PamBepTerm> terms;
    for (unsigned k = 1; k <= bits; ++k) {
        const std::int64_t pow_k = std::int64_t{1} << k;
        const std::int64_t pow_km1 = pow_k / 2;
        // i runs to (1 - 2^-k) M - 1
        const std::int64_t last = m - m / pow_k - 1;
        for (std::int64_t i = 0; i <= last; ++i) {
            const std::int64_t sign_exp = (i * pow_km1) / m;             // floor(i 2^(k-1) / M)
            const std::int64_t rounded = (2 * i * pow_km1 + m) / (2 * m); // floor(i 2^(k-1)/M + 1/2)
            PamBepTerm t;
            t.k = k;
            t.i = static_cast<unsigned>(i);
            t.sign = (sign_exp % 2 == 0) ? 1 : -1;
            t.weight = pow_k - 2 * rounded;
            terms.push_back(t);
        }
    }
    return terms;
}

// Coefficients of Q((2i+1) g) collected over k, as integers over the common
// denominator M log2 M.
struct PamBepCoefficients {
    std::int64_t denominator = 1;
    std::vector<std::int64_t> numerators; // index i -> Q((2i+1) g)
};

inline PamBepCoefficients pam_bep_coefficients(unsigned order)
{
    PamBepCoefficients c;
    c.denominator = static_cast<std::int64_t>(order) * bits_per_symbol(order);
    for (const auto& t : pam_bep_terms(order)) {
        if (t.i >= c.numerators.size())
            c.numerators.resize(t.i + 1, 0);
        c.numerators[t.i] += t.sign * t.weight;
    }
    return c;
}

// Evaluated term by term as the double sum is written.
inline double pam_bep(const SnrPoint& point)
{
    if (!(point.d2_over_n0 >= 0.0))
        throw std::domain_error("(2d)^2/N0 must be non-negative");
    const unsigned bits = bits_per_symbol(point.order);
    const double g = std::sqrt(point.d2_over_n0 / 2.0);
    const double scale = 1.0 / (static_cast<double>(point.order) * bits);
    double sum = 0.0;
    for (const auto& t : pam_bep_terms(point.order))
        sum += t.sign * static_cast<double>(t.weight) * scale * q_function((2.0 * t.i + 1.0) * g);
    return sum;
}

// (2d)^2/N0 at which pam_bep equals target (bisection in log domain).
inline double snr_for_pam_bep(double target, unsigned order)
{
    if (!(target > 0.0 && target < 0.5))
        throw std::domain_error("target BEP must lie in (0, 1/2)");
    double lo = std::log(1e-6);
    double hi = std::log(1e6);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pam_bep({std::exp(mid), order}) > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

// 2d = sqrt(6 E_b log2 M / ((M-1)(2M-1))) for electrical energy per bit E_b.
inline double electrical_distance_from_Eb(double energy_per_bit, unsigned order)
{
    const unsigned bits = bits_per_symbol(order);
    detail::require_positive(energy_per_bit, "energy per bit");
    const double m = order;
    return std::sqrt(6.0 * energy_per_bit * bits / ((m - 1.0) * (2.0 * m - 1.0)));
}

struct GenieBoundResult {
    double value = 0.0;
    double error = 0.0;       // quadrature error plus the truncated tail bound
    double upper_limit = 0.0; // h-integral truncation point
    double tail_mass = 0.0;
};

struct GenieBoundOptions {
    double rel_tol = 1e-4;
    double tail_mass = 1e-10;
};

// Average of pam_bep((2hd)^2/N0) over the channel gain density. The
// h-integral is cut at H where the remaining probability mass drops below
// tail_mass; pam_bep decreases in h, so pam_bep(H) * tail (at most half the
// tail mass) bounds the dropped part and is added to the error estimate.
inline GenieBoundResult genie_bound_quadrature(const SnrPoint& point, const ChannelModel& model,
                                               const GenieBoundOptions& opts = {})
{
    model.validate();
    bits_per_symbol(point.order);
    if (model.is_static()) {
        const double v = pam_bep(point);
        return {v, 0.0, 1.0, 0.0};
    }
    auto pdf = [&](double h) { return h > 0.0 ? pdf_composite(model, h) : 0.0; };

    QuadratureOptions tail_opts;
    tail_opts.abs_tol = 0.1 * opts.tail_mass;
    tail_opts.rel_tol = 1e-6;

    double upper = support_upper(model);
    double tail = 0.0;
    if (!std::isfinite(upper)) {
        upper = 4.0 * model.mean_gain();
        for (;;) {
            tail = integrate(pdf, upper, kInfinity, tail_opts, "genie bound tail").value;
            if (tail < opts.tail_mass)
                break;
            upper *= 1.5;
            if (upper > 1e6 * model.mean_gain())
                throw numeric_error("genie bound: could not bound the gain tail", tail, tail);
        }
    }

    auto integrand = [&](double h) {
        if (!(h > 0.0))
            return 0.0;
        return pam_bep({point.d2_over_n0 * h * h, point.order}) * pdf(h);
    };
    // At high SNR nearly all of the average comes from deep fades near
    // h ~ 1/sqrt(d2/N0), far below the bulk of the density. Splitting the
    // range geometrically around that knee keeps the adaptive rule from
    // sampling past it.
    std::vector<double> cuts{0.0};
    const double knee = 1.0 / std::sqrt(point.d2_over_n0);
    for (double b = knee * 0x1p-30; b < upper; b *= 2.0)
        cuts.push_back(b);
    cuts.push_back(upper);
    auto body_pass = [&](double abs_tol) {
        QuadratureOptions body_opts;
        body_opts.abs_tol = abs_tol;
        body_opts.rel_tol = 1e-2 * opts.rel_tol;
        QuadratureResult sum;
        for (std::size_t i = 1; i < cuts.size(); ++i) {
            const auto part = integrate(integrand, cuts[i - 1], cuts[i], body_opts, "genie bound");
            sum.value += part.value;
            sum.error += part.error;
        }
        return sum;
    };
    // A second pass rescales the absolute tolerance to the size of the
    // result when it is very small.
    QuadratureResult body = body_pass(1e-20);
    if (body.error > 0.5 * opts.rel_tol * body.value && body.value > 0.0)
        body = body_pass(1e-2 * opts.rel_tol * body.value / static_cast<double>(cuts.size()));

    GenieBoundResult out;
    out.value = body.value;
    out.error = body.error + pam_bep({point.d2_over_n0 * upper * upper, point.order}) * tail;
    out.upper_limit = upper;
    out.tail_mass = tail;
    if (out.error > opts.rel_tol * out.value)
        throw numeric_error("genie bound: error estimate exceeds the relative tolerance", out.value,
                            out.error);
    return out;
}

inline double genie_bound(const SnrPoint& point, const ChannelModel& model)
{
    return genie_bound_quadrature(point, model).value;
}

// Same average by sampling h.
inline double genie_bound_monte_carlo(const SnrPoint& point, const ChannelModel& model,
                                      std::size_t draws, Philox4x32& rng)
{
    if (draws == 0)
        throw usage_error("genie_bound_monte_carlo needs at least one draw");
    double sum = 0.0;
    for (std::size_t n = 0; n < draws; ++n) {
        const double h = sample_gain(model, rng);
        sum += pam_bep({point.d2_over_n0 * h * h, point.order});
    }
    return sum / static_cast<double>(draws);
}

} // namespace fsopam
