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

// Block-fading channel gain h = h_a * h_p for an FSO link: Gamma-Gamma
// turbulence h_a (unit mean) times a pointing-error factor h_p with
// pdf gamma^2 / A0^(gamma^2) * h^(gamma^2 - 1) on (0, A0). Path loss is
// folded into h_a. With mean normalisation on, h is divided by the analytic
// mean A0 gamma^2 / (gamma^2 + 1) of the pointing factor so that E[h] = 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "fsopam/errors.hpp"
#include "fsopam/quadrature.hpp"
#include "fsopam/rng.hpp"

namespace fsopam {

struct GammaGammaParams {
    double alpha = 1.0; // large-scale eddies, variance 1/alpha
    double beta = 1.0;  // small-scale eddies, variance 1/beta

    static GammaGammaParams weak() { return {17.13, 16.04}; }
    static GammaGammaParams strong() { return {2.23, 1.54}; }

    void validate() const
    {
        if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
            throw std::domain_error("Gamma-Gamma parameters must be positive and finite");
    }

    double scintillation_index() const { return 1.0 / alpha + 1.0 / beta + 1.0 / (alpha * beta); }
};

struct PointingParams {
    double a0 = 0.0198;    // collected power fraction with no pointing error
    double gamma = 2.8071; // equivalent beam radius / jitter standard deviation

    void validate() const
    {
        if (!(a0 > 0.0) || a0 > 1.0)
            throw std::domain_error("A0 must lie in (0, 1]");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw std::domain_error("pointing gamma must be positive and finite");
    }

    double mean() const
    {
        const double g2 = gamma * gamma;
        return a0 * g2 / (g2 + 1.0);
    }

    double second_moment() const
    {
        const double g2 = gamma * gamma;
        return a0 * a0 * g2 / (g2 + 2.0);
    }
};

struct ChannelModel {
    std::optional<GammaGammaParams> turbulence;
    std::optional<PointingParams> pointing;
    bool normalize_mean = true;
    std::uint64_t coherence_length = 10000; // symbols per fading block

    void validate() const
    {
        if (turbulence)
            turbulence->validate();
        if (pointing)
            pointing->validate();
        if (coherence_length < 1)
            throw std::domain_error("coherence length must be at least one symbol");
    }

    // No fading factor at all: h == 1 for every block.
    bool is_static() const noexcept { return !turbulence && !pointing; }

    // E[h] before normalisation (Gamma-Gamma is unit-mean).
    double raw_mean() const { return pointing ? pointing->mean() : 1.0; }

    // Multiplier applied to raw draws.
    double gain_scale() const { return normalize_mean ? 1.0 / raw_mean() : 1.0; }

    double mean_gain() const { return raw_mean() * gain_scale(); }

    double second_moment() const
    {
        const double ha2 = turbulence ? 1.0 + turbulence->scintillation_index() : 1.0;
        const double hp2 = pointing ? pointing->second_moment() : 1.0;
        const double s = gain_scale();
        return ha2 * hp2 * s * s;
    }

    // E[h^2]/E[h]^2 - 1 of the composite gain.
    double scintillation_index() const
    {
        const double m = mean_gain();
        return second_moment() / (m * m) - 1.0;
    }
};

// Modified Bessel function of the second kind, real order.
inline double bessel_k(double nu, double x)
{
    if (!(x > 0.0))
        throw std::domain_error("bessel_k requires x > 0");
    return boost::math::cyl_bessel_k(std::abs(nu), x);
}

inline double pdf_gamma_gamma(const GammaGammaParams& p, double h)
{
    if (!(h > 0.0))
        throw std::domain_error("Gamma-Gamma pdf is defined for h > 0");
    const double ab = p.alpha * p.beta;
    const double half_sum = 0.5 * (p.alpha + p.beta);
    const double k = bessel_k(p.alpha - p.beta, 2.0 * std::sqrt(ab * h));
    if (k == 0.0)
        return 0.0;
    const double log_pdf = std::log(2.0) + half_sum * std::log(ab) - std::lgamma(p.alpha) -
                           std::lgamma(p.beta) + (half_sum - 1.0) * std::log(h) + std::log(k);
    return std::exp(log_pdf);
}

inline double pdf_pointing(const PointingParams& p, double h)
{
    if (!(h > 0.0))
        throw std::domain_error("pointing pdf is defined for h > 0");
    if (h >= p.a0)
        return 0.0;
    const double g2 = p.gamma * p.gamma;
    return g2 / p.a0 * std::pow(h / p.a0, g2 - 1.0);
}

namespace detail {

// Density of the un-normalised product h_a * h_p at x, integrated over the
// bounded pointing factor: int_0^A0 p_ha(x/p) p_hp(p) / p dp.
inline double pdf_product_raw(const GammaGammaParams& gg, const PointingParams& pe, double x)
{
    auto integrand = [&](double p) {
        if (!(p > 0.0))
            return 0.0;
        return pdf_gamma_gamma(gg, x / p) * pdf_pointing(pe, p) / p;
    };
    QuadratureOptions opts;
    opts.abs_tol = 1e-12;
    opts.rel_tol = 1e-10;
    return integrate(integrand, 0.0, pe.a0, opts, "composite pdf").value;
}

} // namespace detail

// Density of the (optionally normalised) composite gain.
inline double pdf_composite(const ChannelModel& model, double h)
{
    if (!(h > 0.0))
        throw std::domain_error("channel pdf is defined for h > 0");
    if (model.is_static())
        throw std::domain_error("static channel (h = 1) has no density");
    const double s = model.raw_mean() / model.mean_gain(); // 1/gain_scale
    const double x = s * h;                                 // raw-domain argument
    double raw = 0.0;
    if (model.turbulence && model.pointing)
        raw = detail::pdf_product_raw(*model.turbulence, *model.pointing, x);
    else if (model.turbulence)
        raw = pdf_gamma_gamma(*model.turbulence, x);
    else
        raw = pdf_pointing(*model.pointing, x);
    return s * raw;
}

// Upper end of the support (infinite unless only pointing error is present).
inline double support_upper(const ChannelModel& model)
{
    if (model.pointing && !model.turbulence)
        return model.pointing->a0 * model.gain_scale();
    return kInfinity;
}

// X * Y with X ~ Gamma(alpha, 1/alpha), Y ~ Gamma(beta, 1/beta).
template <class Urbg>
double sample_gamma_gamma(const GammaGammaParams& p, Urbg& rng)
{
    std::gamma_distribution<double> large(p.alpha, 1.0 / p.alpha);
    std::gamma_distribution<double> small(p.beta, 1.0 / p.beta);
    const double x = large(rng);
    return x * small(rng);
}

// Inverse-CDF map of a uniform u in (0, 1]: A0 * u^(1/gamma^2).
inline double pointing_from_uniform(const PointingParams& p, double u)
{
    return p.a0 * std::pow(u, 1.0 / (p.gamma * p.gamma));
}

inline double sample_pointing(const PointingParams& p, Philox4x32& rng)
{
    return pointing_from_uniform(p, rng.uniform_open0());
}

inline double sample_gain(const ChannelModel& model, Philox4x32& rng)
{
    if (model.is_static())
        return 1.0;
    double h = 1.0;
    if (model.turbulence)
        h *= sample_gamma_gamma(*model.turbulence, rng);
    if (model.pointing)
        h *= sample_pointing(*model.pointing, rng);
    return h * model.gain_scale();
}

// One independent gain per coherence block.
inline std::vector<double> sample_block_fading(const ChannelModel& model, std::size_t n_blocks,
                                               Philox4x32& rng)
{
    if (n_blocks < 1)
        throw usage_error("sample_block_fading needs at least one block");
    std::vector<double> out(n_blocks);
    for (auto& h : out)
        h = sample_gain(model, rng);
    return out;
}

// Kolmogorov-Smirnov distance between samples and the model CDF obtained by
// integrating the density. The CDF is integrated exactly at every stride-th
// order statistic and interpolated linearly in between.
inline double ks_statistic(const ChannelModel& model, std::vector<double> samples,
                           std::size_t max_nodes = 4000)
{
    if (samples.empty())
        throw usage_error("ks_statistic needs samples");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const std::size_t stride = std::max<std::size_t>(1, (n + max_nodes - 1) / max_nodes);

    auto pdf = [&](double h) { return h > 0.0 ? pdf_composite(model, h) : 0.0; };
    QuadratureOptions opts;
    opts.abs_tol = 1e-10;
    opts.rel_tol = 1e-9;

    std::vector<std::size_t> node_idx;
    for (std::size_t i = 0; i < n; i += stride)
        node_idx.push_back(i);
    if (node_idx.back() != n - 1)
        node_idx.push_back(n - 1);

    std::vector<double> node_cdf(node_idx.size());
    double cdf = integrate(pdf, 0.0, samples[node_idx[0]], opts, "ks cdf").value;
    node_cdf[0] = cdf;
    for (std::size_t j = 1; j < node_idx.size(); ++j) {
        const double a = samples[node_idx[j - 1]];
        const double b = samples[node_idx[j]];
        if (b > a)
            cdf += integrate(pdf, a, b, opts, "ks cdf").value;
        node_cdf[j] = cdf;
    }

    double d = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (j + 1 < node_idx.size() && node_idx[j + 1] <= i)
            ++j;
        double f = node_cdf[j];
        if (node_idx[j] != i && j + 1 < node_idx.size()) {
            const double a = samples[node_idx[j]];
            const double b = samples[node_idx[j + 1]];
            const double t = b > a ? (samples[i] - a) / (b - a) : 0.0;
            f = node_cdf[j] + t * (node_cdf[j + 1] - node_cdf[j]);
        }
        f = std::clamp(f, 0.0, 1.0);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, hi - f, f - lo});
    }
    return d;
}

// Asymptotic one-sample KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

} // namespace fsopam
