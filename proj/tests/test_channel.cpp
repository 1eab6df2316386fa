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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fsopam/channel.hpp"
#include "fsopam/quadrature.hpp"

using namespace fsopam;

namespace {

struct Moments {
    double mean;
    double si;
};

template <class Draw>
Moments sample_moments(std::size_t n, Draw&& draw)
{
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double h = draw();
        s1 += h;
        s2 += h * h;
    }
    const double mean = s1 / n;
    return {mean, (s2 / n) / (mean * mean) - 1.0};
}

// Product of two unit-mean Gamma densities, integrated directly (no Bessel).
double gamma_gamma_by_mixture(const GammaGammaParams& p, double h)
{
    auto gamma_pdf = [](double shape, double x) {
        return std::exp(shape * std::log(shape) + (shape - 1) * std::log(x) - shape * x - std::lgamma(shape));
    };
    auto f = [&](double x) { return x > 0 ? gamma_pdf(p.alpha, x) * gamma_pdf(p.beta, h / x) / x : 0.0; };
    QuadratureOptions q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-11;
    return integrate(f, 0.0, kInfinity, q, "mixture").value;
}

ChannelModel full_model(GammaGammaParams gg)
{
    ChannelModel m;
    m.turbulence = gg;
    m.pointing = PointingParams{};
    return m;
}

} // namespace

TEST(GammaGammaParams, ScintillationIndex)
{
    EXPECT_NEAR(GammaGammaParams::weak().scintillation_index(), 0.1244, 5e-5);
    EXPECT_NEAR(GammaGammaParams::strong().scintillation_index(), 1.3890, 5e-5);
}

TEST(GammaGammaSampler, WeakMoments)
{
    Philox4x32 rng(11, 0);
    const auto m = sample_moments(1'000'000, [&] { return sample_gamma_gamma(GammaGammaParams::weak(), rng); });
    EXPECT_NEAR(m.mean, 1.0, 0.01);
    EXPECT_NEAR(m.si, 0.1244, 0.005);
}

TEST(GammaGammaSampler, StrongMoments)
{
    Philox4x32 rng(12, 0);
    const auto m = sample_moments(1'000'000, [&] { return sample_gamma_gamma(GammaGammaParams::strong(), rng); });
    EXPECT_NEAR(m.si, 1.3890, 0.05);
}

TEST(GammaGammaSampler, NoFadingLimit)
{
    Philox4x32 rng(13, 0);
    const auto m = sample_moments(10'000, [&] { return sample_gamma_gamma({1e6, 1e6}, rng); });
    EXPECT_NEAR(m.mean, 1.0, 1e-3);
    EXPECT_LT(m.si, 1e-4);
}

TEST(PointingSampler, SupportAndMean)
{
    const PointingParams p{};
    Philox4x32 rng(14, 0);
    double sum = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const double h = sample_pointing(p, rng);
        ASSERT_GT(h, 0.0);
        ASSERT_LE(h, 0.0198);
        sum += h;
    }
    EXPECT_NEAR(sum / n, 0.01757, 0.01 * 0.01757);
    EXPECT_NEAR(p.mean(), 0.0198 * 2.8071 * 2.8071 / (2.8071 * 2.8071 + 1), 1e-15);
}

TEST(PointingSampler, InverseCdfEndpoint)
{
    EXPECT_DOUBLE_EQ(pointing_from_uniform(PointingParams{}, 1.0), 0.0198);
}

TEST(Bessel, ClosedFormAndReference)
{
    EXPECT_NEAR(bessel_k(0.5, 1.0), std::sqrt(std::numbers::pi / 2) * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(bessel_k(1.0, 1.0), 0.6019072301972346, 1e-15);
    EXPECT_THROW(bessel_k(1.0, 0.0), std::domain_error);
    EXPECT_THROW(bessel_k(1.0, -2.0), std::domain_error);
}

TEST(Bessel, Symmetric)
{
    for (double nu : {0.3, 1.0, 2.5, 13.7})
        for (double x : {1e-3, 0.5, 7.0})
            EXPECT_EQ(bessel_k(nu, x), bessel_k(-nu, x));
}

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
TEST(Bessel, IntegralRepresentation)
{
    for (double nu : {0.0, 0.69, 2.5, 7.3, 20.0})
        for (double x : {0.05, 1.0, 10.0, 60.0}) {
            auto f = [&](double t) {
                const double y = std::abs(nu * t); // log cosh y, overflow free
                return std::exp(-x * std::cosh(t) + y + std::log1p(std::exp(-2 * y)) - std::log(2.0));
            };
            QuadratureOptions q;
            q.abs_tol = 0.0;
            q.rel_tol = 1e-12;
            const double ref = integrate(f, 0.0, kInfinity, q, "K integral").value;
            EXPECT_NEAR(bessel_k(nu, x) / ref, 1.0, 1e-10) << "nu=" << nu << " x=" << x;
        }
}

TEST(Bessel, MatchesStandardLibraryOverRange)
{
    for (double nu = -50; nu <= 50; nu += 3.7)
        for (double lx = -6; lx <= 2; lx += 0.5) {
            const double x = std::pow(10.0, lx);
            const double ref = std::cyl_bessel_k(std::abs(nu), x);
            if (!std::isfinite(ref))
                continue;
            EXPECT_NEAR(bessel_k(nu, x) / ref, 1.0, 1e-10) << "nu=" << nu << " x=" << x;
        }
}

TEST(GammaGammaPdf, MatchesGammaMixture)
{
    for (auto p : {GammaGammaParams::weak(), GammaGammaParams::strong(), GammaGammaParams{4.0, 1.9}})
        for (double h : {0.05, 0.4, 1.0, 2.2, 5.0})
            EXPECT_NEAR(pdf_gamma_gamma(p, h) / gamma_gamma_by_mixture(p, h), 1.0, 1e-8)
                << p.alpha << "," << p.beta << " h=" << h;
}

TEST(GammaGammaPdf, Moments)
{
    QuadratureOptions q;
    q.abs_tol = 1e-12;
    q.rel_tol = 1e-11;
    for (auto p : {GammaGammaParams::weak(), GammaGammaParams::strong()}) {
        auto pdf = [&](double h) { return h > 0 ? pdf_gamma_gamma(p, h) : 0.0; };
        EXPECT_NEAR(integrate(pdf, 0.0, kInfinity, q).value, 1.0, 1e-6);
        EXPECT_NEAR(integrate([&](double h) { return h * pdf(h); }, 0.0, kInfinity, q).value, 1.0, 1e-6);
        EXPECT_NEAR(integrate([&](double h) { return h * h * pdf(h); }, 0.0, kInfinity, q).value,
                    1.0 + p.scintillation_index(), 1e-4);
    }
}

TEST(GammaGammaPdf, RejectsNonPositive)
{
    EXPECT_THROW(pdf_gamma_gamma(GammaGammaParams::weak(), 0.0), std::domain_error);
    EXPECT_THROW(pdf_gamma_gamma(GammaGammaParams::weak(), -1.0), std::domain_error);
}

TEST(CompositePdf, TurbulenceOnlyReduces)
{
    ChannelModel m;
    m.turbulence = GammaGammaParams::strong();
    for (double h : {0.1, 0.9, 3.0})
        EXPECT_DOUBLE_EQ(pdf_composite(m, h), pdf_gamma_gamma(*m.turbulence, h));
}

TEST(CompositePdf, NormalizedMoments)
{
    QuadratureOptions q;
    q.abs_tol = 1e-10;
    q.rel_tol = 1e-10;
    for (auto gg : {GammaGammaParams::weak(), GammaGammaParams::strong()}) {
        const auto m = full_model(gg);
        auto pdf = [&](double h) { return h > 0 ? pdf_composite(m, h) : 0.0; };
        EXPECT_NEAR(integrate(pdf, 0.0, kInfinity, q).value, 1.0, 1e-5);
        EXPECT_NEAR(integrate([&](double h) { return h * pdf(h); }, 0.0, kInfinity, q).value, 1.0, 1e-4);
        EXPECT_NEAR(integrate([&](double h) { return h * h * pdf(h); }, 0.0, kInfinity, q).value,
                    m.second_moment(), 1e-4);
    }
}

// Same density by integrating over the turbulence factor instead.
TEST(CompositePdf, AlternateFactorisation)
{
    const auto m = full_model(GammaGammaParams::weak());
    const PointingParams& pe = *m.pointing;
    const double scale = m.gain_scale();
    for (double h : {0.3, 0.8, 1.0, 1.6}) {
        const double x = h / scale;
        auto f = [&](double a) {
            const double p = x / a;
            return p < pe.a0 ? pdf_gamma_gamma(*m.turbulence, a) * pdf_pointing(pe, p) / a : 0.0;
        };
        QuadratureOptions q;
        q.abs_tol = 1e-12;
        q.rel_tol = 1e-9;
        const double ref = integrate(f, x / pe.a0, kInfinity, q).value / scale;
        EXPECT_NEAR(pdf_composite(m, h) / ref, 1.0, 1e-7) << "h=" << h;
    }
}

TEST(CompositePdf, StaticChannelRejected)
{
    EXPECT_THROW(pdf_composite(ChannelModel{}, 1.0), std::domain_error);
}

TEST(PointingPdf, SupportAndMean)
{
    const PointingParams p{};
    EXPECT_EQ(pdf_pointing(p, 0.0198), 0.0);
    EXPECT_EQ(pdf_pointing(p, 0.03), 0.0);
    QuadratureOptions q;
    auto pdf = [&](double h) { return h > 0 ? pdf_pointing(p, h) : 0.0; };
    EXPECT_NEAR(integrate(pdf, 0.0, p.a0, q).value, 1.0, 1e-9);
    EXPECT_NEAR(integrate([&](double h) { return h * pdf(h); }, 0.0, p.a0, q).value, p.mean(), 1e-9);
}

TEST(BlockFading, Examples)
{
    const auto m = full_model(GammaGammaParams::strong());
    Philox4x32 rng(21, 0);
    const auto one = sample_block_fading(m, 1, rng);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_GT(one[0], 0.0);
    EXPECT_THROW(sample_block_fading(m, 0, rng), usage_error);

    Philox4x32 a(22, 3), b(22, 3);
    const auto x = sample_block_fading(m, 100'000, a);
    EXPECT_EQ(x, sample_block_fading(m, 100'000, b));
    double sum = 0.0;
    for (double h : x)
        sum += h;
    EXPECT_NEAR(sum / x.size(), 1.0, 0.01);
}

TEST(BlockFading, PointingOnlyUnnormalizedSupport)
{
    ChannelModel m;
    m.pointing = PointingParams{};
    m.normalize_mean = false;
    Philox4x32 rng(23, 0);
    for (double h : sample_block_fading(m, 100'000, rng))
        ASSERT_LE(h, 0.0198);
}

TEST(KolmogorovSmirnov, SamplerMatchesDensity)
{
    for (auto gg : {GammaGammaParams::weak(), GammaGammaParams::strong()}) {
        const auto m = full_model(gg);
        Philox4x32 rng(31, 0);
        const auto x = sample_block_fading(m, 20'000, rng);
        EXPECT_LT(ks_statistic(m, x), ks_critical_1pct(x.size()));
    }
}

TEST(KolmogorovSmirnov, DetectsWrongModel)
{
    Philox4x32 rng(32, 0);
    const auto x = sample_block_fading(full_model(GammaGammaParams::strong()), 20'000, rng);
    EXPECT_GT(ks_statistic(full_model(GammaGammaParams::weak()), x), ks_critical_1pct(x.size()));
}

TEST(ChannelModel, Validation)
{
    ChannelModel m;
    m.turbulence = GammaGammaParams{-1.0, 2.0};
    EXPECT_THROW(m.validate(), std::domain_error);
    m.turbulence = GammaGammaParams::weak();
    m.pointing = PointingParams{1.5, 2.0};
    EXPECT_THROW(m.validate(), std::domain_error);
    m.pointing = PointingParams{};
    m.coherence_length = 0;
    EXPECT_THROW(m.validate(), std::domain_error);
}
