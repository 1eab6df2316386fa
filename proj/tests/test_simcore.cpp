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
#include <numeric>

#include "fsopam/simcore.hpp"

using namespace fsopam;

namespace {

SimConfig static_config(unsigned order, ReceiverSpec rx)
{
    SimConfig cfg;
    cfg.order = order;
    cfg.receiver = rx;
    cfg.channel = ChannelModel{};
    return cfg;
}

SimConfig weak_config(ReceiverSpec rx)
{
    SimConfig cfg;
    cfg.receiver = rx;
    cfg.channel.turbulence = GammaGammaParams::weak();
    cfg.channel.pointing = PointingParams{};
    return cfg;
}

double trace_sd(const std::vector<TraceSample>& tr, std::size_t skip)
{
    double s1 = 0, s2 = 0;
    std::size_t n = 0;
    for (std::size_t i = skip; i < tr.size(); ++i) {
        const double e = tr[i].a_hat / tr[i].a_true - 1.0;
        s1 += e;
        s2 += e * e;
        ++n;
    }
    return std::sqrt(s2 / n - (s1 / n) * (s1 / n));
}

} // namespace

TEST(ReceiverSpec, Labels)
{
    EXPECT_EQ(ReceiverSpec::pcsi().label(), "pcsi");
    EXPECT_EQ(ReceiverSpec::dfb(12).label(), "dfb(12)");
    EXPECT_EQ(ReceiverSpec::dfb(12, 2).label(), "dfb(12,2)");
    EXPECT_EQ(ReceiverSpec::mlsd(4).label(), "mlsd(4)");
}

TEST(SimConfig, Validation)
{
    auto cfg = static_config(2, ReceiverSpec::dfb(12));
    EXPECT_TRUE(cfg.validate().empty());
    cfg.order = 6;
    EXPECT_THROW(cfg.validate(), usage_error);
    cfg.order = 2;
    cfg.receiver = ReceiverSpec::dfb(0);
    EXPECT_THROW(cfg.validate(), usage_error);
    cfg.receiver = ReceiverSpec::mlsd(21);
    EXPECT_THROW(cfg.validate(), usage_error);
    cfg.receiver = ReceiverSpec::pcsi();
    cfg.power_dbm = {-20, -22};
    EXPECT_THROW(cfg.validate(), usage_error);
}

TEST(SimConfig, SelectiveStoreWindowWarning)
{
    auto cfg = static_config(4, ReceiverSpec::dfb(300));
    cfg.channel.coherence_length = 10000;
    EXPECT_EQ(cfg.validate().size(), 1u);
    cfg.receiver = ReceiverSpec::dfb(200);
    EXPECT_TRUE(cfg.validate().empty());
}

TEST(SimConfig, PowerSnrRoundTrip)
{
    auto cfg = weak_config(ReceiverSpec::pcsi());
    const double p = cfg.rx_power_for_snr(1234.0);
    const auto c = cfg.constellation_for_rx_power(p);
    EXPECT_NEAR(c.two_d() * c.two_d() / cfg.n0, 1234.0, 1e-9);
    EXPECT_NEAR(c.avg_power() * cfg.channel.mean_gain(), p, 1e-20);
}

TEST(RunBerPoint, PcsiMatchesAnalyticAtFixedGain)
{
    auto cfg = static_config(2, ReceiverSpec::pcsi());
    cfg.stop = {1000, 100'000'000};
    const double snr = snr_for_pam_bep(1e-3, 2);
    const auto e = run_ber_point(cfg, cfg.rx_power_for_snr(snr));
    const double sd = std::sqrt(1e-3 * (1 - 1e-3) / e.bits);
    EXPECT_NEAR(e.ber, 1e-3, 3 * sd);
    EXPECT_GE(e.errors, 1000u);
}

TEST(RunBerPoint, NoiselessIsErrorFree)
{
    for (auto rx : {ReceiverSpec::pcsi(), ReceiverSpec::dfb(12), ReceiverSpec::dfb(12, 1), ReceiverSpec::mlsd(4)})
        for (unsigned order : {2u, 4u, 8u}) {
            auto cfg = weak_config(rx);
            cfg.order = order;
            cfg.n0 = 0.0;
            cfg.stop = {1, 400'000};
            const auto e = run_ber_point(cfg, 1e-6);
            EXPECT_EQ(e.errors, 0u) << rx.label() << " M=" << order;
            EXPECT_GE(e.bits, 400'000u);
        }
}

TEST(RunBerPoint, Deterministic)
{
    auto cfg = weak_config(ReceiverSpec::dfb(12));
    cfg.stop = {200, 2'000'000};
    const double p = dbm_to_watts(-23);
    EXPECT_EQ(run_ber_point(cfg, p), run_ber_point(cfg, p));
}

TEST(RunBerPoint, ThreadCountInvariant)
{
    for (auto rx : {ReceiverSpec::pcsi(), ReceiverSpec::dfb(12), ReceiverSpec::mlsd(3)}) {
        auto cfg = weak_config(rx);
        cfg.order = 4;
        cfg.stop = {300, 3'000'000};
        const double p = dbm_to_watts(-20);
        const auto one = run_ber_point(cfg, p);
        cfg.threads = 3;
        EXPECT_EQ(run_ber_point(cfg, p), one) << rx.label();
        cfg.threads = 8;
        EXPECT_EQ(run_ber_point(cfg, p), one) << rx.label();
    }
}

TEST(RunBerPoint, PilotAccounting)
{
    auto cfg = weak_config(ReceiverSpec::dfb(12));
    cfg.stop = {1, 1};
    auto e = run_ber_point(cfg, dbm_to_watts(-20));
    EXPECT_EQ(e.blocks, cfg.streams);
    EXPECT_EQ(e.pilot_symbols, 12u * cfg.streams);
    EXPECT_LT(e.pilot_to_data_ratio(), 0.01);

    cfg.pilots = PilotPolicy::stream_start;
    cfg.stop = {1'000'000, 4 * cfg.streams * cfg.channel.coherence_length};
    e = run_ber_point(cfg, dbm_to_watts(-20));
    EXPECT_EQ(e.blocks, 4u * cfg.streams);
    EXPECT_EQ(e.pilot_symbols, 12u * cfg.streams);
}

TEST(RunBerPoint, StoppingRule)
{
    auto cfg = weak_config(ReceiverSpec::pcsi());
    cfg.stop = {50, 1'000'000'000};
    const auto e = run_ber_point(cfg, dbm_to_watts(-24));
    EXPECT_GE(e.errors, 50u);
    const std::uint64_t round = cfg.streams * cfg.channel.coherence_length;
    cfg.stop = {1'000'000'000, 3 * round - 5};
    EXPECT_EQ(run_ber_point(cfg, dbm_to_watts(-24)).bits, 3 * round);
}

TEST(RunBerPoint, GenieFeedbackApproachesPcsi)
{
    auto cfg = static_config(4, ReceiverSpec::dfb(200));
    cfg.genie_feedback = true;
    cfg.stop = {2000, 100'000'000};
    const double p = cfg.rx_power_for_snr(snr_for_pam_bep(3e-3, 4));
    const auto dfb = run_ber_point(cfg, p);
    cfg.receiver = ReceiverSpec::pcsi();
    const auto pcsi = run_ber_point(cfg, p);
    const double sd = std::sqrt(pcsi.ber / pcsi.bits + dfb.ber / dfb.bits);
    EXPECT_NEAR(dfb.ber, pcsi.ber, 3 * sd + 0.02 * pcsi.ber);
}

// PCSI attains the genie bound, so its control-variate BER must reproduce
// the quadrature value. Decision feedback cannot do better than the bound.
TEST(RunBerPoint, ControlVariateConsistent)
{
    auto cfg = weak_config(ReceiverSpec::pcsi());
    cfg.stop = {20'000, 1'000'000'000};
    const double p = dbm_to_watts(-25);
    const auto c = cfg.constellation_for_rx_power(p);
    const double genie = genie_bound({c.two_d() * c.two_d() / cfg.n0, 2}, cfg.channel);

    const auto pcsi = run_ber_point(cfg, p);
    EXPECT_NEAR(control_variate_ber(pcsi, genie), genie, 3 * control_variate_se(pcsi));
    EXPECT_LT(control_variate_se(pcsi), 0.01 * genie);

    cfg.receiver = ReceiverSpec::dfb(12);
    const auto dfb = run_ber_point(cfg, p);
    EXPECT_GT(control_variate_ber(dfb, genie), genie - 3 * control_variate_se(dfb));
}

TEST(RunSweep, MonotoneRows)
{
    auto cfg = weak_config(ReceiverSpec::pcsi());
    cfg.power_dbm = {-25, -22};
    cfg.stop = {300, 50'000'000};
    const auto rows = run_sweep(cfg);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_GT(rows[0].estimate.ber, rows[1].estimate.ber);
}

TEST(Wilson, KnownValues)
{
    EXPECT_NEAR(wilson_half_width(10, 100), 0.05957, 5e-5);
    EXPECT_GT(wilson_half_width(0, 1000), 0.0);
}

TEST(EstimatorTrace, NoiselessIsExact)
{
    auto cfg = weak_config(ReceiverSpec::dfb(8));
    cfg.order = 4;
    cfg.n0 = 0.0;
    cfg.channel.coherence_length = 500;
    const auto tr = run_estimator_trace(cfg, 1e-6, 3000);
    ASSERT_EQ(tr.size(), 3000u);
    for (const auto& s : tr) {
        ASSERT_NEAR(s.a_hat, s.a_true, 1e-12 * s.a_true);
        ASSERT_EQ(s.sent_level, s.detected_level);
    }
}

TEST(EstimatorTrace, SpreadFollowsMemory)
{
    auto cfg = static_config(2, ReceiverSpec::dfb(1));
    cfg.n0 = 1e-22;
    const double p = cfg.rx_power_for_snr(100.0);
    const auto t1 = run_estimator_trace(cfg, p, 20'000);
    cfg.receiver = ReceiverSpec::dfb(8);
    const auto t8 = run_estimator_trace(cfg, p, 20'000);
    EXPECT_NEAR(trace_sd(t1, 10) / trace_sd(t8, 10), std::sqrt(8.0), 0.2 * std::sqrt(8.0));

    double mean = 0;
    for (const auto& s : t8)
        mean += s.a_hat / s.a_true;
    EXPECT_NEAR(mean / t8.size(), 1.0, 0.01);
}

TEST(EstimatorTrace, RequiresDfb)
{
    auto cfg = static_config(2, ReceiverSpec::pcsi());
    EXPECT_THROW(run_estimator_trace(cfg, 1e-6, 10), usage_error);
}

TEST(ParallelFor, PropagatesException)
{
    EXPECT_THROW(parallel_for(16, 4,
                              [](std::size_t i) {
                                  if (i == 7)
                                      throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

// With the store carried across blocks a deep enough drop in h leaves no
// sample sliced to the store level, and the estimate freezes.
TEST(PilotPolicy, CarriedStoreStallsAfterFade)
{
    DfbReceiver rx(4, 12);
    rx.bootstrap(std::vector<double>(12, 3.0));
    for (int k = 0; k < 1000; ++k) {
        const unsigned det = rx.detect(0.4 * (k % 4));
        rx.update(0.4 * (k % 4), det);
    }
    EXPECT_DOUBLE_EQ(rx.estimate(), 1.0);
}
