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

// Monte Carlo link engine: Gray-mapped random bits -> PAM levels ->
// r = 2d h m + n with n ~ N(0, N0/2), h constant over each coherence block,
// detected by one of the receivers and counted against the sent bits.
//
// Internally samples are expressed in units of the h = 1 distance 2d, so
// the amplitude is h and the noise standard deviation is sqrt(N0/2)/(2d).
//
// Work is split into a fixed number of independent streams. Each stream
// owns counter-based generators keyed by (seed, stream, purpose), so the
// result depends on the seed and the stream count but never on how many
// threads ran the streams. The channel, data/noise and pilot generators are
// separate and do not depend on the receiver or the power, so every row of
// a sweep sees the same fading, bits and (scaled) noise.

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fsopam/analytics.hpp"
#include "fsopam/channel.hpp"
#include "fsopam/constellation.hpp"
#include "fsopam/errors.hpp"
#include "fsopam/receivers.hpp"
#include "fsopam/rng.hpp"

namespace fsopam {

enum class ReceiverKind { pcsi, dfb, mlsd };

struct ReceiverSpec {
    ReceiverKind kind = ReceiverKind::pcsi;
    std::size_t memory = 0; // L_m for dfb, window length L for mlsd
    unsigned alpha_sel = 0; // dfb store threshold; 0 means M-1

    static ReceiverSpec pcsi() { return {}; }
    static ReceiverSpec dfb(std::size_t memory, unsigned alpha_sel = 0)
    {
        return {ReceiverKind::dfb, memory, alpha_sel};
    }
    static ReceiverSpec mlsd(std::size_t window) { return {ReceiverKind::mlsd, window, 0}; }

    std::string label() const
    {
        switch (kind) {
        case ReceiverKind::pcsi:
            return "pcsi";
        case ReceiverKind::dfb:
            return alpha_sel == 0 ? "dfb(" + std::to_string(memory) + ")"
                                  : "dfb(" + std::to_string(memory) + "," + std::to_string(alpha_sel) + ")";
        case ReceiverKind::mlsd:
            return "mlsd(" + std::to_string(memory) + ")";
        }
        return "?";
    }
};

// When the decision-feedback receiver receives its L_m pilots. With
// independent block fading a store carried over from the previous block can
// stall after a deep enough drop in h (no sample is sliced to the store
// level any more), so the default re-bootstraps at every block.
enum class PilotPolicy { every_block, stream_start };

struct StoppingRule {
    std::uint64_t min_errors = 100;
    std::uint64_t max_bits = 100'000'000;
};

struct SimConfig {
    unsigned order = 2;
    double data_rate = 10e9; // bit/s
    double responsivity = 1.0;
    double n0 = 1.59e-22; // one-sided noise PSD, A^2/Hz
    ChannelModel channel;
    ReceiverSpec receiver;
    PilotPolicy pilots = PilotPolicy::every_block;
    bool genie_feedback = false; // test mode: store the sent level, not the decision
    std::vector<double> power_dbm; // average receive power sweep
    StoppingRule stop;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    unsigned streams = 8;

    double symbol_duration() const { return bits_per_symbol(order) / data_rate; }

    // Transmit power giving the requested average receive power E[h] Pbar.
    Constellation constellation_for_rx_power(double rx_power_w) const
    {
        return Constellation::from_power(order, symbol_duration(), responsivity,
                                         rx_power_w / channel.mean_gain());
    }

    // Receive power at which A^2/N0 (with h = 1) equals the given value.
    double rx_power_for_snr(double a2_over_n0) const
    {
        const double two_d = std::sqrt(a2_over_n0 * n0);
        return power_from_min_distance(two_d, symbol_duration(), responsivity, order) *
               channel.mean_gain();
    }

    // Throws usage_error on an invalid configuration; returns advisories.
    std::vector<std::string> validate() const
    {
        try {
            bits_per_symbol(order);
            channel.validate();
        } catch (const std::domain_error& e) {
            throw usage_error(e.what());
        }
        if (!(data_rate > 0.0))
            throw usage_error("data rate must be positive");
        if (!(responsivity > 0.0))
            throw usage_error("responsivity must be positive");
        if (!(n0 >= 0.0) || !std::isfinite(n0))
            throw usage_error("N0 must be non-negative");
        if (streams < 1)
            throw usage_error("at least one simulation stream is required");
        if (stop.min_errors < 1)
            throw usage_error("min_errors must be at least 1");
        if (stop.max_bits < 1)
            throw usage_error("max_bits must be at least 1");
        for (std::size_t i = 1; i < power_dbm.size(); ++i)
            if (!(power_dbm[i] > power_dbm[i - 1]))
                throw usage_error("power sweep must be strictly increasing");
        std::vector<std::string> warnings;
        switch (receiver.kind) {
        case ReceiverKind::pcsi:
            break;
        case ReceiverKind::dfb: {
            DfbReceiver probe(order, receiver.memory, receiver.alpha_sel); // validates L_m, alpha
            const double window = sss_window_length(receiver.memory, order, probe.alpha());
            if (window >= channel.coherence_length / 10.0)
                warnings.push_back("selective-store window L_m*M/(M-alpha) = " + std::to_string(window) +
                                   " is not below L_c/10");
            break;
        }
        case ReceiverKind::mlsd: {
            if (receiver.memory < 1)
                throw usage_error("mlsd window must be at least 1");
            double count = 1.0;
            for (std::size_t i = 0; i < receiver.memory; ++i)
                count *= order;
            if (count > static_cast<double>(kMlsdBudget))
                throw usage_error("mlsd window too long: M^L exceeds 1e6");
            break;
        }
        }
        return warnings;
    }
};

struct BerEstimate {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    std::uint64_t data_symbols = 0;
    std::uint64_t pilot_symbols = 0;
    std::uint64_t blocks = 0;
    std::uint64_t estimation_failures = 0;
    double ber = 0.0;
    double ci95 = 0.0; // Wilson 95% half-width
    // Expected error count of a perfect-CSI receiver on the same realised
    // blocks, and the sum over blocks of (errors - that expectation)^2.
    double genie_errors = 0.0;
    double residual_sq = 0.0;

    double pilot_to_data_ratio() const
    {
        return data_symbols ? static_cast<double>(pilot_symbols) / data_symbols : 0.0;
    }

    bool operator==(const BerEstimate&) const = default;
};

// Control-variate estimate of the BER: the measured rate minus the
// perfect-CSI expectation of the realised blocks plus its exact average
// (the genie bound). Unbiased; removes the block-to-block fading variance.
inline double control_variate_ber(const BerEstimate& e, double genie_exact)
{
    if (e.bits == 0)
        return genie_exact;
    return (static_cast<double>(e.errors) - e.genie_errors) / e.bits + genie_exact;
}

// Standard error of control_variate_ber from the per-block residuals.
inline double control_variate_se(const BerEstimate& e)
{
    if (e.blocks < 2 || e.bits == 0)
        return 0.0;
    const double b = static_cast<double>(e.blocks);
    const double mean = (static_cast<double>(e.errors) - e.genie_errors) / b;
    const double var = std::max(0.0, e.residual_sq / b - mean * mean) * b / (b - 1.0);
    return std::sqrt(var * b) / e.bits;
}

inline double wilson_half_width(std::uint64_t errors, std::uint64_t trials, double z = 1.959963984540054)
{
    if (trials == 0)
        return 0.0;
    const double n = static_cast<double>(trials);
    const double p = errors / n;
    return z / (1.0 + z * z / n) * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    for (unsigned t = 0; t < count; ++t)
        pool.emplace_back(worker);
    pool.clear();
    if (failure)
        std::rethrow_exception(failure);
}

namespace detail {

enum StreamPurpose : std::uint64_t { kChannel = 1, kData = 2, kPilot = 3 };

struct BlockTally {
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
    std::uint64_t data_symbols = 0;
    std::uint64_t pilot_symbols = 0;
    std::uint64_t estimation_failures = 0;
    double genie_errors = 0.0;
    double residual_sq = 0.0;

    void add(const BlockTally& o)
    {
        genie_errors += o.genie_errors;
        residual_sq += o.residual_sq;
        errors += o.errors;
        bits += o.bits;
        data_symbols += o.data_symbols;
        pilot_symbols += o.pilot_symbols;
        estimation_failures += o.estimation_failures;
    }
};

// Per-symbol observer used by the estimator trace.
struct SymbolEvent {
    double amplitude;
    double estimate;
    unsigned sent;
    unsigned detected;
};

// One sequential symbol stream with its own receiver state.
class LinkStream {
public:
    LinkStream(const SimConfig& cfg, double noise_std, std::uint64_t index)
        : cfg_(cfg), gray_(cfg.order), noise_std_(noise_std),
          channel_rng_(cfg.seed, stream_id(index, kChannel)), data_rng_(cfg.seed, stream_id(index, kData)),
          pilot_rng_(cfg.seed, stream_id(index, kPilot))
    {
        if (cfg.receiver.kind == ReceiverKind::dfb)
            dfb_.emplace(cfg.order, cfg.receiver.memory, cfg.receiver.alpha_sel);
    }

    template <class Observer>
    BlockTally run_block(Observer&& observe)
    {
        BlockTally tally;
        const double h = sample_gain(cfg_.channel, channel_rng_);
        const unsigned top = cfg_.order - 1;
        const unsigned bits = gray_.bits_per_symbol();

        if (dfb_ && (!started_ || cfg_.pilots == PilotPolicy::every_block)) {
            pilots_.resize(dfb_->memory());
            for (auto& r : pilots_)
                r = h * top + noise_std_ * pilot_noise_(pilot_rng_);
            dfb_->bootstrap(pilots_);
            tally.pilot_symbols += pilots_.size();
        }
        if (cfg_.receiver.kind == ReceiverKind::mlsd) {
            anchor_r_.resize(cfg_.receiver.memory);
            anchor_m_.assign(cfg_.receiver.memory, top);
            for (auto& r : anchor_r_)
                r = h * top + noise_std_ * pilot_noise_(pilot_rng_);
            tally.pilot_symbols += anchor_r_.size();
        }
        started_ = true;

        const std::uint64_t len = cfg_.channel.coherence_length;
        const std::uint32_t mask = cfg_.order - 1;
        for (std::uint64_t t = 0; t < len; ++t) {
            const std::uint32_t sent_bits = data_rng_() & mask;
            const unsigned level = GrayMap::level_of_bits_unchecked(sent_bits);
            const double r = h * level + noise_std_ * noise_(data_rng_);

            switch (cfg_.receiver.kind) {
            case ReceiverKind::pcsi: {
                const unsigned det = slice_level(r, h, cfg_.order);
                tally.errors += std::popcount(sent_bits ^ gray_code(det));
                break;
            }
            case ReceiverKind::dfb: {
                Detection d{0, true};
                const double est = dfb_->estimate();
                if (dfb_->bootstrapped())
                    d = dfb_->try_detect(r);
                if (d.estimation_failure)
                    ++tally.estimation_failures;
                dfb_->update(r, cfg_.genie_feedback ? level : d.level);
                tally.errors += std::popcount(sent_bits ^ gray_code(d.level));
                observe(SymbolEvent{h, est, level, d.level});
                break;
            }
            case ReceiverKind::mlsd:
                window_r_.push_back(r);
                window_bits_.push_back(sent_bits);
                if (window_r_.size() == cfg_.receiver.memory || t + 1 == len)
                    tally.errors += flush_window();
                break;
            }
        }
        tally.data_symbols += len;
        tally.bits += len * bits;
        const double snr = noise_std_ > 0.0 ? h * h / (2.0 * noise_std_ * noise_std_) : kInfinity;
        tally.genie_errors = pam_bep({snr, cfg_.order}) * static_cast<double>(tally.bits);
        const double residual = static_cast<double>(tally.errors) - tally.genie_errors;
        tally.residual_sq = residual * residual;
        return tally;
    }

    BlockTally run_block()
    {
        return run_block([](const SymbolEvent&) {});
    }

private:
    static std::uint32_t gray_code(unsigned level) { return level ^ (level >> 1); }

    // Windows are searched jointly with the latest L non-zero decisions
    // (pilots at the start of a block) as a fixed prefix.
    std::uint64_t flush_window()
    {
        const auto decided = mlsd_search_anchored(anchor_r_, anchor_m_, window_r_, cfg_.order);
        std::uint64_t errors = 0;
        for (std::size_t i = 0; i < decided.size(); ++i) {
            errors += std::popcount(window_bits_[i] ^ gray_code(decided[i]));
            if (decided[i] > 0) {
                anchor_r_.erase(anchor_r_.begin());
                anchor_m_.erase(anchor_m_.begin());
                anchor_r_.push_back(window_r_[i]);
                anchor_m_.push_back(decided[i]);
            }
        }
        window_r_.clear();
        window_bits_.clear();
        return errors;
    }

    const SimConfig& cfg_;
    GrayMap gray_;
    double noise_std_;
    Philox4x32 channel_rng_;
    Philox4x32 data_rng_;
    Philox4x32 pilot_rng_;
    std::normal_distribution<double> noise_;
    std::normal_distribution<double> pilot_noise_;
    std::optional<DfbReceiver> dfb_;
    std::vector<double> pilots_;
    std::vector<double> window_r_;
    std::vector<std::uint32_t> window_bits_;
    std::vector<double> anchor_r_;
    std::vector<unsigned> anchor_m_;
    bool started_ = false;
};

inline double normalized_noise_std(const SimConfig& cfg, const Constellation& c)
{
    return std::sqrt(cfg.n0 / 2.0) / c.two_d();
}

} // namespace detail

// BER at one average receive power (W). Streams advance one coherence block
// per round; the stopping rule (min_errors reached or max_bits reached) is
// checked between rounds, so the bit count can overshoot max_bits by at most
// one round.
inline BerEstimate run_ber_point(const SimConfig& cfg, double rx_power_w)
{
    cfg.validate();
    if (!(rx_power_w > 0.0))
        throw usage_error("receive power must be positive");
    const Constellation c = cfg.constellation_for_rx_power(rx_power_w);
    const double sigma = detail::normalized_noise_std(cfg, c);

    std::vector<detail::LinkStream> streams;
    streams.reserve(cfg.streams);
    for (unsigned s = 0; s < cfg.streams; ++s)
        streams.emplace_back(cfg, sigma, s);

    detail::BlockTally total;
    std::uint64_t blocks = 0;
    std::vector<detail::BlockTally> round(cfg.streams);
    while (total.errors < cfg.stop.min_errors && total.bits < cfg.stop.max_bits) {
        parallel_for(streams.size(), cfg.threads, [&](std::size_t s) { round[s] = streams[s].run_block(); });
        for (const auto& t : round)
            total.add(t);
        blocks += streams.size();
    }

    BerEstimate out;
    out.errors = total.errors;
    out.bits = total.bits;
    out.data_symbols = total.data_symbols;
    out.pilot_symbols = total.pilot_symbols;
    out.blocks = blocks;
    out.estimation_failures = total.estimation_failures;
    out.genie_errors = total.genie_errors;
    out.residual_sq = total.residual_sq;
    out.ber = total.bits ? static_cast<double>(total.errors) / total.bits : 0.0;
    out.ci95 = wilson_half_width(total.errors, total.bits);
    return out;
}

struct SweepRow {
    double power_dbm = 0.0;
    BerEstimate estimate;
};

inline std::vector<SweepRow> run_sweep(const SimConfig& cfg)
{
    cfg.validate();
    if (cfg.power_dbm.empty())
        throw usage_error("power sweep is empty");
    std::vector<SweepRow> rows;
    rows.reserve(cfg.power_dbm.size());
    for (double p : cfg.power_dbm)
        rows.push_back({p, run_ber_point(cfg, dbm_to_watts(p))});
    return rows;
}

struct TraceSample {
    std::uint64_t k = 0;      // data symbol index, from 1
    double a_true = 0.0;      // 2d h, A s^(1/2)
    double a_hat = 0.0;       // estimate used to detect symbol k
    unsigned sent_level = 0;
    unsigned detected_level = 0;
    bool feedback_error = false; // decision fed back to the store was wrong
};

// Per-symbol amplitude estimates of the decision-feedback receiver on
// stream 0 (real decisions are fed back unless genie_feedback is set).
inline std::vector<TraceSample> run_estimator_trace(const SimConfig& cfg, double rx_power_w,
                                                    std::uint64_t n_symbols)
{
    cfg.validate();
    if (cfg.receiver.kind != ReceiverKind::dfb)
        throw usage_error("estimator trace needs a decision-feedback receiver");
    if (!(rx_power_w > 0.0))
        throw usage_error("receive power must be positive");
    const Constellation c = cfg.constellation_for_rx_power(rx_power_w);
    const double two_d = c.two_d();

    // Blocks keep the configured coherence length; symbols past n_symbols in
    // the last block are simulated but not logged.
    detail::LinkStream stream(cfg, detail::normalized_noise_std(cfg, c), 0);
    std::vector<TraceSample> out;
    out.reserve(n_symbols);
    std::uint64_t k = 0;
    while (k < n_symbols) {
        stream.run_block([&](const detail::SymbolEvent& e) {
            if (k >= n_symbols)
                return;
            ++k;
            out.push_back({k, e.amplitude * two_d, e.estimate * two_d, e.sent, e.detected,
                           !cfg.genie_feedback && e.sent != e.detected});
        });
    }
    return out;
}

} // namespace fsopam
