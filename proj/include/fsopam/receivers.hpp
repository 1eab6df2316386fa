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

// Detectors for r(k) = A m(k) + n(k), m(k) in {0..M-1}:
//  - perfect-CSI nearest-level slicing,
//  - the decision-feedback symbol-by-symbol receiver, which slices with an
//    amplitude estimate built from past decisions kept by a selective store,
//  - exhaustive GLRT sequence detection over a short window (reference only).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsopam/constellation.hpp"
#include "fsopam/errors.hpp"

namespace fsopam {

// Smallest usable amplitude estimate, in units of the h = 1 distance 2d.
inline constexpr double kEstimateFloor = 1e-12;

// Largest hypothesis count mlsd_search will enumerate.
inline constexpr std::uint64_t kMlsdBudget = 1'000'000;

// 0 below zero, M-1 above (M-1)a, floor(r/a + 1/2) in between.
inline unsigned slice_level(double r, double a, unsigned order) noexcept
{
    const unsigned top = order - 1;
    if (r < 0.0)
        return 0;
    if (r > top * a)
        return top;
    const double q = std::floor(r / a + 0.5);
    return q >= top ? top : static_cast<unsigned>(q);
}

inline unsigned pcsi_detect(double r, double amplitude, unsigned order)
{
    bits_per_symbol(order);
    if (!(amplitude > 0.0))
        throw std::domain_error("perfect-CSI detection needs a positive amplitude");
    return slice_level(r, amplitude, order);
}

// (r . m)^2 / |m|^2
inline double glrt_metric(std::span<const double> r, std::span<const unsigned> m)
{
    if (r.size() != m.size() || r.empty())
        throw usage_error("glrt_metric: window and hypothesis must have equal, non-zero length");
    double dot = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        dot += r[i] * m[i];
        norm += static_cast<double>(m[i]) * m[i];
    }
    if (norm == 0.0)
        throw usage_error("glrt_metric: the all-zero hypothesis is not scored");
    return dot * dot / norm;
}

// Least-squares amplitude for a hypothesised level sequence: (r . m) / |m|^2.
inline double glrt_amplitude_estimate(std::span<const double> r, std::span<const unsigned> m)
{
    if (r.size() != m.size() || r.empty())
        throw usage_error("glrt_amplitude_estimate: window and hypothesis lengths differ");
    double dot = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        dot += r[i] * m[i];
        norm += static_cast<double>(m[i]) * m[i];
    }
    if (norm == 0.0)
        throw estimation_failure("amplitude estimate undefined for an all-zero level sequence");
    return dot / norm;
}

// Exhaustive maximisation of the GLRT metric of [m_prefix, m] over every
// window hypothesis m, with the prefix (earlier decisions or pilots) held
// fixed. Hypotheses are visited in lexicographic order and a later one
// replaces the incumbent only if it is larger beyond a relative 1e-12, so
// ties (e.g. [1,2] vs [2,4]) go to the smallest sequence. Hypotheses whose
// whole sequence is zero are skipped.
inline std::vector<unsigned> mlsd_search_anchored(std::span<const double> r_prefix,
                                                  std::span<const unsigned> m_prefix,
                                                  std::span<const double> r, unsigned order)
{
    bits_per_symbol(order);
    if (r_prefix.size() != m_prefix.size())
        throw usage_error("mlsd_search: prefix samples and levels differ in length");
    const std::size_t len = r.size();
    if (len == 0)
        throw usage_error("mlsd_search: empty window");
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < len; ++i) {
        count *= order;
        if (count > kMlsdBudget)
            throw usage_error("mlsd_search: M^L exceeds the enumeration budget of 1e6");
    }
    double dot0 = 0.0;
    double norm0 = 0.0;
    for (std::size_t i = 0; i < r_prefix.size(); ++i) {
        if (m_prefix[i] >= order)
            throw usage_error("mlsd_search: prefix level outside constellation");
        dot0 += r_prefix[i] * m_prefix[i];
        norm0 += static_cast<double>(m_prefix[i]) * m_prefix[i];
    }

    std::vector<unsigned> hyp(len, 0);
    std::vector<unsigned> best;
    double best_metric = -1.0;
    auto advance = [&] {
        for (std::size_t i = len; i-- > 0;) {
            if (++hyp[i] < order)
                return true;
            hyp[i] = 0;
        }
        return false;
    };
    do {
        double dot = dot0;
        double norm = norm0;
        for (std::size_t i = 0; i < len; ++i) {
            dot += r[i] * hyp[i];
            norm += static_cast<double>(hyp[i]) * hyp[i];
        }
        if (norm == 0.0)
            continue;
        const double metric = dot * dot / norm;
        if (best.empty() || metric > best_metric + 1e-12 * std::abs(best_metric)) {
            best_metric = metric;
            best = hyp;
        }
    } while (advance());
    return best;
}

// Unanchored search: the all-zero window is never a candidate.
inline std::vector<unsigned> mlsd_search(std::span<const double> r, unsigned order)
{
    return mlsd_search_anchored({}, {}, r, order);
}

// Observation window the generalised selective store spans on average,
// L_m M / (M - alpha). Should stay well below the coherence length.
inline double sss_window_length(std::size_t memory, unsigned order, unsigned alpha_sel)
{
    return static_cast<double>(memory) * order / (order - static_cast<double>(alpha_sel));
}

struct Detection {
    unsigned level = 0;
    bool estimation_failure = false;
};

// Decision-feedback receiver with a selective store of the L_m most recent
// samples detected at level >= alpha. With alpha = M-1 only the samples are
// kept and A_hat = sum(r) / (L_m (M-1)); otherwise the detected levels are
// kept too and A_hat = sum(r m) / sum(m^2) over the store.
class DfbReceiver {
public:
    DfbReceiver(unsigned order, std::size_t memory, unsigned alpha_sel = 0)
        : order_(order), memory_(memory), alpha_(alpha_sel == 0 ? order - 1 : alpha_sel)
    {
        bits_per_symbol(order);
        if (memory_ < 1)
            throw usage_error("selective-store memory L_m must be at least 1");
        if (alpha_ < 1 || alpha_ > order_ - 1)
            throw usage_error("store threshold alpha must lie in {1..M-1}");
        samples_.resize(memory_);
        levels_.resize(memory_);
    }

    unsigned order() const noexcept { return order_; }
    std::size_t memory() const noexcept { return memory_; }
    unsigned alpha() const noexcept { return alpha_; }
    std::size_t stored() const noexcept { return count_; }
    double estimate() const noexcept { return estimate_; }
    bool bootstrapped() const noexcept { return bootstrapped_; }

    // i-th stored entry, oldest first.
    double stored_sample(std::size_t i) const { return samples_.at(slot(i)); }
    unsigned stored_level(std::size_t i) const { return levels_.at(slot(i)); }

    void reset()
    {
        head_ = 0;
        count_ = 0;
        estimate_ = 0.0;
        bootstrapped_ = false;
    }

    // Fill the store from exactly L_m pilots, all sent at level M-1.
    void bootstrap(std::span<const double> pilots)
    {
        if (pilots.size() != memory_)
            throw usage_error("bootstrap needs exactly L_m = " + std::to_string(memory_) +
                              " pilot samples, got " + std::to_string(pilots.size()));
        reset();
        for (double r : pilots)
            push(r, order_ - 1);
        recompute();
        bootstrapped_ = estimate_ >= kEstimateFloor;
    }

    // Slice with the current estimate. A collapsed estimate yields level 0
    // and a failure flag instead of dividing by it.
    Detection try_detect(double r) const
    {
        if (!bootstrapped_)
            throw usage_error("decision-feedback receiver used before a successful bootstrap");
        if (!(estimate_ >= kEstimateFloor))
            return {0, true};
        return {slice_level(r, estimate_, order_), false};
    }

    unsigned detect(double r) const { return try_detect(r).level; }

    // Selective store: keep (r, level) only when level >= alpha.
    void update(double r, unsigned detected_level)
    {
        if (detected_level >= order_)
            throw usage_error("detected level outside constellation");
        if (detected_level < alpha_)
            return;
        push(r, detected_level);
        recompute();
    }

private:
    std::size_t slot(std::size_t i) const
    {
        if (i >= count_)
            throw std::out_of_range("selective store index");
        return (head_ + memory_ - count_ + i) % memory_;
    }

    void push(double r, unsigned level)
    {
        samples_[head_] = r;
        levels_[head_] = level;
        head_ = (head_ + 1) % memory_;
        if (count_ < memory_)
            ++count_;
    }

    void recompute()
    {
        double num = 0.0;
        double den = 0.0;
        if (alpha_ == order_ - 1) {
            for (std::size_t i = 0; i < count_; ++i)
                num += samples_[slot(i)];
            den = static_cast<double>(count_) * (order_ - 1);
        } else {
            for (std::size_t i = 0; i < count_; ++i) {
                const std::size_t s = slot(i);
                num += samples_[s] * levels_[s];
                den += static_cast<double>(levels_[s]) * levels_[s];
            }
        }
        estimate_ = den > 0.0 ? num / den : 0.0;
    }

    unsigned order_;
    std::size_t memory_;
    unsigned alpha_;
    std::vector<double> samples_;
    std::vector<unsigned> levels_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    double estimate_ = 0.0;
    bool bootstrapped_ = false;
};

} // namespace fsopam
