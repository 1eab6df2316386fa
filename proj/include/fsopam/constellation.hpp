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

// M-PAM signal model for an IM/DD link: levels {0..M-1}, binary-reflected
// Gray labels, and the conversions between average optical power, symbol
// duration and the receiver-side minimum signal distance 2d.
//
// Units: power W, time s, responsivity A/W, 2d in A*s^(1/2). Units are not
// checked at runtime.

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsopam/errors.hpp"

namespace fsopam {

inline constexpr unsigned kMinOrder = 2;
inline constexpr unsigned kMaxOrder = 32;

// log2(M); throws std::domain_error unless M is a power of two in [2, 32].
inline unsigned bits_per_symbol(unsigned order)
{
    if (order < kMinOrder || order > kMaxOrder || !std::has_single_bit(order))
        throw std::domain_error("modulation order must be a power of two in [2, 32], got " +
                                std::to_string(order));
    return static_cast<unsigned>(std::countr_zero(order));
}

namespace detail {
inline void require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error(std::string(name) + " must be positive and finite");
}
} // namespace detail

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

// 2d = 2 sqrt(Ts) R Pbar / (M-1)
inline double min_distance_from_power(double avg_power, double symbol_duration, double responsivity,
                                      unsigned order)
{
    bits_per_symbol(order);
    detail::require_positive(avg_power, "average power");
    detail::require_positive(symbol_duration, "symbol duration");
    detail::require_positive(responsivity, "responsivity");
    return 2.0 * std::sqrt(symbol_duration) * responsivity * avg_power / (order - 1.0);
}

// Inverse of min_distance_from_power.
inline double power_from_min_distance(double two_d, double symbol_duration, double responsivity,
                                      unsigned order)
{
    bits_per_symbol(order);
    detail::require_positive(two_d, "minimum distance");
    detail::require_positive(symbol_duration, "symbol duration");
    detail::require_positive(responsivity, "responsivity");
    return two_d * (order - 1.0) / (2.0 * std::sqrt(symbol_duration) * responsivity);
}

// E_b^o = Pbar Ts / log2 M
inline double optical_energy_per_bit(double avg_power, double symbol_duration, unsigned order)
{
    const unsigned k = bits_per_symbol(order);
    detail::require_positive(avg_power, "average power");
    detail::require_positive(symbol_duration, "symbol duration");
    return avg_power * symbol_duration / k;
}

// d^2 (half the minimum distance, squared) from optical energy per bit and
// data rate: d^2 = (E_b^o)^2 R_data R^2 log2 M / (M-1)^2.
inline double half_distance_sq_from_optical_energy(double energy_per_bit, double data_rate,
                                                   double responsivity, unsigned order)
{
    const unsigned k = bits_per_symbol(order);
    detail::require_positive(energy_per_bit, "energy per bit");
    detail::require_positive(data_rate, "data rate");
    detail::require_positive(responsivity, "responsivity");
    const double m1 = order - 1.0;
    return energy_per_bit * energy_per_bit * data_rate * responsivity * responsivity * k / (m1 * m1);
}

// Transmit power increase (dB) that keeps d and N0 fixed when the symbol
// duration shrinks by K: optical power scales with sqrt(K).
inline double power_delta_for_rate_scaling(double rate_multiplier)
{
    detail::require_positive(rate_multiplier, "rate multiplier");
    return 10.0 * std::log10(std::sqrt(rate_multiplier));
}

// One-sided N0 (A^2/Hz) of thermal noise with the given density (dBm/Hz)
// developed across a load resistor: N0/2 = P / R_load.
inline double n0_from_thermal_noise(double dbm_per_hz, double load_ohm)
{
    detail::require_positive(load_ohm, "load resistance");
    return 2.0 * dbm_to_watts(dbm_per_hz) / load_ohm;
}

// Binary-reflected Gray labelling of the levels {0..M-1}. Bit patterns are
// held MSB-first in the low log2(M) bits of an unsigned integer.
class GrayMap {
public:
    explicit GrayMap(unsigned order) : order_(order), bits_(fsopam::bits_per_symbol(order)) {}

    unsigned order() const noexcept { return order_; }
    unsigned bits_per_symbol() const noexcept { return bits_; }

    // Label of a level: g = j ^ (j >> 1).
    std::uint32_t bits_of_level(unsigned level) const
    {
        if (level >= order_)
            throw usage_error("level " + std::to_string(level) + " outside constellation");
        return level ^ (level >> 1);
    }

    // Level carrying a label (inverse Gray code).
    unsigned level_of_bits(std::uint32_t pattern) const
    {
        if (pattern >= order_)
            throw usage_error("bit pattern wider than log2(M) bits");
        return level_of_bits_unchecked(pattern);
    }

    static unsigned level_of_bits_unchecked(std::uint32_t pattern) noexcept
    {
        std::uint32_t level = pattern;
        for (std::uint32_t shift = pattern >> 1; shift != 0; shift >>= 1)
            level ^= shift;
        return level;
    }

    // Bit block (MSB first, each element 0 or 1) -> level.
    unsigned encode(std::span<const std::uint8_t> bits) const
    {
        if (bits.size() != bits_)
            throw usage_error("bit block has length " + std::to_string(bits.size()) + ", expected " +
                              std::to_string(bits_));
        std::uint32_t pattern = 0;
        for (std::uint8_t b : bits) {
            if (b > 1)
                throw usage_error("bit values must be 0 or 1");
            pattern = (pattern << 1) | b;
        }
        return level_of_bits_unchecked(pattern);
    }

    std::vector<std::uint8_t> decode(unsigned level) const
    {
        const std::uint32_t pattern = bits_of_level(level);
        std::vector<std::uint8_t> out(bits_);
        for (unsigned i = 0; i < bits_; ++i)
            out[i] = static_cast<std::uint8_t>((pattern >> (bits_ - 1 - i)) & 1u);
        return out;
    }

private:
    unsigned order_;
    unsigned bits_;
};

inline unsigned gray_encode(std::span<const std::uint8_t> bits, unsigned order)
{
    return GrayMap(order).encode(bits);
}

inline std::vector<std::uint8_t> gray_decode(unsigned level, unsigned order)
{
    return GrayMap(order).decode(level);
}

// Transmitter/receiver parameters tied together by
// 2d = 2 sqrt(Ts) R Pbar / (M-1).
class Constellation {
public:
    static Constellation from_power(unsigned order, double symbol_duration, double responsivity,
                                    double avg_power)
    {
        return Constellation(order, symbol_duration, responsivity, avg_power,
                             min_distance_from_power(avg_power, symbol_duration, responsivity, order));
    }

    static Constellation from_min_distance(unsigned order, double symbol_duration,
                                           double responsivity, double two_d)
    {
        return from_power(order, symbol_duration, responsivity,
                          power_from_min_distance(two_d, symbol_duration, responsivity, order));
    }

    unsigned order() const noexcept { return order_; }
    unsigned bits_per_symbol() const noexcept { return static_cast<unsigned>(std::countr_zero(order_)); }
    double symbol_duration() const noexcept { return ts_; }
    double responsivity() const noexcept { return responsivity_; }
    double avg_power() const noexcept { return avg_power_; }
    double two_d() const noexcept { return two_d_; }
    double data_rate() const noexcept { return bits_per_symbol() / ts_; }
    // Transmit-side minimum intensity distance I = 2d / (sqrt(Ts) R).
    double intensity_step() const noexcept { return two_d_ / (std::sqrt(ts_) * responsivity_); }

private:
    Constellation(unsigned order, double ts, double responsivity, double avg_power, double two_d)
        : order_(order), ts_(ts), responsivity_(responsivity), avg_power_(avg_power), two_d_(two_d)
    {
    }

    unsigned order_;
    double ts_;
    double responsivity_;
    double avg_power_;
    double two_d_;
};

} // namespace fsopam
