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

// Counter-based Philox4x32-10 generator (Salmon et al., SC'11). Every
// (key, counter) pair is an independent draw, so a simulation stream is
// fully identified by (master seed, stream id) and results do not depend on
// which thread ran the stream.

#include <array>
#include <cstdint>
#include <limits>

namespace fsopam {

class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32() : Philox4x32(0, 0) {}

    // key <- seed, counter words 2..3 <- stream, words 0..1 count draws.
    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)}
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (index_ == 4) {
            output_ = block(counter_, key_);
            increment();
            index_ = 0;
        }
        return output_[index_++];
    }

    // 53-bit uniform in (0, 1]; never returns zero.
    double uniform_open0()
    {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return static_cast<double>(bits + 1) * 0x1.0p-53;
    }

    // Ten-round Philox bijection of one 128-bit counter under a 64-bit key.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key)
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    void increment()
    {
        if (++counter_[0] == 0)
            ++counter_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> output_{};
    unsigned index_ = 4;
};

// splitmix64 finalizer; used to fold structured ids into one stream id.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0)
{
    return mix64(mix64(mix64(a) ^ b) ^ c);
}

} // namespace fsopam
