#pragma once

// Random streams for the simulator. One generator family is used everywhere:
// xoshiro256++ seeded through splitmix64, with stream k obtained by applying
// the 2^128-step jump k times. Variates are drawn by inversion so each draw
// consumes exactly one 64-bit output.

#include "losssim/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <variant>

namespace losssim
{

inline constexpr const char* kGeneratorName = "xoshiro256++/splitmix64-seeded/jump-2^128-per-stream";

class Xoshiro256pp
{
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed = 0)
    {
        std::uint64_t x = seed;
        for (auto& word : s_)
        {
            word = splitmix64(x);
        }
    }

    /// Generator with an explicit internal state (not all zero).
    static Xoshiro256pp from_state(std::uint64_t s0, std::uint64_t s1, std::uint64_t s2, std::uint64_t s3)
    {
        Xoshiro256pp g;
        g.s_[0] = s0;
        g.s_[1] = s1;
        g.s_[2] = s2;
        g.s_[3] = s3;
        return g;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Advances by 2^128 outputs.
    void jump()
    {
        static constexpr std::uint64_t kJump[] = {0x180ec6d33cfd0aba, 0xd5a61266f0c9392c, 0xa9582618e03fc9aa,
                                                  0x39abdc4529b1661c};
        std::uint64_t acc[4] = {0, 0, 0, 0};
        for (std::uint64_t mask : kJump)
        {
            for (int b = 0; b < 64; ++b)
            {
                if (mask & (std::uint64_t{1} << b))
                {
                    for (int i = 0; i < 4; ++i)
                    {
                        acc[i] ^= s_[i];
                    }
                }
                (*this)();
            }
        }
        for (int i = 0; i < 4; ++i)
        {
            s_[i] = acc[i];
        }
    }

    /// Uniform on (0, 1], 53-bit resolution; never returns 0 so log(u) is finite.
    double uniform_open0()
    {
        return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x)
    {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
        z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4]{};
};

/// Generator for substream `stream_id` of `seed`.
inline Xoshiro256pp make_stream(std::uint64_t seed, std::uint64_t stream_id)
{
    Xoshiro256pp g(seed);
    for (std::uint64_t i = 0; i < stream_id; ++i)
    {
        g.jump();
    }
    return g;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// One draw from each gap family; each consumes at most one generator output.
inline double draw(const dist::Exponential& d, Xoshiro256pp& g) { return -std::log(g.uniform_open0()) / d.rate; }
inline double draw(const dist::Deterministic& d, Xoshiro256pp&) { return d.value; }
inline double draw(const dist::Uniform& d, Xoshiro256pp& g) { return d.lo + (d.hi - d.lo) * (1.0 - g.uniform_open0()); }
inline double draw(const dist::Pareto& d, Xoshiro256pp& g) { return d.scale * std::pow(g.uniform_open0(), -1.0 / d.shape); }

/// Packet sizes are conditioned on size <= 0.1. Conditioning is done by
/// inverting the truncated CDF, which has the same law as redrawing until the
/// size fits but a fixed cost per packet.
struct CappedUniform
{
    double lo;
    double hi;

    explicit CappedUniform(const dist::Uniform& d) : lo(d.lo), hi(std::min(d.hi, kMaxPacketSize)) {}
};

struct CappedExponential
{
    double mean;
    double mass; ///< 1 - exp(-cap / mean)

    explicit CappedExponential(const dist::TruncatedExponential& d)
        : mean(d.mean), mass(-std::expm1(-std::min(d.cap, kMaxPacketSize) / d.mean))
    {
    }
};

inline double draw(const CappedUniform& d, Xoshiro256pp& g) { return d.lo + (d.hi - d.lo) * (1.0 - g.uniform_open0()); }
inline double draw(const CappedExponential& d, Xoshiro256pp& g)
{
    return -d.mean * std::log1p(-(1.0 - g.uniform_open0()) * d.mass);
}

using SizeSampler = std::variant<dist::Deterministic, CappedUniform, CappedExponential>;

inline SizeSampler make_size_sampler(const SizeDistribution& d)
{
    return std::visit(
        [](const auto& x) -> SizeSampler {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, dist::Deterministic>)
            {
                return x;
            }
            else if constexpr (std::is_same_v<T, dist::Uniform>)
            {
                return CappedUniform(x);
            }
            else
            {
                return CappedExponential(x);
            }
        },
        d);
}

} // namespace losssim
