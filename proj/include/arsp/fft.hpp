#pragma once

#include <map>
#include <span>
#include <vector>

#include "arsp/arithmetic.hpp"
#include "arsp/core.hpp"

namespace arsp {

enum class FftDirection { forward, inverse };

namespace detail {

// exp(-2*pi*i*k/n) for k < n/2, cached per thread and size.
inline const std::vector<cplx>& twiddles(std::size_t n) {
    thread_local std::map<std::size_t, std::vector<cplx>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
        tw[k] = {std::cos(ang), std::sin(ang)};
    }
    return cache.emplace(n, std::move(tw)).first->second;
}

inline void bit_reverse(std::span<cplx> x) {
    const std::size_t n = x.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
}

}  // namespace detail

/// Unnormalized in-place radix-2 decimation-in-time transform in both
/// directions. One butterfly (one complex multiply-accumulate) is tallied per
/// (n/2)*log2(n). Twiddles are loaded as stage coefficients.
template <StageArithmetic Arith = ExactArithmetic>
void fft_radix2(std::span<cplx> x, FftDirection dir, const Arith& arith = {},
                std::uint64_t* butterflies = nullptr) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
    if (n == 1) return;
    detail::bit_reverse(x);
    const auto& tw = detail::twiddles(n);
    const bool inv = dir == FftDirection::inverse;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t k = 0; k < half; ++k) {
                cplx w = tw[k * step];
                if (inv) w = std::conj(w);
                const cplx t = arith.mul(arith.coef(w), x[base + k + half]);
                const cplx u = x[base + k];
                x[base + k] = arith.add(u, t);
                x[base + k + half] = arith.sub(u, t);
            }
        }
    }
    tally(butterflies, static_cast<std::uint64_t>(n / 2) * log2_exact(n));
}

/// Forward transform, unnormalized.
inline std::vector<cplx> fft(std::span<const cplx> in, std::uint64_t* butterflies = nullptr) {
    std::vector<cplx> out(in.begin(), in.end());
    fft_radix2(std::span<cplx>(out), FftDirection::forward, ExactArithmetic{}, butterflies);
    return out;
}

/// Inverse transform scaled by 1/n.
inline std::vector<cplx> ifft(std::span<const cplx> in, std::uint64_t* butterflies = nullptr) {
    std::vector<cplx> out(in.begin(), in.end());
    fft_radix2(std::span<cplx>(out), FftDirection::inverse, ExactArithmetic{}, butterflies);
    const double s = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= s;
    return out;
}

/// Forward transform of any length: radix-2 when possible, direct sum otherwise.
inline std::vector<cplx> dft(std::span<const cplx> in) {
    if (is_power_of_two(in.size())) return fft(in);
    const std::size_t n = in.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{};
        for (std::size_t t = 0; t < n; ++t)
            acc += in[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>((k * t) % n) / static_cast<double>(n));
        out[k] = acc;
    }
    return out;
}

}  // namespace arsp
