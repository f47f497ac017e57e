#pragma once

#include <concepts>
#include <cstdint>

#include "arsp/core.hpp"

namespace arsp {

/// Arithmetic used by one processing stage. Every kernel routes its complex
/// loads, multiplies and additions through one of these so that the same
/// control flow runs in double precision, float32 or emulated fixed point.
template <class A>
concept StageArithmetic = requires(const A& a, cplx x, cplx y) {
    { a.load(x) } -> std::same_as<cplx>;
    { a.coef(x) } -> std::same_as<cplx>;
    { a.mul(x, y) } -> std::same_as<cplx>;
    { a.add(x, y) } -> std::same_as<cplx>;
    { a.sub(x, y) } -> std::same_as<cplx>;
};

struct ExactArithmetic {
    cplx load(cplx x) const noexcept { return x; }
    cplx coef(cplx x) const noexcept { return x; }
    cplx mul(cplx x, cplx y) const noexcept { return x * y; }
    cplx add(cplx x, cplx y) const noexcept { return x + y; }
    cplx sub(cplx x, cplx y) const noexcept { return x - y; }
};

/// Every result rounded to IEEE single precision.
struct Float32Arithmetic {
    static cplx round(cplx x) noexcept {
        return {static_cast<double>(static_cast<float>(x.real())),
                static_cast<double>(static_cast<float>(x.imag()))};
    }
    cplx load(cplx x) const noexcept { return round(x); }
    cplx coef(cplx x) const noexcept { return round(x); }
    cplx mul(cplx x, cplx y) const noexcept {
        const float ar = static_cast<float>(x.real()), ai = static_cast<float>(x.imag());
        const float br = static_cast<float>(y.real()), bi = static_cast<float>(y.imag());
        const float rr = ar * br - ai * bi;
        const float ri = ar * bi + ai * br;
        return {rr, ri};
    }
    cplx add(cplx x, cplx y) const noexcept { return round(round(x) + round(y)); }
    cplx sub(cplx x, cplx y) const noexcept { return round(round(x) - round(y)); }
};

static_assert(StageArithmetic<ExactArithmetic>);
static_assert(StageArithmetic<Float32Arithmetic>);

/// Complex-operation tallies, one bucket per column of the complexity table.
struct OpCounter {
    std::uint64_t cmac_dbf = 0;
    std::uint64_t cmac_fft = 0;
    std::uint64_t cmac_ifft = 0;
    std::uint64_t cm = 0;

    OpCounter& operator+=(const OpCounter& o) noexcept {
        cmac_dbf += o.cmac_dbf;
        cmac_fft += o.cmac_fft;
        cmac_ifft += o.cmac_ifft;
        cm += o.cm;
        return *this;
    }
    friend OpCounter operator-(OpCounter a, const OpCounter& b) noexcept {
        a.cmac_dbf -= b.cmac_dbf;
        a.cmac_fft -= b.cmac_fft;
        a.cmac_ifft -= b.cmac_ifft;
        a.cm -= b.cm;
        return a;
    }
    bool operator==(const OpCounter&) const = default;
};

inline void tally(std::uint64_t* bucket, std::uint64_t n) noexcept {
    if (bucket) *bucket += n;
}

}  // namespace arsp
