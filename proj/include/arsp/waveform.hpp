#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "arsp/config.hpp"
#include "arsp/core.hpp"
#include "arsp/fft.hpp"

namespace arsp {

/// Complementary pair: R_aa(k) + R_bb(k) = 2N at k = 0 and 0 elsewhere.
struct GolayPair {
    std::vector<cplx> a;
    std::vector<cplx> b;
    std::size_t n() const noexcept { return a.size(); }
};

/// Pulse matrix G (M x P); each row is a Golay sequence followed by zeros.
struct PulseTrain {
    CMatrix G;
    std::size_t occupied_len = 0;

    std::size_t num_pulses() const noexcept { return G.rows(); }
    std::size_t num_samples() const noexcept { return G.cols(); }
    std::span<const cplx> pulse(std::size_t m) const { return G.row(m); }
};

/// Recursive doubling a' = [a b], b' = [a -b] from the seed ([1], [1]).
inline GolayPair golay_pair(std::size_t n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("golay_pair: length must be a power of two");
    GolayPair g{{cplx{1.0}}, {cplx{1.0}}};
    while (g.a.size() < n) {
        std::vector<cplx> a2, b2;
        a2.reserve(2 * g.a.size());
        b2.reserve(2 * g.a.size());
        a2.insert(a2.end(), g.a.begin(), g.a.end());
        a2.insert(a2.end(), g.b.begin(), g.b.end());
        b2.insert(b2.end(), g.a.begin(), g.a.end());
        for (const auto& v : g.b) b2.push_back(-v);
        g.a = std::move(a2);
        g.b = std::move(b2);
    }
    return g;
}

/// Aperiodic autocorrelation at lags -(N-1)..(N-1); index N-1 is lag 0.
inline std::vector<cplx> aperiodic_autocorrelation(std::span<const cplx> x) {
    const long n = static_cast<long>(x.size());
    std::vector<cplx> r(x.empty() ? 0 : 2 * x.size() - 1);
    for (long k = -(n - 1); k <= n - 1; ++k) {
        cplx acc{};
        for (long i = 0; i < n; ++i) {
            const long j = i + k;
            if (j >= 0 && j < n) acc += x[j] * std::conj(x[i]);
        }
        r[static_cast<std::size_t>(k + n - 1)] = acc;
    }
    return r;
}

inline std::vector<cplx> combined_autocorrelation(const GolayPair& g) {
    auto ra = aperiodic_autocorrelation(g.a);
    const auto rb = aperiodic_autocorrelation(g.b);
    for (std::size_t i = 0; i < ra.size(); ++i) ra[i] += rb[i];
    return ra;
}

inline PulseTrain build_pulse_train(const GolayPair& pair, const RadarConfig& cfg) {
    if (pair.a.size() != pair.b.size()) throw std::invalid_argument("build_pulse_train: mismatched pair");
    if (pair.n() == 0 || pair.n() > cfg.P / 2)
        throw std::invalid_argument("build_pulse_train: sequence longer than P/2");
    if (cfg.M < 1) throw std::invalid_argument("build_pulse_train: M must be >= 1");
    PulseTrain train{CMatrix(cfg.M, cfg.P), pair.n()};
    for (std::size_t m = 0; m < cfg.M; ++m) {
        const bool use_b = cfg.alternation == PulseAlternation::alternate && (m % 2 == 1);
        const auto& seq = use_b ? pair.b : pair.a;
        auto row = train.G.row(m);
        std::copy(seq.begin(), seq.end(), row.begin());
    }
    return train;
}

/// Row m is the unnormalized P-point transform of pulse m.
inline CMatrix freq_domain_sequences(const PulseTrain& train) {
    CMatrix out(train.G.rows(), train.G.cols());
    for (std::size_t m = 0; m < train.G.rows(); ++m) {
        const auto spec = fft(train.G.row(m));
        std::copy(spec.begin(), spec.end(), out.row(m).begin());
    }
    return out;
}

/// Default train for a config: half-length pair zero padded to P.
inline PulseTrain default_pulse_train(const RadarConfig& cfg) {
    return build_pulse_train(golay_pair(cfg.P / 2), cfg);
}

}  // namespace arsp
