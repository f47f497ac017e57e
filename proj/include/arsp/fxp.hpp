#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "arsp/clean.hpp"
#include "arsp/doppler.hpp"
#include "arsp/rsp.hpp"

namespace arsp {

/// Signed fixed point with W total bits, Z integer bits (sign included).
struct FixedPointFormat {
    int W = 32;
    int Z = 1;

    int frac() const noexcept { return W - Z; }
    double lsb() const noexcept { return std::ldexp(1.0, -frac()); }
    double max_value() const noexcept { return std::ldexp(1.0, Z - 1) - lsb(); }
    double min_value() const noexcept { return -std::ldexp(1.0, Z - 1); }

    void validate() const {
        if (Z < 1 || Z > W || W > 64) throw std::invalid_argument("FixedPointFormat: need 1 <= Z <= W <= 64");
    }
    bool operator==(const FixedPointFormat&) const = default;
};

/// "W:Z" -> format.
inline FixedPointFormat parse_format(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("format must look like W:Z, got '" + text + "'");
    FixedPointFormat f;
    try {
        std::size_t used = 0;
        f.W = std::stoi(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("");
        const auto zs = text.substr(colon + 1);
        f.Z = std::stoi(zs, &used);
        if (used != zs.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw std::invalid_argument("format must look like W:Z, got '" + text + "'");
    }
    f.validate();
    return f;
}

inline std::string to_string(const FixedPointFormat& f) { return std::to_string(f.W) + ":" + std::to_string(f.Z); }

struct SaturationStats {
    std::uint64_t quantizations = 0;
    std::uint64_t saturations = 0;
};

/// Precomputed rounding constants for one format.
struct Quantizer {
    double up = 1.0, down = 1.0, hi = 0.0, lo = 0.0;
    bool fast = true;

    Quantizer() = default;
    explicit Quantizer(const FixedPointFormat& f)
        : up(std::ldexp(1.0, f.frac())), down(std::ldexp(1.0, -f.frac())), hi(f.max_value()), lo(f.min_value()),
          fast(f.W <= 50) {}

    /// Round to the nearest multiple of the LSB (ties to even), then clamp to
    /// the representable range. Saturation is silent but counted.
    double operator()(double x, SaturationStats* st = nullptr) const {
        const double v = x * up;
        double r;
        if (fast && std::abs(v) < 0x1p51) {
            // Adding 1.5 * 2^52 forces rounding at the units place under the
            // default round-to-nearest-even mode.
            r = (v + 0x1.8p52) - 0x1.8p52;
        } else {
            r = std::nearbyint(v);
        }
        double q = r * down;
        bool sat = false;
        if (q > hi) {
            q = hi;
            sat = true;
        } else if (q < lo) {
            q = lo;
            sat = true;
        }
        if (st) {
            ++st->quantizations;
            st->saturations += sat;
        }
        return q;
    }
    cplx operator()(cplx z, SaturationStats* st = nullptr) const { return {(*this)(z.real(), st), (*this)(z.imag(), st)}; }
};

inline double quantize(double x, const FixedPointFormat& f, SaturationStats* st = nullptr) {
    return Quantizer(f)(x, st);
}

inline cplx quantize(cplx z, const FixedPointFormat& f, SaturationStats* st = nullptr) {
    return Quantizer(f)(z, st);
}

inline cplx fxp_add(cplx a, cplx b, const Quantizer& q, SaturationStats* st = nullptr) { return q(a + b, st); }
inline cplx fxp_sub(cplx a, cplx b, const Quantizer& q, SaturationStats* st = nullptr) { return q(a - b, st); }

/// Four real products and two sums, each requantized.
inline cplx fxp_mul(cplx a, cplx b, const Quantizer& q, SaturationStats* st = nullptr) {
    const double rr = q(a.real() * b.real(), st);
    const double ii = q(a.imag() * b.imag(), st);
    const double ri = q(a.real() * b.imag(), st);
    const double ir = q(a.imag() * b.real(), st);
    return {q(rr - ii, st), q(ri + ir, st)};
}

inline cplx fxp_add(cplx a, cplx b, const FixedPointFormat& f, SaturationStats* st = nullptr) {
    return fxp_add(a, b, Quantizer(f), st);
}
inline cplx fxp_sub(cplx a, cplx b, const FixedPointFormat& f, SaturationStats* st = nullptr) {
    return fxp_sub(a, b, Quantizer(f), st);
}
inline cplx fxp_mul(cplx a, cplx b, const FixedPointFormat& f, SaturationStats* st = nullptr) {
    return fxp_mul(a, b, Quantizer(f), st);
}

class QuantizedArithmetic {
public:
    QuantizedArithmetic(const FixedPointFormat& fmt, SaturationStats* stats = nullptr)
        : fmt_(fmt), q_(fmt), coef_(FixedPointFormat{fmt.W + 1, fmt.Z + 1}), stats_(stats) {}

    cplx load(cplx x) const { return q_(x, stats_); }
    // Constants keep the stage LSB but get one extra integer bit, so unit
    // twiddles and weights are exact.
    cplx coef(cplx x) const { return coef_(x); }
    cplx mul(cplx x, cplx y) const { return fxp_mul(x, y, q_, stats_); }
    cplx add(cplx x, cplx y) const { return fxp_add(x, y, q_, stats_); }
    cplx sub(cplx x, cplx y) const { return fxp_sub(x, y, q_, stats_); }
    const FixedPointFormat& format() const noexcept { return fmt_; }

private:
    FixedPointFormat fmt_;
    Quantizer q_, coef_;
    SaturationStats* stats_;
};

static_assert(StageArithmetic<QuantizedArithmetic>);

struct StageFormats {
    FixedPointFormat dbf{22, 2};
    FixedPointFormat fft{24, 1};
    FixedPointFormat cm{26, 6};
    FixedPointFormat ifft{32, 1};
    FixedPointFormat msg{32, 12};

    const FixedPointFormat& of(Stage s) const {
        switch (s) {
            case Stage::dbf: return dbf;
            case Stage::fft: return fft;
            case Stage::cm: return cm;
            case Stage::ifft: return ifft;
        }
        return dbf;
    }
    void validate() const {
        for (const auto* f : {&dbf, &fft, &cm, &ifft, &msg}) f->validate();
    }
};

/// Per-stage saturation tallies: dbf, fft, cm, ifft, msg.
using StageStats = std::array<SaturationStats, 5>;

inline std::size_t stage_slot(Stage s) { return static_cast<std::size_t>(s); }

/// Fixed-point numerics with power-of-two stage scaling. Each stage's scale
/// is the largest power of two that keeps its worst-case output (input bound
/// times the stage's magnitude growth) inside the stage format.
class FixedPointNumerics {
public:
    FixedPointNumerics(const StageFormats& formats, Pipeline order, const RspSetup& s, double input_peak,
                       StageStats* stats)
        : formats_(formats), stats_(stats) {
        formats_.validate();
        double gmax = 0.0;
        for (const auto& v : s.gt.data()) gmax = std::max(gmax, std::abs(v));
        const double P = static_cast<double>(s.cfg.P), L = static_cast<double>(s.cfg.L);
        const std::array<std::pair<Stage, double>, 4> joint{
            {{Stage::fft, P}, {Stage::dbf, L}, {Stage::cm, gmax}, {Stage::ifft, P}}};
        const std::array<std::pair<Stage, double>, 4> sarp{
            {{Stage::dbf, L}, {Stage::fft, P}, {Stage::cm, gmax}, {Stage::ifft, P}}};
        // One bit of headroom over the reference packet's peak.
        double bound = 2.0 * (input_peak > 0.0 ? input_peak : 1.0);
        for (const auto& [stage, growth] : order == Pipeline::sarp ? sarp : joint) {
            const double range = -formats_.of(stage).min_value();
            scale_[stage_slot(stage)] = std::exp2(std::floor(std::log2(range / (bound * growth))));
            bound *= growth;
        }
    }

    QuantizedArithmetic arith(Stage s) const {
        return {formats_.of(s), stats_ ? &(*stats_)[stage_slot(s)] : nullptr};
    }
    double scale(Stage s) const { return scale_[stage_slot(s)]; }
    const StageFormats& formats() const noexcept { return formats_; }

private:
    StageFormats formats_;
    StageStats* stats_;
    std::array<double, 4> scale_{1.0, 1.0, 1.0, 1.0};
};

static_assert(PipelineNumerics<FixedPointNumerics>);

inline double peak_magnitude(const CMatrix& m) {
    double p = 0.0;
    for (const auto& v : m.data()) p = std::max(p, std::abs(v));
    return p;
}

/// Noise-subspace projection a^H En En^H a computed in the MSG format. The
/// steering vector enters pre-scaled by 2^shift, the largest shift that keeps
/// every inner product inside the format; projections far from the signal
/// subspace then saturate, which only flattens the spectrum floor. The
/// reported spectrum is 4^shift / max(scaled projection, LSB).
struct QuantizedMusic {
    int shift = 0;
    std::vector<double> projection;  ///< scaled, as held in the format
    std::vector<double> spectrum;
    std::vector<SpectralPeak> peaks;
};

inline int msg_input_shift(const FixedPointFormat& fmt, std::size_t K) {
    // |En^H a| <= ||a|| = sqrt(K); keep one bit of headroom.
    const double room = std::ldexp(1.0, fmt.Z - 1) / std::sqrt(static_cast<double>(K));
    return std::max(0, static_cast<int>(std::floor(std::log2(room))) - 1);
}

inline QuantizedMusic quantized_music_spectrum(const CMatrix& eigvecs, std::size_t D, const VelocityGrid& grid,
                                               const RadarConfig& cfg, const FixedPointFormat& fmt,
                                               SaturationStats* st = nullptr) {
    const std::size_t K = eigvecs.rows();
    if (D < 1 || D >= K) throw std::invalid_argument("music_spectrum: need 1 <= D < K");
    const QuantizedArithmetic a{fmt, st};
    const Quantizer q(fmt);
    QuantizedMusic out;
    out.shift = msg_input_shift(fmt, K);
    const double gain = std::ldexp(1.0, out.shift);
    CMatrix En(K, K - D);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = D; j < K; ++j) En(k, j - D) = a.load(std::conj(eigvecs(k, j)));
    out.projection.resize(grid.size());
    out.spectrum.resize(grid.size());
    std::vector<cplx> sv(K);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto steer = doppler_steering(grid.at(g), K, cfg);
        for (std::size_t k = 0; k < K; ++k) sv[k] = a.load(steer[k] * gain);
        double acc = 0.0;
        for (std::size_t j = 0; j < K - D; ++j) {
            cplx e{};
            for (std::size_t k = 0; k < K; ++k) e = a.add(e, a.mul(En(k, j), sv[k]));
            acc = q(acc + q(q(e.real() * e.real(), st) + q(e.imag() * e.imag(), st), st), st);
        }
        out.projection[g] = acc;
        out.spectrum[g] = gain * gain / std::max(acc, fmt.lsb());
    }
    out.peaks = find_peaks(out.spectrum, grid);
    return out;
}

/// Smoothing and decomposition in double precision, spectrum in `fmt`.
inline QuantizedMusic quantized_music_doppler(std::span<const cplx> zeta, const RadarConfig& cfg,
                                              const MusicOptions& mo, const FixedPointFormat& fmt,
                                              SaturationStats* st = nullptr) {
    const std::size_t K = mo.K == 0 ? zeta.size() / 2 : mo.K;
    const auto ev = evd_qr_algorithm(spatial_smooth(zeta, K).U, mo.evd);
    return quantized_music_spectrum(ev.vectors, mo.D, mo.grid, cfg, fmt, st);
}

struct QuantizedRun {
    std::vector<Detection> detections;
    std::vector<SlowTimeVector> zetas;
    std::vector<QuantizedMusic> music;  ///< one per detection when Doppler is requested
    StageStats stats{};
};

/// Localization (CLEAN on packet 0) and optionally Doppler with every
/// pipeline operation in its stage format. The noise-subspace decomposition
/// itself stays in double precision; the spectrum search uses the MSG format.
inline QuantizedRun run_quantized_pipeline(const DataCube& X, Pipeline mode, const RspSetup& s,
                                           const StageFormats& formats, const CleanConfig& cc,
                                           bool with_doppler = false, const MusicOptions& mo = {}) {
    QuantizedRun run;
    const FixedPointNumerics num(formats, mode, s, peak_magnitude(X.packet(0)), &run.stats);
    run.detections = clean_iterate(X.packet(0), mode, s, cc, num);
    if (!with_doppler || run.detections.empty()) return run;
    // Slow-time extraction always runs through the joint-order stages.
    const FixedPointNumerics snum(formats, Pipeline::mjarp, s, peak_magnitude(X.packet(0)), &run.stats);
    run.zetas = slow_time_vectors(X, run.detections, s, nullptr, snum);
    for (const auto& z : run.zetas) {
        run.music.push_back(quantized_music_doppler(z.zeta, s.cfg, mo, formats.msg, &run.stats[4]));
        if (!run.music.back().peaks.empty())
            run.detections[z.detection].velocity_mps = run.music.back().peaks.front().velocity;
    }
    return run;
}

}  // namespace arsp
