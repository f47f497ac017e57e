#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "arsp/config.hpp"
#include "arsp/core.hpp"
#include "arsp/waveform.hpp"

namespace arsp {

using Rng = std::mt19937_64;

/// Point scatterer. Clutter is static regardless of `velocity`.
struct Target {
    double range_m = 10.0;
    double azimuth_deg = 0.0;
    double velocity_mps = 0.0;
    double sigma_mean = 1.0;
    bool is_clutter = false;

    double radial_velocity() const noexcept { return is_clutter ? 0.0 : velocity_mps; }
};

/// Rician propagation and receiver noise.
///
/// The path-loss constant is calibrated so that a unit-RCS target at r_max
/// returns `ps_ref_dbm` of line-of-sight power. Powers are in mW, amplitudes
/// in sqrt(mW). `noise_dbm` or `clutter_dbm` of -inf disables that term;
/// `kappa_db` of +inf removes the multipath term.
struct ChannelModel {
    double kappa_db = 2.0;
    double noise_dbm = -90.0;
    double clutter_dbm = -98.0;
    double ps_ref_dbm = -90.0;
    bool swerling = true;
    std::uint64_t rng_seed = 1;

    double kappa() const { return std::isinf(kappa_db) && kappa_db > 0 ? kInf : db_to_linear(kappa_db); }
    double los_weight() const {
        const double k = kappa();
        return std::isinf(k) ? 1.0 : std::sqrt(k / (k + 1.0));
    }
    double nlos_weight() const {
        const double k = kappa();
        return std::isinf(k) ? 0.0 : std::sqrt(1.0 / (k + 1.0));
    }
    double noise_mw() const { return noise_dbm == -kInf ? 0.0 : dbm_to_mw(noise_dbm); }
    double clutter_mw() const { return clutter_dbm == -kInf ? 0.0 : dbm_to_mw(clutter_dbm); }

    /// A such that A^2 / r_max^4 = P_s,ref.
    double amplitude_constant(const RadarConfig& cfg) const {
        const double rmax = cfg.r_max();
        return rmax * rmax * std::sqrt(dbm_to_mw(ps_ref_dbm));
    }

    void validate() const {
        if (std::isnan(kappa_db) || kappa_db == -kInf) throw std::invalid_argument("ChannelModel: invalid kappa");
        if (std::isnan(noise_dbm) || noise_dbm == kInf || std::isnan(clutter_dbm) || clutter_dbm == kInf ||
            !std::isfinite(ps_ref_dbm))
            throw std::invalid_argument("ChannelModel: powers must be finite or -inf");
    }

    static constexpr double kInf = std::numeric_limits<double>::infinity();
};

/// Received cube X (P x L x M), stored as M packets of P x L.
class DataCube {
public:
    DataCube() = default;
    DataCube(std::size_t P, std::size_t L, std::size_t M) : packets_(M, CMatrix(P, L)) {}

    std::size_t P() const noexcept { return packets_.empty() ? 0 : packets_.front().rows(); }
    std::size_t L() const noexcept { return packets_.empty() ? 0 : packets_.front().cols(); }
    std::size_t M() const noexcept { return packets_.size(); }

    const CMatrix& packet(std::size_t m) const { return packets_.at(m); }
    CMatrix& packet(std::size_t m) { return packets_.at(m); }

    cplx& operator()(std::size_t p, std::size_t l, std::size_t m) { return packets_[m](p, l); }
    const cplx& operator()(std::size_t p, std::size_t l, std::size_t m) const { return packets_[m](p, l); }

    DataCube& operator+=(const DataCube& o) {
        if (o.M() != M()) throw std::invalid_argument("DataCube: shape mismatch");
        for (std::size_t m = 0; m < M(); ++m) packets_[m] += o.packets_[m];
        return *this;
    }

    bool operator==(const DataCube&) const = default;

private:
    std::vector<CMatrix> packets_;
};

inline cplx complex_gaussian(Rng& rng, double power) {
    std::normal_distribution<double> n(0.0, std::sqrt(power / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

/// Swerling-1 cross-section draw.
inline double sample_rcs(double sigma_mean, Rng& rng) {
    if (!(sigma_mean > 0.0)) throw std::invalid_argument("sample_rcs: mean RCS must be positive");
    std::exponential_distribution<double> e(1.0 / sigma_mean);
    return e(rng);
}

/// Echo amplitude of one target for one trial (LOS + NLOS), before
/// steering/Doppler phasors.
struct TargetEcho {
    cplx amplitude;
    long delay_bin;
};

inline TargetEcho draw_echo(const Target& t, const RadarConfig& cfg, const ChannelModel& chan, Rng& rng) {
    if (!(t.range_m > 0.0)) throw std::invalid_argument("synthesize_cube: target range must be positive");
    const long d = cfg.delay_bin(t.range_m);
    if (d < 0 || d >= static_cast<long>(cfg.P))
        throw target_out_of_window("synthesize_cube: target delay outside the fast-time window");
    const double sigma = chan.swerling ? sample_rcs(t.sigma_mean, rng) : t.sigma_mean;
    const double A = chan.amplitude_constant(cfg);
    const double los = A / (t.range_m * t.range_m) * std::sqrt(sigma) * chan.los_weight();
    cplx nlos{};
    if (chan.nlos_weight() > 0.0 && chan.clutter_mw() > 0.0)
        nlos = complex_gaussian(rng, chan.clutter_mw()) * chan.nlos_weight();
    return {cplx{los} + nlos, d};
}

/// Adds one target's noise-free return with a given complex amplitude.
inline void add_echo(DataCube& X, const Target& t, const TargetEcho& echo, const RadarConfig& cfg,
                     const PulseTrain& train) {
    const std::size_t P = cfg.P, L = cfg.L, M = cfg.M;
    const double k = 2.0 * kPi / cfg.wavelength;
    const double sphi = std::sin(deg_to_rad(t.azimuth_deg));
    std::vector<cplx> steer(L);
    for (std::size_t l = 0; l < L; ++l)
        steer[l] = std::polar(1.0, k * static_cast<double>(l) * cfg.element_spacing * sphi);
    const double v = t.radial_velocity();
    const std::size_t d = static_cast<std::size_t>(echo.delay_bin);
    const std::size_t n = train.occupied_len;
    for (std::size_t m = 0; m < M; ++m) {
        const cplx dop = std::polar(1.0, 2.0 * k * v * static_cast<double>(m) * cfg.pri);
        const cplx am = echo.amplitude * dop;
        const auto g = train.pulse(m);
        CMatrix& pk = X.packet(m);
        for (std::size_t q = 0; q < n && d + q < P; ++q) {
            const cplx s = am * g[q];
            auto row = pk.row(d + q);
            for (std::size_t l = 0; l < L; ++l) row[l] += s * steer[l];
        }
    }
}

/// Received cube for the given targets. RNG draws are consumed in a fixed
/// order (per target: RCS then multipath; then noise in p, l, m order) so a
/// fixed seed reproduces the cube bit for bit.
inline DataCube synthesize_cube(const RadarConfig& cfg, std::span<const Target> targets, const ChannelModel& chan,
                                const PulseTrain& train, Rng& rng) {
    cfg.validate();
    chan.validate();
    if (train.num_pulses() != cfg.M || train.num_samples() != cfg.P)
        throw std::invalid_argument("synthesize_cube: pulse train does not match config");
    DataCube X(cfg.P, cfg.L, cfg.M);
    std::vector<TargetEcho> echoes;
    echoes.reserve(targets.size());
    for (const auto& t : targets) echoes.push_back(draw_echo(t, cfg, chan, rng));
    for (std::size_t i = 0; i < targets.size(); ++i) add_echo(X, targets[i], echoes[i], cfg, train);
    const double pn = chan.noise_mw();
    if (pn > 0.0) {
        std::normal_distribution<double> n(0.0, std::sqrt(pn / 2.0));
        for (std::size_t m = 0; m < cfg.M; ++m) {
            for (auto& v : X.packet(m).data()) {
                const double re = n(rng);
                const double im = n(rng);
                v += cplx{re, im};
            }
        }
    }
    return X;
}

inline constexpr double kScnrCapDb = 400.0;

/// P_s / (P_n + P_c) in dB with P_s = A^2 <sigma> / r_max^4; saturates at
/// kScnrCapDb when both interference terms vanish.
inline double scnr_db(const RadarConfig& cfg, const ChannelModel& chan, double sigma_mean) {
    const double A = chan.amplitude_constant(cfg);
    const double rmax = cfg.r_max();
    const double ps = A * A * sigma_mean / (rmax * rmax * rmax * rmax);
    const double pi = chan.noise_mw() + chan.clutter_mw();
    if (pi <= 0.0) return kScnrCapDb;
    return std::min(10.0 * std::log10(ps / pi), kScnrCapDb);
}

}  // namespace arsp
