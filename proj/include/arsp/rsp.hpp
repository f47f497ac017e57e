#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arsp/arithmetic.hpp"
#include "arsp/config.hpp"
#include "arsp/core.hpp"
#include "arsp/fft.hpp"
#include "arsp/scene.hpp"
#include "arsp/waveform.hpp"

namespace arsp {

enum class Pipeline { sarp, mjarp, jarp };

inline std::string to_string(Pipeline p) {
    switch (p) {
        case Pipeline::sarp: return "SARP";
        case Pipeline::mjarp: return "MJARP";
        case Pipeline::jarp: return "JARP";
    }
    return "?";
}

/// Processing stages that can carry their own arithmetic.
enum class Stage { dbf, fft, cm, ifft };

/// Supplies the arithmetic of each stage and the power-of-two scale at which
/// that stage holds its operands (stage value = physical value * scale).
/// Kernels take physical values in and hand physical values out.
template <class N>
concept PipelineNumerics = requires(const N& n, Stage s) {
    { n.arith(s) } -> StageArithmetic;
    { n.scale(s) } -> std::convertible_to<double>;
};

struct ExactNumerics {
    ExactArithmetic arith(Stage) const noexcept { return {}; }
    double scale(Stage) const noexcept { return 1.0; }
};

struct Float32Numerics {
    Float32Arithmetic arith(Stage) const noexcept { return {}; }
    double scale(Stage) const noexcept { return 1.0; }
};

/// Beamforming weights, one row per grid angle.
struct SteeringMatrix {
    CMatrix W;
    std::vector<double> grid_deg;
    std::size_t num_angles() const noexcept { return W.rows(); }
    std::span<const cplx> weights(std::size_t i) const { return W.row(i); }
};

inline SteeringMatrix steering_matrix(const RadarConfig& cfg) {
    cfg.validate();
    SteeringMatrix s{CMatrix(cfg.num_angles(), cfg.L), cfg.angle_grid_deg()};
    const double k = 2.0 * kPi / cfg.wavelength;
    for (std::size_t i = 0; i < s.grid_deg.size(); ++i) {
        const double sphi = std::sin(deg_to_rad(s.grid_deg[i]));
        for (std::size_t l = 0; l < cfg.L; ++l)
            s.W(i, l) = std::polar(1.0, -k * static_cast<double>(l) * cfg.element_spacing * sphi);
    }
    return s;
}

enum class MapKind { jarp_gamma, sarp_y };

/// Complex I x P image: Gamma for the joint pipelines, the DBF image Y for SARP.
struct RangeAzimuthMap {
    CMatrix vals;
    MapKind kind = MapKind::jarp_gamma;
};

struct Detection {
    cplx amp{};
    std::size_t r_idx = 0;
    std::size_t phi_idx = 0;
    double range_m = 0.0;
    double azimuth_deg = 0.0;
    double velocity_mps = 0.0;
    Pipeline source = Pipeline::mjarp;
};

inline Detection make_detection(cplx amp, std::size_t phi_idx, std::size_t r_idx, const RadarConfig& cfg,
                                Pipeline src) {
    Detection d;
    d.amp = amp;
    d.r_idx = r_idx;
    d.phi_idx = phi_idx;
    d.range_m = cfg.range_of_bin(r_idx);
    d.azimuth_deg = cfg.angle_deg(phi_idx);
    d.source = src;
    return d;
}

/// Peak gain of the joint map for a unit-amplitude point target.
inline double coherent_gain(const PulseTrain& train, const RadarConfig& cfg) {
    double e = 0.0;
    for (const auto& v : train.pulse(0)) e += std::norm(v);
    return static_cast<double>(cfg.L) * e;
}

/// Everything derived once from a RadarConfig and shared by the pipelines.
struct RspSetup {
    RadarConfig cfg;
    PulseTrain train;
    SteeringMatrix W;
    CMatrix gt;  ///< transformed pulses, one row per pulse
    double gain = 1.0;

    RspSetup() = default;
    explicit RspSetup(const RadarConfig& c) : RspSetup(c, default_pulse_train(c)) {}
    RspSetup(const RadarConfig& c, PulseTrain t)
        : cfg(c), train(std::move(t)), W(steering_matrix(c)), gt(freq_domain_sequences(train)),
          gain(coherent_gain(train, c)) {}
};

// --- kernels ----------------------------------------------------------------

/// Column-wise forward transform of a P x L packet.
template <PipelineNumerics N = ExactNumerics>
CMatrix fast_time_fft(const CMatrix& packet, OpCounter* ops = nullptr, const N& num = {}) {
    const std::size_t P = packet.rows(), L = packet.cols();
    if (!is_power_of_two(P)) throw std::invalid_argument("fast_time_fft: P must be a power of two");
    const auto a = num.arith(Stage::fft);
    const double s = num.scale(Stage::fft);
    CMatrix out(P, L);
    std::vector<cplx> col(P);
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t p = 0; p < P; ++p) col[p] = a.load(packet(p, l) * s);
        fft_radix2(std::span<cplx>(col), FftDirection::forward, a, ops ? &ops->cmac_fft : nullptr);
        for (std::size_t p = 0; p < P; ++p) out(p, l) = col[p] / s;
    }
    return out;
}

/// Z[i, p] = sum_l X[p, l] W[i, l]. Used on time-domain packets (SARP) and on
/// transformed packets (joint pipelines).
template <PipelineNumerics N = ExactNumerics>
CMatrix beamform(const CMatrix& X, const SteeringMatrix& W, OpCounter* ops = nullptr, const N& num = {}) {
    const std::size_t P = X.rows(), L = X.cols(), I = W.num_angles();
    if (W.W.cols() != L) throw std::invalid_argument("beamform: antenna count mismatch");
    const auto a = num.arith(Stage::dbf);
    const double s = num.scale(Stage::dbf);
    CMatrix xs(P, L);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t l = 0; l < L; ++l) xs(p, l) = a.load(X(p, l) * s);
    CMatrix ws(I, L);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t l = 0; l < L; ++l) ws(i, l) = a.coef(W.W(i, l));
    CMatrix Z(I, P);
    for (std::size_t p = 0; p < P; ++p) {
        const auto x = xs.row(p);
        for (std::size_t i = 0; i < I; ++i) {
            const auto w = ws.row(i);
            cplx acc{};
            for (std::size_t l = 0; l < L; ++l) acc = a.add(acc, a.mul(x[l], w[l]));
            Z(i, p) = acc / s;
        }
    }
    if (ops) ops->cmac_dbf += static_cast<std::uint64_t>(P) * L * I;
    return Z;
}

/// In place: z[p] <- z[p] * conj(gt[p]).
template <PipelineNumerics N = ExactNumerics>
void conj_multiply(std::span<cplx> z, std::span<const cplx> gt, OpCounter* ops = nullptr, const N& num = {}) {
    if (z.size() != gt.size()) throw std::invalid_argument("conj_multiply: length mismatch");
    const auto a = num.arith(Stage::cm);
    const double s = num.scale(Stage::cm);
    for (std::size_t p = 0; p < z.size(); ++p) z[p] = a.mul(a.load(z[p] * s), a.coef(std::conj(gt[p]))) / s;
    if (ops) ops->cm += z.size();
}

/// In place inverse transform scaled by 1/P.
template <PipelineNumerics N = ExactNumerics>
void inverse_fft(std::span<cplx> z, OpCounter* ops = nullptr, const N& num = {}) {
    const auto a = num.arith(Stage::ifft);
    const double s = num.scale(Stage::ifft);
    for (auto& v : z) v = a.load(v * s);
    fft_radix2(z, FftDirection::inverse, a, ops ? &ops->cmac_ifft : nullptr);
    const double out = s * static_cast<double>(z.size());
    for (auto& v : z) v /= out;
}

/// Joint range-azimuth map of one transformed packet.
template <PipelineNumerics N = ExactNumerics>
RangeAzimuthMap jarp_map(const CMatrix& packet_fd, const SteeringMatrix& W, std::span<const cplx> gt,
                         OpCounter* ops = nullptr, const N& num = {}) {
    if (gt.size() != packet_fd.rows()) throw std::invalid_argument("jarp_map: sequence length mismatch");
    RangeAzimuthMap map{beamform(packet_fd, W, ops, num), MapKind::jarp_gamma};
    for (std::size_t i = 0; i < map.vals.rows(); ++i) {
        conj_multiply(map.vals.row(i), gt, ops, num);
        inverse_fft(map.vals.row(i), ops, num);
    }
    return map;
}

/// DBF image of a time-domain packet.
template <PipelineNumerics N = ExactNumerics>
RangeAzimuthMap sarp_dbf(const CMatrix& packet, const SteeringMatrix& W, OpCounter* ops = nullptr,
                         const N& num = {}) {
    return {beamform(packet, W, ops, num), MapKind::sarp_y};
}

/// Mean magnitude of each beam over `factor` fast-time samples: the leading
/// samples, or every (P/factor)-th sample.
inline std::vector<double> noncoherent_integrate(const CMatrix& Y, std::size_t factor,
                                                 IntegrationMode mode = IntegrationMode::first) {
    const std::size_t P = Y.cols();
    if (factor < 1 || factor > P || P % factor != 0)
        throw std::invalid_argument("noncoherent_integrate: integration factor must divide P");
    const std::size_t stride = mode == IntegrationMode::first ? 1 : P / factor;
    std::vector<double> prof(Y.rows());
    for (std::size_t i = 0; i < Y.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < factor; ++j) acc += std::abs(Y(i, j * stride));
        prof[i] = acc / static_cast<double>(factor);
    }
    return prof;
}

/// gamma[r] = sum_p y[p + r] conj(g[p]), zero outside the support.
inline std::vector<cplx> mf_time(std::span<const cplx> y, std::span<const cplx> g) {
    if (y.size() != g.size()) throw std::invalid_argument("mf_time: length mismatch");
    const std::size_t P = y.size();
    std::vector<cplx> out(P);
    for (std::size_t r = 0; r < P; ++r) {
        cplx acc{};
        for (std::size_t p = 0; p + r < P; ++p) acc += y[p + r] * std::conj(g[p]);
        out[r] = acc;
    }
    return out;
}

/// IFFT(FFT(y) .* conj(gt)): circular correlation with the transmit sequence.
template <PipelineNumerics N = ExactNumerics>
std::vector<cplx> mf_freq(std::span<const cplx> y, std::span<const cplx> gt, OpCounter* ops = nullptr,
                          const N& num = {}) {
    if (y.size() != gt.size()) throw std::invalid_argument("mf_freq: length mismatch");
    if (!is_power_of_two(y.size())) throw std::invalid_argument("mf_freq: length must be a power of two");
    const auto a = num.arith(Stage::fft);
    const double s = num.scale(Stage::fft);
    std::vector<cplx> z(y.size());
    for (std::size_t p = 0; p < y.size(); ++p) z[p] = a.load(y[p] * s);
    fft_radix2(std::span<cplx>(z), FftDirection::forward, a, ops ? &ops->cmac_fft : nullptr);
    for (auto& v : z) v /= s;
    conj_multiply(std::span<cplx>(z), gt, ops, num);
    inverse_fft(std::span<cplx>(z), ops, num);
    return z;
}

/// One cell of the joint map evaluated directly: beamform toward one angle,
/// filter, and take a single inverse-DFT term at r_idx. Equals
/// jarp_map(packet_fd, W, gt).vals(phi, r_idx).
template <PipelineNumerics N = ExactNumerics>
cplx mjarp_slow_time_sample(const CMatrix& packet_fd, std::span<const cplx> w, std::span<const cplx> gt,
                            std::size_t r_idx, OpCounter* ops = nullptr, const N& num = {}) {
    const std::size_t P = packet_fd.rows(), L = packet_fd.cols();
    if (r_idx >= P) throw std::invalid_argument("mjarp_slow_time_sample: range bin outside the window");
    if (w.size() != L || gt.size() != P) throw std::invalid_argument("mjarp_slow_time_sample: size mismatch");
    const auto ad = num.arith(Stage::dbf);
    const auto ac = num.arith(Stage::cm);
    const auto ai = num.arith(Stage::ifft);
    const double sd = num.scale(Stage::dbf), sc = num.scale(Stage::cm), si = num.scale(Stage::ifft);
    std::vector<cplx> ws(L);
    for (std::size_t l = 0; l < L; ++l) ws[l] = ad.coef(w[l]);
    cplx acc{};
    for (std::size_t p = 0; p < P; ++p) {
        cplx b{};
        for (std::size_t l = 0; l < L; ++l) b = ad.add(b, ad.mul(ad.load(packet_fd(p, l) * sd), ws[l]));
        b /= sd;
        const cplx c = ac.mul(ac.load(b * sc), ac.coef(std::conj(gt[p]))) / sc;
        const std::size_t k = (p * r_idx) % P;
        const cplx e = std::polar(1.0, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(P));
        acc = ai.add(acc, ai.mul(ai.load(c * si), ai.coef(e)));
    }
    if (ops) {
        ops->cmac_dbf += static_cast<std::uint64_t>(P) * L;
        ops->cm += P;
        ops->cmac_ifft += P;
    }
    return acc / (si * static_cast<double>(P));
}

// --- peak search --------------------------------------------------------------

struct Peak1d {
    std::size_t index = 0;
    double value = 0.0;
};

struct Peak2d {
    std::size_t row = 0;
    std::size_t col = 0;
    cplx value{};
};

/// Global maximum; the lowest index wins ties.
inline Peak1d peak_search_1d(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("peak_search_1d: empty input");
    Peak1d pk{0, v[0]};
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > pk.value) pk = {i, v[i]};
    return pk;
}

/// Maximum magnitude; reports the magnitude.
inline Peak1d peak_search_1d(std::span<const cplx> v) {
    if (v.empty()) throw std::invalid_argument("peak_search_1d: empty input");
    Peak1d pk{0, std::abs(v[0])};
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double m = std::abs(v[i]);
        if (m > pk.value) pk = {i, m};
    }
    return pk;
}

/// Maximum magnitude in row-major order; the first occurrence wins ties.
inline Peak2d peak_search_2d(const CMatrix& map) {
    if (map.empty()) throw std::invalid_argument("peak_search_2d: empty input");
    Peak2d pk{0, 0, map(0, 0)};
    double best = std::norm(map(0, 0));
    for (std::size_t r = 0; r < map.rows(); ++r)
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const double m = std::norm(map(r, c));
            if (m > best) {
                best = m;
                pk = {r, c, map(r, c)};
            }
        }
    return pk;
}

// --- detection from images -----------------------------------------------------

/// Strongest cell of a joint map.
inline Detection detect_in_map(const RangeAzimuthMap& gamma, const RadarConfig& cfg, double gain,
                               Pipeline src = Pipeline::mjarp) {
    const auto pk = peak_search_2d(gamma.vals);
    return make_detection(pk.value / gain, pk.row, pk.col, cfg, src);
}

/// Azimuth from the integrated DBF image, then range from the matched filter
/// on the selected beam.
template <PipelineNumerics N = ExactNumerics>
Detection detect_in_dbf_image(const RangeAzimuthMap& Y, std::span<const cplx> gt0, const RadarConfig& cfg,
                              double gain, OpCounter* ops = nullptr, const N& num = {}) {
    const auto prof = noncoherent_integrate(Y.vals, cfg.integration_factor, cfg.integration_mode);
    const std::size_t phi = peak_search_1d(std::span<const double>(prof)).index;
    const auto gamma = mf_freq(Y.vals.row(phi), gt0, ops, num);
    const std::size_t r = peak_search_1d(std::span<const cplx>(gamma)).index;
    return make_detection(gamma[r] / gain, phi, r, cfg, Pipeline::sarp);
}

// --- single-target processing of a full cube -------------------------------------

struct CubeResult {
    Detection det;
    std::vector<cplx> zeta;  ///< slow-time samples at the detected cell
    OpCounter ops;
};

/// Locates the strongest target on packet 0 with the chosen pipeline and
/// collects its slow-time vector over the remaining packets.
template <PipelineNumerics N = ExactNumerics>
CubeResult process_cube(const DataCube& X, Pipeline mode, const RadarConfig& cfg, const PulseTrain& train,
                        const SteeringMatrix& W, const CMatrix& gt, const N& num = {}) {
    CubeResult res;
    const double gain = coherent_gain(train, cfg);
    OpCounter* ops = &res.ops;
    const std::size_t M = X.M();
    res.zeta.resize(M);
    if (mode == Pipeline::sarp) {
        const auto Y = sarp_dbf(X.packet(0), W, ops, num);
        res.det = detect_in_dbf_image(Y, gt.row(0), cfg, gain, ops, num);
        res.zeta[0] = res.det.amp * gain;
    } else {
        const auto Xf = fast_time_fft(X.packet(0), ops, num);
        const auto G0 = jarp_map(Xf, W, gt.row(0), ops, num);
        res.det = detect_in_map(G0, cfg, gain, mode);
        res.zeta[0] = G0.vals(res.det.phi_idx, res.det.r_idx);
    }
    for (std::size_t m = 1; m < M; ++m) {
        const auto Xf = fast_time_fft(X.packet(m), ops, num);
        if (mode == Pipeline::jarp) {
            const auto Gm = jarp_map(Xf, W, gt.row(m), ops, num);
            res.zeta[m] = Gm.vals(res.det.phi_idx, res.det.r_idx);
        } else {
            res.zeta[m] = mjarp_slow_time_sample(Xf, W.weights(res.det.phi_idx), gt.row(m), res.det.r_idx, ops, num);
        }
    }
    return res;
}

// --- operation-count model ---------------------------------------------------------

/// Closed-form tallies for one target over M packets.
inline OpCounter expected_ops(Pipeline mode, std::size_t P, std::size_t L, std::size_t I, std::size_t M) {
    using u64 = std::uint64_t;
    const u64 lg = log2_exact(P);
    const u64 rest = M - 1;
    OpCounter o;
    if (mode == Pipeline::sarp) {
        o.cmac_dbf = u64{P} * L * I;
        o.cmac_fft = u64{P} / 2 * lg;
        o.cmac_ifft = u64{P} / 2 * lg;
        o.cm = P;
    } else {
        o.cmac_dbf = u64{P} * L * I;
        o.cmac_fft = u64{P} * L / 2 * lg;
        o.cmac_ifft = u64{P} * I / 2 * lg;
        o.cm = u64{P} * I;
    }
    if (mode == Pipeline::jarp) {
        o.cmac_dbf += u64{P} * L * I * rest;
        o.cmac_fft += u64{P} * L * rest / 2 * lg;
        o.cmac_ifft += u64{P} * I * rest / 2 * lg;
        o.cm += u64{P} * I * rest;
    } else {
        o.cmac_dbf += u64{P} * L * rest;
        o.cmac_fft += u64{P} * L * rest / 2 * lg;
        o.cmac_ifft += u64{P} * rest;
        o.cm += u64{P} * rest;
    }
    return o;
}

struct OpReportRow {
    std::string quantity;
    std::uint64_t expected = 0;
    std::uint64_t actual = 0;
    bool ok() const noexcept { return expected == actual; }
};

inline std::vector<OpReportRow> op_report(const OpCounter& actual, Pipeline mode, const RadarConfig& cfg) {
    const auto e = expected_ops(mode, cfg.P, cfg.L, cfg.num_angles(), cfg.M);
    return {{"cmac_dbf", e.cmac_dbf, actual.cmac_dbf},
            {"cmac_fft", e.cmac_fft, actual.cmac_fft},
            {"cmac_ifft", e.cmac_ifft, actual.cmac_ifft},
            {"cm", e.cm, actual.cm}};
}

}  // namespace arsp
