#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "arsp/rsp.hpp"

namespace arsp {

/// Stop once the normalized peak amplitude |a| drops below `threshold`.
struct CleanConfig {
    double threshold = 1e-12;
    std::size_t max_iters = 10;

    void validate() const {
        if (!(threshold > 0.0)) throw std::invalid_argument("CleanConfig: threshold must be positive");
        if (max_iters < 1) throw std::invalid_argument("CleanConfig: max_iters must be >= 1");
    }
};

/// Half the amplitude of a unit-RCS line-of-sight echo at maximum range.
inline double default_clean_threshold(const ChannelModel& chan, double margin = 0.5) {
    return margin * std::sqrt(dbm_to_mw(chan.ps_ref_dbm));
}

/// Time-domain packet a point target at the detected cell would produce on
/// the first pulse.
inline CMatrix psr_synthesize(const Detection& det, const RspSetup& s) {
    const auto& cfg = s.cfg;
    if (det.r_idx >= cfg.P) throw target_out_of_window("psr_synthesize: range bin outside the window");
    if (det.phi_idx >= s.W.num_angles()) throw std::invalid_argument("psr_synthesize: azimuth index off grid");
    CMatrix S(cfg.P, cfg.L);
    if (det.amp == cplx{}) return S;
    const auto g0 = s.train.pulse(0);
    const auto w = s.W.weights(det.phi_idx);
    for (std::size_t q = 0; q < s.train.occupied_len && det.r_idx + q < cfg.P; ++q) {
        const cplx v = det.amp * g0[q];
        auto row = S.row(det.r_idx + q);
        for (std::size_t l = 0; l < cfg.L; ++l) row[l] = v * std::conj(w[l]);
    }
    return S;
}

struct CleanResult {
    std::vector<Detection> detections;     ///< sorted by decreasing |amp|
    std::vector<double> residue_energy;    ///< working-image energy after each subtraction
};

namespace detail {

inline double energy(const CMatrix& m) {
    double e = 0.0;
    for (const auto& v : m.data()) e += std::norm(v);
    return e;
}

inline void sort_by_amplitude(std::vector<Detection>& d) {
    std::stable_sort(d.begin(), d.end(),
                     [](const Detection& a, const Detection& b) { return std::abs(a.amp) > std::abs(b.amp); });
}

}  // namespace detail

/// Joint map rebuilt from a DBF image, one matched filter per beam.
template <PipelineNumerics N = ExactNumerics>
RangeAzimuthMap gamma_from_dbf_image(const CMatrix& Y, std::span<const cplx> gt0, OpCounter* ops = nullptr,
                                     const N& num = {}) {
    RangeAzimuthMap G{CMatrix(Y.rows(), Y.cols()), MapKind::jarp_gamma};
    for (std::size_t i = 0; i < Y.rows(); ++i) {
        const auto row = mf_freq(Y.row(i), gt0, ops, num);
        std::copy(row.begin(), row.end(), G.vals.row(i).begin());
    }
    return G;
}

/// CLEAN in the joint-map domain: the PSR is pushed through the full joint
/// pipeline and subtracted from the working map.
template <PipelineNumerics N = ExactNumerics>
CleanResult clean_in_map(const CMatrix& packet, const RspSetup& s, const CleanConfig& cc, Pipeline tag,
                         const N& num = {}) {
    cc.validate();
    CleanResult out;
    auto work = jarp_map(fast_time_fft(packet, nullptr, num), s.W, s.gt.row(0), nullptr, num);
    for (std::size_t it = 0; it < cc.max_iters; ++it) {
        const auto det = detect_in_map(work, s.cfg, s.gain, tag);
        if (!(std::abs(det.amp) >= cc.threshold)) break;
        out.detections.push_back(det);
        const auto psr = jarp_map(fast_time_fft(psr_synthesize(det, s), nullptr, num), s.W, s.gt.row(0), nullptr, num);
        work.vals -= psr.vals;
        out.residue_energy.push_back(detail::energy(work.vals));
    }
    detail::sort_by_amplitude(out.detections);
    return out;
}

/// CLEAN on the DBF image. `mode_for(n)` picks the estimator for the n-th
/// extraction: SARP integrates the image, the joint modes rebuild the joint
/// map from it. PSRs are subtracted after beamforming only.
template <class ModeFn, PipelineNumerics N = ExactNumerics>
CleanResult clean_in_dbf_image(const CMatrix& packet, const RspSetup& s, const CleanConfig& cc, ModeFn mode_for,
                               const N& num = {}) {
    cc.validate();
    CleanResult out;
    auto work = sarp_dbf(packet, s.W, nullptr, num);
    for (std::size_t it = 0; it < cc.max_iters; ++it) {
        const Pipeline mode = mode_for(it);
        const auto det = mode == Pipeline::sarp
                             ? detect_in_dbf_image(work, s.gt.row(0), s.cfg, s.gain, nullptr, num)
                             : detect_in_map(gamma_from_dbf_image(work.vals, s.gt.row(0), nullptr, num), s.cfg,
                                             s.gain, mode);
        if (!(std::abs(det.amp) >= cc.threshold)) break;
        out.detections.push_back(det);
        work.vals -= sarp_dbf(psr_synthesize(det, s), s.W, nullptr, num).vals;
        out.residue_energy.push_back(detail::energy(work.vals));
    }
    detail::sort_by_amplitude(out.detections);
    return out;
}

template <PipelineNumerics N = ExactNumerics>
CleanResult clean_run(const CMatrix& packet, Pipeline mode, const RspSetup& s, const CleanConfig& cc,
                      const N& num = {}) {
    if (mode == Pipeline::sarp)
        return clean_in_dbf_image(packet, s, cc, [](std::size_t) { return Pipeline::sarp; }, num);
    return clean_in_map(packet, s, cc, mode, num);
}

template <PipelineNumerics N = ExactNumerics>
std::vector<Detection> clean_iterate(const CMatrix& packet, Pipeline mode, const RspSetup& s,
                                     const CleanConfig& cc, const N& num = {}) {
    return clean_run(packet, mode, s, cc, num).detections;
}

}  // namespace arsp
