#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "arsp/clean.hpp"
#include "arsp/doppler.hpp"

namespace arsp {

/// Noise floor in dBm from the first two packets. Each packet is projected
/// onto L orthogonal DFT beams and every beam is matched filtered with its
/// pulse; summing the complementary pair cancels range sidelobes. Targets
/// then occupy a few beams and cells, so the median cell power is a noise
/// statistic (ln 2 times the mean of an exponential variable). With a single
/// pulse or repeated sequences only packet 0 is used. A zero cube returns -inf.
inline double estimate_noise_floor(const DataCube& X, const PulseTrain& train, const CMatrix& gt) {
    const std::size_t P = X.P(), L = X.L();
    const bool pair = X.M() >= 2 && train.G.rows() >= 2 && !std::ranges::equal(train.G.row(0), train.G.row(1));
    const std::size_t used = pair ? 2 : 1;
    CMatrix acc(L, P);
    std::vector<cplx> row(L), beam(P);
    for (std::size_t m = 0; m < used; ++m) {
        CMatrix B(L, P);
        for (std::size_t p = 0; p < P; ++p) {
            for (std::size_t l = 0; l < L; ++l) row[l] = X(p, l, m);
            const auto spec = dft(row);
            for (std::size_t k = 0; k < L; ++k) B(k, p) = spec[k];
        }
        for (std::size_t k = 0; k < L; ++k) {
            std::copy(B.row(k).begin(), B.row(k).end(), beam.begin());
            const auto z = mf_freq(beam, gt.row(m));
            for (std::size_t p = 0; p < P; ++p) acc(k, p) += z[p];
        }
    }
    std::vector<double> power(acc.size());
    std::transform(acc.data().begin(), acc.data().end(), power.begin(), [](cplx v) { return std::norm(v); });
    auto mid = power.begin() + static_cast<std::ptrdiff_t>(power.size() / 2);
    std::nth_element(power.begin(), mid, power.end());
    const double median = *mid;
    if (!(median > 0.0)) return -std::numeric_limits<double>::infinity();
    double energy = 0.0;
    for (std::size_t m = 0; m < used; ++m)
        for (const auto& g : train.G.row(m)) energy += std::norm(g);
    return mw_to_dbm(median / (std::log(2.0) * energy * static_cast<double>(L)));
}

/// Per-tier noise-floor switch points: SARP below the threshold, MJARP at or
/// above it. Tier 1 is the strongest class.
struct SwitchPolicy {
    std::map<int, double> thresholds{{1, -78.0}, {2, -88.0}, {3, -98.0}};
    std::size_t sarp_if = 512;
    /// When nonzero, ranks are split evenly over the tiers assuming this
    /// many extractions; otherwise rank n maps to the n-th tier.
    std::size_t expected_targets = 0;

    void validate() const {
        if (thresholds.empty()) throw std::invalid_argument("SwitchPolicy: no thresholds");
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& [tier, dbm] : thresholds) {
            if (!std::isfinite(dbm)) throw std::invalid_argument("SwitchPolicy: thresholds must be finite");
            if (dbm > prev) throw std::invalid_argument("SwitchPolicy: thresholds must fall with weaker tiers");
            prev = dbm;
        }
        if (sarp_if < 1) throw std::invalid_argument("SwitchPolicy: sarp_if must be >= 1");
    }

    /// Tier assumed for the n-th CLEAN extraction (0-based); ranks past the
    /// table reuse the weakest tier.
    int tier_for_rank(std::size_t n) const {
        std::size_t idx = n;
        if (expected_targets > 0) idx = n * thresholds.size() / expected_targets;
        auto it = thresholds.begin();
        for (std::size_t k = 0; k < idx && std::next(it) != thresholds.end(); ++k) ++it;
        return it->first;
    }
};

struct RspChoice {
    Pipeline mode = Pipeline::mjarp;
    std::size_t integration_factor = 0;  ///< only meaningful for SARP

    bool operator==(const RspChoice&) const = default;
};

inline RspChoice select_rsp(double noise_floor_dbm, int tier, const SwitchPolicy& policy) {
    const auto it = policy.thresholds.find(tier);
    if (it == policy.thresholds.end()) throw std::invalid_argument("select_rsp: unknown target tier " + std::to_string(tier));
    if (noise_floor_dbm < it->second) return {Pipeline::sarp, policy.sarp_if};
    return {Pipeline::mjarp, 0};
}

struct ReconfigResult {
    double noise_floor_dbm = 0.0;
    std::vector<Detection> detections;  ///< sorted by decreasing |amp|, source = pipeline used
};

/// CLEAN on packet 0 where extraction n runs the pipeline chosen for the
/// tier of rank n at the sensed noise floor. With `doppler` set, each
/// detection gets a MUSIC velocity from the full cube.
inline ReconfigResult reconfigurable_localize(const DataCube& X, const SwitchPolicy& policy, const RspSetup& s,
                                              const CleanConfig& cc, bool doppler = false,
                                              const MusicOptions& mo = {}) {
    policy.validate();
    ReconfigResult out;
    out.noise_floor_dbm = estimate_noise_floor(X, s.train, s.gt);
    RspSetup local = s;
    local.cfg.integration_factor = policy.sarp_if;
    local.cfg.validate();
    const double nf = out.noise_floor_dbm;
    out.detections = clean_in_dbf_image(X.packet(0), local, cc, [&](std::size_t n) {
                         return select_rsp(nf, policy.tier_for_rank(n), policy).mode;
                     }).detections;
    if (doppler && X.M() >= 3 && !out.detections.empty()) {
        const auto z = slow_time_vectors(X, out.detections, s);
        estimate_velocities(out.detections, z, s.cfg, mo);
    }
    return out;
}

}  // namespace arsp
