#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "arsp/adaptive.hpp"

namespace arsp {

/// Straight-line mover; the BS sits at the origin looking along +y, so
/// azimuth is measured from +y toward +x.
struct MuTrajectory {
    double x0 = 0.0, y0 = 10.0;
    double vx = 0.0, vy = 0.0;
    double rcs_mean = 1.0;
    bool is_clutter = false;

    double x(double t) const { return x0 + vx * t; }
    double y(double t) const { return y0 + vy * t; }
    double range(double t) const { return std::hypot(x(t), y(t)); }
    double azimuth_deg(double t) const { return rad_to_deg(std::atan2(x(t), y(t))); }
    /// Rate of change of range (positive when receding).
    double radial_velocity(double t) const { return (x(t) * vx + y(t) * vy) / range(t); }

    Target at(double t) const { return {range(t), azimuth_deg(t), radial_velocity(t), rcs_mean, is_clutter}; }
};

enum class IsacConfig {
    all_sarp,
    sarp_t12,  ///< tiers 1 and 2 on SARP, tier 3 on MJARP
    sarp_t1,   ///< tier 1 on SARP, tiers 2 and 3 on MJARP
    all_mjarp,
    reconfigurable,
    baseline,  ///< 802.11ad-style sector sweep
};

inline const char* to_string(IsacConfig c) {
    switch (c) {
        case IsacConfig::all_sarp: return "all-sarp";
        case IsacConfig::sarp_t12: return "sarp-t12";
        case IsacConfig::sarp_t1: return "sarp-t1";
        case IsacConfig::all_mjarp: return "all-mjarp";
        case IsacConfig::reconfigurable: return "reconfigurable";
        case IsacConfig::baseline: return "baseline";
    }
    return "?";
}

inline IsacConfig isac_config_from_string(const std::string& s) {
    for (auto c : {IsacConfig::all_sarp, IsacConfig::sarp_t12, IsacConfig::sarp_t1, IsacConfig::all_mjarp,
                   IsacConfig::reconfigurable, IsacConfig::baseline})
        if (s == to_string(c)) return c;
    throw std::invalid_argument("unknown ISAC configuration '" + s + "'");
}

inline constexpr IsacConfig kAllIsacConfigs[] = {IsacConfig::all_sarp,       IsacConfig::sarp_t12,
                                                 IsacConfig::sarp_t1,        IsacConfig::all_mjarp,
                                                 IsacConfig::reconfigurable, IsacConfig::baseline};

/// RSP time per CLEAN extraction, relative to one JARP run.
struct LatencyModel {
    double unit_s = 0.124;
    double jarp = 1.0;
    double mjarp = 1.0 / 2.15;
    double sarp = 1.0 / 4.3;

    double of(Pipeline p) const {
        switch (p) {
            case Pipeline::sarp: return unit_s * sarp;
            case Pipeline::mjarp: return unit_s * mjarp;
            case Pipeline::jarp: return unit_s * jarp;
        }
        return unit_s;
    }
    void validate() const {
        if (!(unit_s > 0.0 && jarp > 0.0 && mjarp > 0.0 && sarp > 0.0))
            throw std::invalid_argument("LatencyModel: latencies must be positive");
    }
};

struct BaselineModel {
    std::size_t sectors = 64;
    double per_sector_s = 5e-3;

    double alignment_s() const { return static_cast<double>(sectors) * per_sector_s; }
    void validate() const {
        if (sectors < 1 || !(per_sector_s > 0.0)) throw std::invalid_argument("BaselineModel: invalid sector sweep");
    }
};

struct IsacScenario {
    std::vector<MuTrajectory> mus;
    double horizon_s = 1.0;
    double quantum_s = 1e-3;
    double symbol_rate = 1.76e9;
    double beamwidth_deg = 0.0;  ///< 0 selects 102 / L
    double static_speed_mps = 0.5;
    RadarConfig radar{};
    ChannelModel channel{};
    LatencyModel latency{};
    BaselineModel baseline{};
    SwitchPolicy policy{};
    MusicOptions music{};
    std::uint64_t seed = 1;

    double beamwidth() const { return beamwidth_deg > 0.0 ? beamwidth_deg : 102.0 / static_cast<double>(radar.L); }
    std::size_t num_served() const {
        return static_cast<std::size_t>(std::count_if(mus.begin(), mus.end(), [](const auto& m) { return !m.is_clutter; }));
    }

    void validate() const {
        if (!(horizon_s > 0.0)) throw std::invalid_argument("IsacScenario: horizon must be positive");
        if (!(quantum_s > 0.0) || quantum_s > horizon_s) throw std::invalid_argument("IsacScenario: bad event quantum");
        if (!(symbol_rate > 0.0)) throw std::invalid_argument("IsacScenario: symbol rate must be positive");
        if (radar.M < 3) throw std::invalid_argument("IsacScenario: Doppler needs at least 3 pulses");
        radar.validate();
        channel.validate();
        latency.validate();
        baseline.validate();
        policy.validate();
        // Range along a straight line is convex, so the endpoints bound it.
        for (const auto& m : mus)
            for (double t : {0.0, horizon_s})
                if (!(m.range(t) > 0.0) || radar.delay_bin(m.range(t)) >= static_cast<long>(radar.P / 2))
                    throw std::invalid_argument("IsacScenario: trajectory leaves the radar window");
    }
};

struct TimelineEntry {
    enum class State { align, comm } state;
    double start = 0.0;
    double duration = 0.0;
};

struct ThroughputReport {
    IsacConfig config = IsacConfig::all_sarp;
    double noise_dbm = 0.0;
    std::vector<double> throughput_msps;  ///< per non-clutter MU, in scenario order
    std::size_t alignments = 0;
    std::vector<TimelineEntry> timeline;

    double mean_msps() const {
        if (throughput_msps.empty()) return 0.0;
        return std::accumulate(throughput_msps.begin(), throughput_msps.end(), 0.0) /
               static_cast<double>(throughput_msps.size());
    }
    double time_in(TimelineEntry::State s) const {
        double t = 0.0;
        for (const auto& e : timeline) t += e.state == s ? e.duration : 0.0;
        return t;
    }
};

/// Outcome of one sensing stage: beam directions for the moving detections
/// and the time the RSP took.
struct AlignmentResult {
    std::vector<double> beams_deg;
    double duration_s = 0.0;
    std::vector<Detection> detections;
};

namespace detail {

inline Pipeline isac_mode(IsacConfig c, int tier, double noise_floor, const SwitchPolicy& pol) {
    switch (c) {
        case IsacConfig::all_sarp: return Pipeline::sarp;
        case IsacConfig::sarp_t12: return tier <= 2 ? Pipeline::sarp : Pipeline::mjarp;
        case IsacConfig::sarp_t1: return tier <= 1 ? Pipeline::sarp : Pipeline::mjarp;
        case IsacConfig::all_mjarp: return Pipeline::mjarp;
        case IsacConfig::reconfigurable: return select_rsp(noise_floor, tier, pol).mode;
        case IsacConfig::baseline: break;
    }
    throw std::invalid_argument("isac_mode: baseline has no RSP schedule");
}

}  // namespace detail

/// Sense the scene as it stands at `t`: synthesize a cube, run CLEAN with the
/// configuration's per-rank schedule, estimate Doppler for every detection
/// and keep the moving ones as beams.
inline AlignmentResult rsp_alignment(const IsacScenario& sc, IsacConfig config, const RspSetup& s, double t,
                                     Rng& rng) {
    std::vector<Target> targets;
    for (const auto& m : sc.mus) targets.push_back(m.at(t));
    const auto X = synthesize_cube(sc.radar, targets, sc.channel, s.train, rng);

    SwitchPolicy pol = sc.policy;
    pol.expected_targets = targets.size();
    const double nf = config == IsacConfig::reconfigurable ? estimate_noise_floor(X, s.train, s.gt) : 0.0;
    // Off-grid targets leave residue around their range cell that CLEAN
    // picks up again; allow spare iterations and drop later peaks in a cell
    // already taken.
    CleanConfig cc;
    cc.max_iters = 3 * std::max<std::size_t>(targets.size(), 1);
    cc.threshold = std::numeric_limits<double>::min();
    RspSetup local = s;
    local.cfg.integration_factor = pol.sarp_if;

    AlignmentResult out;
    std::vector<Pipeline> used;
    const auto found = clean_in_dbf_image(X.packet(0), local, cc, [&](std::size_t n) {
                           const Pipeline p = detail::isac_mode(config, pol.tier_for_rank(n), nf, pol);
                           used.push_back(p);
                           return p;
                       }).detections;
    std::size_t extractions = 0;
    for (std::size_t n = 0; n < found.size() && out.detections.size() < targets.size(); ++n) {
        const auto& d = found[n];
        const bool repeat = std::any_of(out.detections.begin(), out.detections.end(), [&](const Detection& e) {
            const auto dr = d.r_idx > e.r_idx ? d.r_idx - e.r_idx : e.r_idx - d.r_idx;
            return dr <= 1;
        });
        if (!repeat) out.detections.push_back(d);
        extractions = n + 1;
    }
    // The configuration's duration is the extraction-weighted mix of the
    // pipelines it ran.
    extractions = std::min(extractions, used.size());
    for (std::size_t n = 0; n < extractions; ++n) out.duration_s += sc.latency.of(used[n]);
    if (extractions > 0) out.duration_s /= static_cast<double>(extractions);
    if (!out.detections.empty()) {
        const auto z = slow_time_vectors(X, out.detections, s);
        estimate_velocities(out.detections, z, sc.radar, sc.music);
    }
    for (const auto& d : out.detections)
        if (std::abs(d.velocity_mps) >= sc.static_speed_mps) out.beams_deg.push_back(d.azimuth_deg);
    return out;
}

/// Discrete-event loop: sense, then serve the MUs round-robin. An MU outside
/// every beam forfeits its slots; sensing restarts once an MU that was
/// covered at the end of alignment drifts out of its beam.
inline ThroughputReport run_isac(const IsacScenario& sc, IsacConfig config) {
    sc.validate();
    ThroughputReport rep;
    rep.config = config;
    rep.noise_dbm = sc.channel.noise_dbm;
    std::vector<std::size_t> served;
    for (std::size_t i = 0; i < sc.mus.size(); ++i)
        if (!sc.mus[i].is_clutter) served.push_back(i);
    rep.throughput_msps.assign(served.size(), 0.0);
    if (served.empty()) return rep;

    const RspSetup s(sc.radar);
    Rng rng(sc.seed);
    const double half_bw = 0.5 * sc.beamwidth();
    const double share = sc.symbol_rate / static_cast<double>(served.size());
    std::vector<double> symbols(served.size(), 0.0);

    auto in_beam = [&](const std::vector<double>& beams, std::size_t mu, double t) {
        const double az = sc.mus[mu].azimuth_deg(t);
        return std::any_of(beams.begin(), beams.end(), [&](double b) { return std::abs(b - az) <= half_bw; });
    };

    double t = 0.0;
    while (t < sc.horizon_s - 1e-12) {
        std::vector<double> beams;
        double dur = 0.0;
        if (config == IsacConfig::baseline) {
            dur = sc.baseline.alignment_s();
            for (std::size_t mu : served) beams.push_back(sc.mus[mu].azimuth_deg(std::min(t + dur, sc.horizon_s)));
        } else {
            auto a = rsp_alignment(sc, config, s, t, rng);
            dur = a.duration_s;
            beams = std::move(a.beams_deg);
        }
        dur = std::max(dur, sc.quantum_s);
        const double align_end = std::min(t + dur, sc.horizon_s);
        rep.timeline.push_back({TimelineEntry::State::align, t, align_end - t});
        ++rep.alignments;
        t = align_end;

        std::vector<std::size_t> covered;
        for (std::size_t k = 0; k < served.size(); ++k)
            if (in_beam(beams, served[k], t)) covered.push_back(k);
        const double comm_start = t;
        while (t < sc.horizon_s - 1e-12 && !covered.empty()) {
            const bool drifted = std::any_of(covered.begin(), covered.end(),
                                             [&](std::size_t k) { return !in_beam(beams, served[k], t); });
            if (drifted) break;
            const double step = std::min(sc.quantum_s, sc.horizon_s - t);
            for (std::size_t k : covered) symbols[k] += share * step;
            t += step;
        }
        if (t > comm_start) rep.timeline.push_back({TimelineEntry::State::comm, comm_start, t - comm_start});
    }
    for (std::size_t k = 0; k < served.size(); ++k) rep.throughput_msps[k] = symbols[k] / sc.horizon_s / 1e6;
    return rep;
}

inline ThroughputReport baseline_80211ad(const IsacScenario& sc) { return run_isac(sc, IsacConfig::baseline); }

/// Independent runs with seeds sc.seed, sc.seed + 1, ...
inline std::vector<ThroughputReport> run_isac_trials(const IsacScenario& sc, IsacConfig config, std::size_t trials) {
    if (trials < 1) throw std::invalid_argument("run_isac_trials: need at least one trial");
    std::vector<ThroughputReport> out;
    IsacScenario local = sc;
    for (std::size_t k = 0; k < trials; ++k) {
        local.seed = sc.seed + k;
        out.push_back(run_isac(local, config));
    }
    return out;
}

struct TrialSummary {
    std::vector<double> throughput_msps;  ///< per MU, averaged over trials
    double alignments = 0.0;

    double mean_msps() const {
        if (throughput_msps.empty()) return 0.0;
        return std::accumulate(throughput_msps.begin(), throughput_msps.end(), 0.0) /
               static_cast<double>(throughput_msps.size());
    }
};

inline TrialSummary summarize(std::span<const ThroughputReport> reports) {
    TrialSummary s;
    if (reports.empty()) return s;
    s.throughput_msps.assign(reports.front().throughput_msps.size(), 0.0);
    for (const auto& r : reports) {
        for (std::size_t k = 0; k < s.throughput_msps.size(); ++k) s.throughput_msps[k] += r.throughput_msps[k];
        s.alignments += static_cast<double>(r.alignments);
    }
    const double n = static_cast<double>(reports.size());
    for (auto& v : s.throughput_msps) v /= n;
    s.alignments /= n;
    return s;
}

/// Ten MUs on horizontal or vertical paths plus two static scatterers.
/// Cars, bikes and pedestrians sit roughly 10 dB apart in echo power.
inline IsacScenario default_isac_scenario() {
    IsacScenario sc;
    sc.mus = {
        {-7.0, 18.0, 0.0, 3.6, 10.0},   {8.0, 22.0, 0.0, -3.0, 10.0},  {-10.0, 16.0, 0.0, 3.0, 10.0},
        {12.0, 25.0, 0.0, -2.4, 5.0},   {-16.0, 26.0, 0.0, -3.0, 5.0}, {18.0, 22.0, 0.0, 2.4, 5.0},
        {-20.0, 33.0, 0.0, 1.4, 1.0},   {24.0, 30.0, 0.0, -1.2, 1.0},  {-30.0, 22.0, 1.2, 0.0, 1.0},
        {8.0, 38.0, 0.0, -1.5, 1.0},    {-15.0, 15.0, 0.0, 0.0, 5.0, true},
        {18.0, 25.0, 0.0, 0.0, 5.0, true},
    };
    sc.channel.ps_ref_dbm = -125.0;
    sc.baseline.per_sector_s = 14e-3;
    return sc;
}

enum class SweepAxis { num_targets, kappa, noise_floor };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::num_targets: return "num_targets";
        case SweepAxis::kappa: return "kappa_db";
        case SweepAxis::noise_floor: return "noise_dbm";
    }
    return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    for (auto a : {SweepAxis::num_targets, SweepAxis::kappa, SweepAxis::noise_floor})
        if (s == to_string(a) || (a == SweepAxis::kappa && s == "kappa") || (a == SweepAxis::noise_floor && s == "noise"))
            return a;
    throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

struct SweepRow {
    double value = 0.0;
    IsacConfig config = IsacConfig::all_sarp;
    double throughput_msps = 0.0;
    double alignments = 0.0;
};

/// `trials` runs per (axis value, configuration), averaged. For num_targets
/// the first n scenario entries are kept.
inline std::vector<SweepRow> sweep(SweepAxis axis, std::span<const double> values, const IsacScenario& base,
                                   std::span<const IsacConfig> configs, std::size_t trials = 1) {
    if (values.empty()) throw std::invalid_argument("sweep: empty range");
    std::vector<SweepRow> rows;
    for (double v : values) {
        IsacScenario sc = base;
        switch (axis) {
            case SweepAxis::num_targets: {
                if (v < 0.0 || v > static_cast<double>(base.mus.size()))
                    throw std::invalid_argument("sweep: target count outside the scenario");
                sc.mus.resize(static_cast<std::size_t>(v));
                break;
            }
            case SweepAxis::kappa: sc.channel.kappa_db = v; break;
            case SweepAxis::noise_floor: sc.channel.noise_dbm = v; break;
        }
        for (IsacConfig c : configs) {
            const auto reps = run_isac_trials(sc, c, trials);
            const auto sum = summarize(reps);
            rows.push_back({v, c, sum.mean_msps(), sum.alignments});
        }
    }
    return rows;
}

}  // namespace arsp
