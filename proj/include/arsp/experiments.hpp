#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arsp/adaptive.hpp"
#include "arsp/clean.hpp"
#include "arsp/doppler.hpp"
#include "arsp/fxp.hpp"
#include "arsp/io.hpp"
#include "arsp/isac.hpp"

namespace arsp {

/// Independent stream per (seed, stream, trial) so trials do not depend on
/// evaluation order.
inline Rng trial_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t trial) {
    std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(trial)};
    return Rng(sq);
}

// --- Monte-Carlo scenes --------------------------------------------------------

/// Three targets of decreasing RCS at random range and whole-degree azimuth.
inline std::vector<Target> random_targets(const RadarConfig& cfg, Rng& rng,
                                          std::span<const double> rcs = std::array{10.0, 5.0, 1.0}) {
    const double r_hi = std::min(40.0, 0.9 * cfg.r_max());
    const double a_lo = std::max(-60.0, cfg.fov_min_deg), a_hi = std::min(60.0, cfg.fov_max_deg);
    std::uniform_real_distribution<double> ur(std::min(3.0, r_hi), r_hi), ua(a_lo, a_hi);
    std::vector<Target> ts;
    for (double s : rcs) {
        const double r = ur(rng);
        ts.push_back({r, std::round(ua(rng)), 0.0, s, false});
    }
    return ts;
}

struct McScene {
    std::vector<Target> targets;
    DataCube X;
};

/// Placement depends only on (seed, trial), so every noise level sees the
/// same geometry. The noise stream is keyed by the noise power itself, so a
/// level gives the same numbers whatever grid it is part of.
inline McScene draw_scene(const RspSetup& s, const ChannelModel& ch, const std::optional<std::vector<Target>>& fixed,
                          std::uint64_t seed, std::uint64_t trial) {
    McScene sc;
    auto place = trial_rng(seed, 0, trial);
    sc.targets = fixed ? *fixed : random_targets(s.cfg, place);
    const auto key = std::bit_cast<std::uint64_t>(ch.noise_dbm);
    auto noise = trial_rng(seed ^ key, 1, trial);
    sc.X = synthesize_cube(s.cfg, sc.targets, ch, s.train, noise);
    return sc;
}

/// Detection index per truth (-1 if unmatched) minimizing the summed
/// normalized range and azimuth distance over all assignments.
inline std::vector<long> match_detections(std::span<const Detection> dets, std::span<const Target> truths,
                                          double r_max) {
    const std::size_t nt = truths.size(), nd = dets.size();
    std::vector<long> best(nt, -1), cur(nt, -1);
    double best_cost = std::numeric_limits<double>::infinity();
    constexpr double kMiss = 1e6;
    std::vector<bool> used(nd, false);
    std::function<void(std::size_t, double)> rec = [&](std::size_t k, double cost) {
        if (cost >= best_cost) return;
        if (k == nt) {
            best_cost = cost;
            best = cur;
            return;
        }
        for (std::size_t d = 0; d < nd; ++d) {
            if (used[d]) continue;
            used[d] = true;
            cur[k] = static_cast<long>(d);
            rec(k + 1, cost + std::abs(dets[d].range_m - truths[k].range_m) / r_max +
                           std::abs(dets[d].azimuth_deg - truths[k].azimuth_deg) / 180.0);
            used[d] = false;
        }
        // leaving a truth unmatched is only worth it when detections run out
        if (nt - k > nd) {
            cur[k] = -1;
            rec(k + 1, cost + kMiss);
        }
        cur[k] = -1;
    };
    rec(0, 0.0);
    return best;
}

inline CleanConfig clean_for(std::size_t targets) {
    CleanConfig cc;
    cc.max_iters = std::max<std::size_t>(targets, 1);
    cc.threshold = 1e-15;
    return cc;
}

struct ErrorAccumulator {
    double r2 = 0.0, a2 = 0.0;
    std::size_t n = 0, misses = 0;

    void add(double dr, double da) {
        r2 += dr * dr;
        a2 += da * da;
        ++n;
    }
    double rmse_range() const { return n ? std::sqrt(r2 / static_cast<double>(n)) : std::nan(""); }
    double rmse_azimuth() const { return n ? std::sqrt(a2 / static_cast<double>(n)) : std::nan(""); }
};

// --- range-azimuth RMSE sweep ----------------------------------------------------

struct RmseRow {
    double noise_dbm = 0.0;
    std::size_t target = 0;  ///< 1-based, in configured order
    Pipeline pipeline = Pipeline::sarp;
    double rmse_range_m = 0.0;
    double rmse_azimuth_deg = 0.0;
    std::size_t misses = 0;
};

inline constexpr double kDefaultRmseGrid[] = {-100.0, -95.0, -90.0, -85.0, -80.0, -75.0, -73.0};

inline std::vector<RmseRow> rmse_sweep(const RadarConfig& radar, const ChannelModel& channel,
                                       const std::optional<std::vector<Target>>& targets,
                                       std::span<const double> noise_grid, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("rmse_sweep: need at least one trial");
    const RspSetup s(radar);
    const Pipeline modes[] = {Pipeline::sarp, Pipeline::mjarp};
    std::vector<RmseRow> rows;
    for (std::size_t lv = 0; lv < noise_grid.size(); ++lv) {
        ChannelModel ch = channel;
        ch.noise_dbm = noise_grid[lv];
        const std::size_t nt = targets ? targets->size() : 3;
        std::vector<std::array<ErrorAccumulator, 2>> acc(nt);
        for (std::size_t t = 0; t < trials; ++t) {
            const auto sc = draw_scene(s, ch, targets, seed, t);
            for (std::size_t m = 0; m < 2; ++m) {
                const auto dets = clean_iterate(sc.X.packet(0), modes[m], s, clean_for(nt));
                const auto match = match_detections(dets, sc.targets, radar.r_max());
                for (std::size_t k = 0; k < nt; ++k) {
                    if (match[k] < 0) {
                        ++acc[k][m].misses;
                        continue;
                    }
                    const auto& d = dets[static_cast<std::size_t>(match[k])];
                    acc[k][m].add(d.range_m - sc.targets[k].range_m, d.azimuth_deg - sc.targets[k].azimuth_deg);
                }
            }
        }
        for (std::size_t k = 0; k < nt; ++k)
            for (std::size_t m = 0; m < 2; ++m)
                rows.push_back({noise_grid[lv], k + 1, modes[m], acc[k][m].rmse_range(), acc[k][m].rmse_azimuth(),
                                acc[k][m].misses});
    }
    return rows;
}

// --- decision agreement and word-length sweep --------------------------------------

inline bool same_decisions(std::span<const Detection> a, std::span<const Detection> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].phi_idx != b[i].phi_idx || a[i].r_idx != b[i].r_idx) return false;
    return true;
}

struct AgreementResult {
    std::size_t trials = 0;
    std::size_t agree = 0;
    ErrorAccumulator error;
    std::uint64_t saturations = 0;

    double fraction() const { return trials ? static_cast<double>(agree) / static_cast<double>(trials) : 0.0; }
};

enum class NumericsKind { float64, float32, fixed };

/// Double-precision reference decisions shared by every numerics variant.
struct AgreementBench {
    RspSetup setup;
    std::vector<McScene> scenes;
    std::array<std::vector<std::vector<Detection>>, 2> reference;  ///< [sarp, mjarp][trial]

    AgreementBench(const RadarConfig& radar, const ChannelModel& ch, const std::optional<std::vector<Target>>& targets,
                   std::size_t trials, std::uint64_t seed)
        : setup(radar) {
        for (std::size_t t = 0; t < trials; ++t) scenes.push_back(draw_scene(setup, ch, targets, seed, t));
        for (std::size_t m = 0; m < 2; ++m)
            for (const auto& sc : scenes)
                reference[m].push_back(
                    clean_iterate(sc.X.packet(0), m ? Pipeline::mjarp : Pipeline::sarp, setup, clean_for(sc.targets.size())));
    }

    AgreementResult evaluate(Pipeline mode, NumericsKind kind, const StageFormats& formats = {}) const {
        const std::size_t m = mode == Pipeline::sarp ? 0 : 1;
        AgreementResult r;
        for (std::size_t t = 0; t < scenes.size(); ++t) {
            const auto& sc = scenes[t];
            const auto cc = clean_for(sc.targets.size());
            std::vector<Detection> dets;
            switch (kind) {
                case NumericsKind::float64: dets = reference[m][t]; break;
                case NumericsKind::float32: dets = clean_iterate(sc.X.packet(0), mode, setup, cc, Float32Numerics{}); break;
                case NumericsKind::fixed: {
                    const auto q = run_quantized_pipeline(sc.X, mode, setup, formats, cc);
                    dets = q.detections;
                    for (std::size_t k = 0; k < 4; ++k) r.saturations += q.stats[k].saturations;
                    break;
                }
            }
            ++r.trials;
            r.agree += same_decisions(dets, reference[m][t]);
            const auto match = match_detections(dets, sc.targets, setup.cfg.r_max());
            for (std::size_t k = 0; k < match.size(); ++k) {
                if (match[k] < 0) {
                    ++r.error.misses;
                    continue;
                }
                const auto& d = dets[static_cast<std::size_t>(match[k])];
                r.error.add(d.range_m - sc.targets[k].range_m, d.azimuth_deg - sc.targets[k].azimuth_deg);
            }
        }
        return r;
    }
};

inline AgreementResult decision_agreement(const RadarConfig& radar, const ChannelModel& ch, Pipeline mode,
                                          const StageFormats& formats, std::size_t trials, std::uint64_t seed,
                                          const std::optional<std::vector<Target>>& targets = std::nullopt) {
    return AgreementBench(radar, ch, targets, trials, seed).evaluate(mode, NumericsKind::fixed, formats);
}

struct WordlengthRow {
    std::string stage;   ///< dbf, fft, cm, ifft, or "all" for the float rows
    std::string format;  ///< W:Z, float64 or float32
    Pipeline pipeline = Pipeline::sarp;
    AgreementResult result;
};

inline RadarConfig small_radar() {
    RadarConfig c;
    c.P = 256;
    c.L = 8;
    c.M = 1;
    c.integration_factor = 128;
    return c;
}

inline constexpr Stage kAllStages[] = {Stage::dbf, Stage::fft, Stage::cm, Stage::ifft};

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::dbf: return "dbf";
        case Stage::fft: return "fft";
        case Stage::cm: return "cm";
        case Stage::ifft: return "ifft";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& s) {
    for (auto st : kAllStages)
        if (s == stage_name(st)) return st;
    throw std::invalid_argument("unknown stage '" + s + "'");
}

inline FixedPointFormat& format_of(StageFormats& f, Stage s) {
    switch (s) {
        case Stage::dbf: return f.dbf;
        case Stage::fft: return f.fft;
        case Stage::cm: return f.cm;
        case Stage::ifft: return f.ifft;
    }
    return f.dbf;
}

/// One stage at a time is swept over `widths` with its integer bits kept;
/// the other stages stay at `base`.
inline std::vector<WordlengthRow> wordlength_sweep(const RadarConfig& radar, const ChannelModel& ch,
                                                   const std::optional<std::vector<Target>>& targets,
                                                   const StageFormats& base, std::span<const Stage> stages,
                                                   std::span<const int> widths, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("wordlength_sweep: need at least one trial");
    const AgreementBench bench(radar, ch, targets, trials, seed);
    std::vector<WordlengthRow> rows;
    for (auto mode : {Pipeline::sarp, Pipeline::mjarp}) {
        rows.push_back({"all", "float64", mode, bench.evaluate(mode, NumericsKind::float64)});
        rows.push_back({"all", "float32", mode, bench.evaluate(mode, NumericsKind::float32)});
        for (Stage st : stages)
            for (int w : widths) {
                StageFormats f = base;
                format_of(f, st).W = w;
                if (w <= format_of(f, st).Z) continue;
                rows.push_back({stage_name(st), to_string(format_of(f, st)), mode,
                                bench.evaluate(mode, NumericsKind::fixed, f)});
            }
    }
    return rows;
}

// --- Doppler super-resolution -------------------------------------------------------

struct DopplerStudy {
    std::vector<Target> targets{{10.0, 20.0, 10.0, 10.0, false}, {10.0, 20.0, 14.0, 10.0, false}};
    double noise_dbm = -150.0;
    double tolerance_mps = 1.0;
    MusicOptions music{0, 2, {}, {}};
};

struct DopplerTrial {
    std::vector<double> music_peaks;  ///< strongest first, up to the number of targets
    bool music_resolved = false;
    std::size_t fft_peaks = 0;
    double fft_velocity = 0.0;
    std::vector<double> qmsg_peaks;
    bool qmsg_resolved = false;
};

struct DopplerSpectra {
    std::vector<double> velocity, music, fft, qmsg;
};

struct DopplerResult {
    std::vector<DopplerTrial> trials;
    DopplerSpectra first;  ///< spectra of trial 0
    std::size_t music_resolved = 0, fft_single = 0, qmsg_resolved = 0;
};

/// True when the strongest n peaks match the n true velocities, each within tol.
inline bool velocities_resolved(std::span<const SpectralPeak> peaks, std::span<const Target> truths, double tol) {
    const std::size_t n = truths.size();
    if (peaks.size() < n) return false;
    std::vector<double> est, tv;
    for (std::size_t i = 0; i < n; ++i) {
        est.push_back(peaks[i].velocity);
        tv.push_back(truths[i].radial_velocity());
    }
    std::sort(est.begin(), est.end());
    std::sort(tv.begin(), tv.end());
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(est[i] - tv[i]) > tol) return false;
    return true;
}

inline DopplerResult doppler_superres(const RadarConfig& radar, const ChannelModel& channel, const DopplerStudy& study,
                                      const FixedPointFormat& msg, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("doppler_superres: need at least one trial");
    if (radar.M < 3) throw std::invalid_argument("doppler_superres: need at least 3 pulses");
    if (study.targets.empty()) throw std::invalid_argument("doppler_superres: no targets");
    const RspSetup s(radar);
    ChannelModel ch = channel;
    ch.noise_dbm = study.noise_dbm;
    const auto& grid = study.music.grid;
    DopplerResult out;
    CleanConfig cc;
    cc.max_iters = 1;
    for (std::size_t t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, 1, t);
        const auto X = synthesize_cube(radar, study.targets, ch, s.train, rng);
        const auto dets = clean_iterate(X.packet(0), Pipeline::mjarp, s, cc);
        DopplerTrial tr;
        if (!dets.empty()) {
            const auto z = slow_time_vectors(X, dets, s);
            const auto mu = music_doppler(z[0].zeta, radar, study.music);
            const auto ff = fft_doppler(z[0].zeta, grid, radar);
            const auto qm = quantized_music_doppler(z[0].zeta, radar, study.music, msg);
            for (std::size_t i = 0; i < std::min(mu.peaks.size(), study.targets.size()); ++i)
                tr.music_peaks.push_back(mu.peaks[i].velocity);
            for (std::size_t i = 0; i < std::min(qm.peaks.size(), study.targets.size()); ++i)
                tr.qmsg_peaks.push_back(qm.peaks[i].velocity);
            tr.music_resolved = velocities_resolved(mu.peaks, study.targets, study.tolerance_mps);
            tr.qmsg_resolved = velocities_resolved(qm.peaks, study.targets, study.tolerance_mps);
            tr.fft_peaks = count_peaks(ff.spectrum, grid, 0.5);
            tr.fft_velocity = ff.velocity;
            if (t == 0) {
                for (std::size_t i = 0; i < grid.size(); ++i) out.first.velocity.push_back(grid.at(i));
                out.first.music = mu.spectrum;
                out.first.fft = ff.spectrum;
                out.first.qmsg = qm.spectrum;
            }
        }
        out.music_resolved += tr.music_resolved;
        out.qmsg_resolved += tr.qmsg_resolved;
        out.fft_single += tr.fft_peaks == 1;
        out.trials.push_back(std::move(tr));
    }
    return out;
}

// --- operation counts ---------------------------------------------------------------

struct OpShape {
    std::size_t P = 0, L = 0, I = 0, M = 0;
};

inline constexpr OpShape kDefaultOpShapes[] = {{64, 4, 19, 4}, {1024, 32, 181, 32}};

struct OpCountRow {
    OpShape shape;
    Pipeline pipeline = Pipeline::sarp;
    OpReportRow row;
};

/// Radar with I angles spread over the default +-90 degree field of view.
inline RadarConfig radar_for_shape(const OpShape& sh) {
    RadarConfig c;
    c.P = sh.P;
    c.L = sh.L;
    c.M = sh.M;
    if (sh.I < 2) throw std::invalid_argument("opcount: need at least two angles");
    c.angle_step_deg = (c.fov_max_deg - c.fov_min_deg) / static_cast<double>(sh.I - 1);
    c.integration_factor = std::min(c.integration_factor, sh.P);
    c.validate();
    if (c.num_angles() != sh.I) throw std::invalid_argument("opcount: angle count not representable");
    return c;
}

inline std::vector<OpCountRow> opcount(std::span<const OpShape> shapes, std::uint64_t seed) {
    std::vector<OpCountRow> rows;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        const auto cfg = radar_for_shape(shapes[k]);
        const RspSetup s(cfg);
        auto rng = trial_rng(seed, 0, k);
        DataCube X(cfg.P, cfg.L, cfg.M);
        for (std::size_t m = 0; m < cfg.M; ++m)
            for (auto& v : X.packet(m).data()) v = complex_gaussian(rng, 1.0);
        for (auto mode : {Pipeline::sarp, Pipeline::mjarp, Pipeline::jarp}) {
            const auto r = process_cube(X, mode, cfg, s.train, s.W, s.gt);
            for (const auto& row : op_report(r.ops, mode, cfg)) rows.push_back({shapes[k], mode, row});
        }
    }
    return rows;
}

// --- ISAC ---------------------------------------------------------------------------

inline constexpr double kDefaultIsacGrid[] = {-100.0, -90.0, -80.0, -73.0};

struct IsacRow {
    IsacConfig config = IsacConfig::all_sarp;
    double noise_dbm = 0.0;
    TrialSummary summary;
};

inline std::vector<IsacRow> isac_study(const IsacScenario& base, std::span<const IsacConfig> configs,
                                       std::span<const double> noise_grid, std::size_t trials) {
    std::vector<IsacRow> rows;
    for (double nf : noise_grid) {
        IsacScenario sc = base;
        sc.channel.noise_dbm = nf;
        for (auto c : configs) {
            const auto reps = run_isac_trials(sc, c, trials);
            rows.push_back({c, nf, summarize(reps)});
        }
    }
    return rows;
}

// --- configuration ------------------------------------------------------------------

struct SweepStudy {
    SweepAxis axis = SweepAxis::num_targets;
    std::vector<double> values{2, 4, 6, 8, 10};
    double noise_dbm = -73.0;
};

struct ExperimentConfig {
    json radar = json::object();    ///< overrides on each experiment's default radar
    json channel = json::object();  ///< overrides on the default channel
    std::optional<std::vector<Target>> targets;  ///< fixed scene; random placements otherwise
    std::vector<double> noise_grid;              ///< empty selects the experiment default
    StageFormats formats{};
    std::vector<Stage> stages{std::begin(kAllStages), std::end(kAllStages)};
    std::vector<int> widths{8, 12, 16, 20, 24, 28, 32};
    double wordlength_noise_dbm = -80.0;
    DopplerStudy doppler{};
    std::vector<OpShape> op_shapes{std::begin(kDefaultOpShapes), std::end(kDefaultOpShapes)};
    IsacScenario isac = default_isac_scenario();
    std::vector<IsacConfig> configs{std::begin(kAllIsacConfigs), std::end(kAllIsacConfigs)};
    SweepStudy sweep{};
    std::optional<std::size_t> trials;
    std::uint64_t seed = 1;
    bool full = false;

    RadarConfig radar_on(RadarConfig base) const { return radar_from_json(radar, base); }
    ChannelModel channel_on(ChannelModel base = {}) const { return channel_from_json(channel, base); }

    /// Monte-Carlo experiments default to 50 trials (200 with `full`).
    std::size_t mc_trials() const { return trials.value_or(full ? 200 : 50); }
    /// ISAC runs are costlier; 4 independent runs (16 with `full`).
    std::size_t isac_trials() const { return trials.value_or(full ? 16 : 4); }
};

inline ExperimentConfig experiment_from_json(const json& j) {
    using namespace detail;
    check_keys(j, {"radar", "channel", "targets", "noise_dbm", "formats", "wordlength", "doppler", "opcount", "isac",
                   "policy", "configs", "sweep", "trials", "seed"},
               "config");
    ExperimentConfig c;
    try {
        if (j.contains("radar")) {
            c.radar = j["radar"];
            radar_from_json(c.radar);
        }
        if (j.contains("channel")) {
            c.channel = j["channel"];
            channel_from_json(c.channel);
        }
        if (j.contains("targets")) {
            if (!j["targets"].is_array() || j["targets"].empty()) throw config_error("targets: expected a non-empty array");
            std::vector<Target> ts;
            for (const auto& t : j["targets"]) ts.push_back(target_from_json(t));
            c.targets = ts;
        }
        if (j.contains("noise_dbm")) {
            if (!j["noise_dbm"].is_array() || j["noise_dbm"].empty())
                throw config_error("noise_dbm: expected a non-empty array");
            for (const auto& v : j["noise_dbm"]) c.noise_grid.push_back(number(v, "noise_dbm"));
        }
        if (j.contains("formats")) c.formats = formats_from_json(j["formats"], c.formats);
        if (j.contains("wordlength")) {
            const auto& w = j["wordlength"];
            check_keys(w, {"stages", "widths", "noise_dbm"}, "wordlength");
            if (w.contains("stages")) {
                c.stages.clear();
                if (!w["stages"].is_array()) throw config_error("wordlength.stages: expected an array");
                for (const auto& s : w["stages"]) c.stages.push_back(stage_from_string(text(s, "wordlength.stages")));
            }
            if (w.contains("widths")) {
                c.widths.clear();
                if (!w["widths"].is_array() || w["widths"].empty())
                    throw config_error("wordlength.widths: expected a non-empty array");
                for (const auto& v : w["widths"]) {
                    const auto n = count(v, "wordlength.widths");
                    if (n < 2 || n > 52) throw config_error("wordlength.widths: word length must be in [2, 52]");
                    c.widths.push_back(static_cast<int>(n));
                }
            }
            if (w.contains("noise_dbm")) c.wordlength_noise_dbm = number(w["noise_dbm"], "wordlength.noise_dbm");
        }
        if (j.contains("doppler")) {
            const auto& d = j["doppler"];
            check_keys(d, {"targets", "noise_dbm", "tolerance_mps", "K", "D", "v_min", "v_max", "v_step"}, "doppler");
            if (d.contains("targets")) {
                if (!d["targets"].is_array() || d["targets"].empty())
                    throw config_error("doppler.targets: expected a non-empty array");
                c.doppler.targets.clear();
                for (const auto& t : d["targets"]) c.doppler.targets.push_back(target_from_json(t));
            }
            if (d.contains("noise_dbm")) c.doppler.noise_dbm = number(d["noise_dbm"], "doppler.noise_dbm");
            if (d.contains("tolerance_mps")) c.doppler.tolerance_mps = number(d["tolerance_mps"], "doppler.tolerance_mps");
            if (d.contains("K")) c.doppler.music.K = count(d["K"], "doppler.K");
            if (d.contains("D")) c.doppler.music.D = count(d["D"], "doppler.D");
            if (d.contains("v_min")) c.doppler.music.grid.v_min = number(d["v_min"], "doppler.v_min");
            if (d.contains("v_max")) c.doppler.music.grid.v_max = number(d["v_max"], "doppler.v_max");
            if (d.contains("v_step")) c.doppler.music.grid.step = number(d["v_step"], "doppler.v_step");
            c.doppler.music.grid.size();
            if (c.doppler.music.D < 1) throw config_error("doppler.D: must be >= 1");
        }
        if (j.contains("opcount")) {
            const auto& o = j["opcount"];
            check_keys(o, {"shapes"}, "opcount");
            if (!o.contains("shapes") || !o["shapes"].is_array() || o["shapes"].empty())
                throw config_error("opcount.shapes: expected a non-empty array of [P, L, I, M]");
            c.op_shapes.clear();
            for (const auto& s : o["shapes"]) {
                if (!s.is_array() || s.size() != 4) throw config_error("opcount.shapes: expected [P, L, I, M]");
                OpShape sh{count(s[0], "opcount.P"), count(s[1], "opcount.L"), count(s[2], "opcount.I"),
                           count(s[3], "opcount.M")};
                radar_for_shape(sh);
                c.op_shapes.push_back(sh);
            }
        }
        if (j.contains("isac")) c.isac = isac_from_json(j["isac"]);
        if (j.contains("policy")) c.isac.policy = policy_from_json(j["policy"], c.isac.policy);
        if (j.contains("configs")) {
            if (!j["configs"].is_array() || j["configs"].empty()) throw config_error("configs: expected a non-empty array");
            c.configs.clear();
            for (const auto& v : j["configs"]) c.configs.push_back(isac_config_from_string(text(v, "configs")));
        }
        if (j.contains("sweep")) {
            const auto& s = j["sweep"];
            check_keys(s, {"axis", "values", "noise_dbm"}, "sweep");
            if (s.contains("axis")) c.sweep.axis = sweep_axis_from_string(text(s["axis"], "sweep.axis"));
            if (s.contains("values")) {
                if (!s["values"].is_array() || s["values"].empty())
                    throw config_error("sweep.values: expected a non-empty array");
                c.sweep.values.clear();
                for (const auto& v : s["values"]) c.sweep.values.push_back(number(v, "sweep.values"));
            }
            if (s.contains("noise_dbm")) c.sweep.noise_dbm = number(s["noise_dbm"], "sweep.noise_dbm");
        }
        if (j.contains("trials")) {
            c.trials = count(j["trials"], "trials");
            if (*c.trials < 1) throw config_error("trials: must be >= 1");
        }
        if (j.contains("seed")) c.seed = count(j["seed"], "seed");
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw config_error(e.what());
    }
    return c;
}

// --- experiment commands --------------------------------------------------------------

/// Files written by one command, in write order.
struct ExperimentOutput {
    std::vector<std::filesystem::path> csv;
    std::vector<std::filesystem::path> plots;
};

namespace detail {

inline void save_csv(const CsvWriter& w, const std::filesystem::path& p, ExperimentOutput& out) {
    w.save(p);
    out.csv.push_back(p);
}

inline void save_plot(const std::filesystem::path& p, const std::string& title, const std::string& xl,
                      const std::string& yl, const std::vector<PlotSeries>& s, ExperimentOutput& out) {
    if (write_svg_plot(p, title, xl, yl, s))
        out.plots.push_back(p);
    else
        std::cerr << "warning: could not write plot " << p.string() << "\n";
}

inline std::string fmt(double v) { return format_number(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline std::span<const double> grid_or(const std::vector<double>& g, std::span<const double> def) {
    return g.empty() ? def : std::span<const double>(g);
}

inline std::vector<double> spectrum_db(const std::vector<double>& s) {
    double top = 0.0;
    for (double v : s) top = std::max(top, v);
    std::vector<double> out;
    for (double v : s) out.push_back(top > 0.0 && v > 0.0 ? 10.0 * std::log10(v / top) : -300.0);
    return out;
}

}  // namespace detail

inline ExperimentOutput cmd_rmse_sweep(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    RadarConfig base;
    base.M = 1;
    const auto grid = grid_or(c.noise_grid, kDefaultRmseGrid);
    const auto rows = rmse_sweep(c.radar_on(base), c.channel_on(), c.targets, grid, c.mc_trials(), c.seed);
    ExperimentOutput out;
    CsvWriter w({"noise_dbm", "target", "pipeline", "rmse_range_m", "rmse_azimuth_deg", "misses"});
    std::vector<PlotSeries> series;
    for (const auto& r : rows) {
        w.row({fmt(r.noise_dbm), fmt(r.target), to_string(r.pipeline), fmt(r.rmse_range_m), fmt(r.rmse_azimuth_deg),
               fmt(r.misses)});
        const auto name = to_string(r.pipeline) + " T" + std::to_string(r.target);
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.name == name; });
        if (it == series.end()) it = series.insert(series.end(), PlotSeries{name, {}, {}});
        it->x.push_back(r.noise_dbm);
        it->y.push_back(r.rmse_range_m);
    }
    save_csv(w, dir / "rmse_sweep.csv", out);
    save_plot(dir / "rmse_range.svg", "Range RMSE", "noise floor (dBm)", "RMSE (m)", series, out);
    return out;
}

inline ExperimentOutput cmd_wordlength_sweep(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    ChannelModel ch = c.channel_on();
    ch.noise_dbm = c.wordlength_noise_dbm;
    const auto rows =
        wordlength_sweep(c.radar_on(small_radar()), ch, c.targets, c.formats, c.stages, c.widths, c.mc_trials(), c.seed);
    ExperimentOutput out;
    CsvWriter w(
        {"stage", "format", "pipeline", "agreement", "rmse_range_m", "rmse_azimuth_deg", "misses", "saturations"});
    std::vector<PlotSeries> series;
    for (const auto& r : rows) {
        w.row({r.stage, r.format, to_string(r.pipeline), fmt(r.result.fraction()), fmt(r.result.error.rmse_range()),
               fmt(r.result.error.rmse_azimuth()), fmt(r.result.error.misses), std::to_string(r.result.saturations)});
        if (r.stage == "all") continue;
        const auto name = r.stage + " " + to_string(r.pipeline);
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.name == name; });
        if (it == series.end()) it = series.insert(series.end(), PlotSeries{name, {}, {}});
        it->x.push_back(parse_format(r.format).W);
        it->y.push_back(r.result.fraction());
    }
    save_csv(w, dir / "wordlength_sweep.csv", out);
    save_plot(dir / "wordlength_agreement.svg", "Decision agreement with double precision", "word length (bits)",
              "agreement", series, out);
    return out;
}

inline ExperimentOutput cmd_doppler_superres(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    const auto res = doppler_superres(c.radar_on({}), c.channel_on(), c.doppler, c.formats.msg, c.mc_trials(), c.seed);
    const std::size_t n = c.doppler.targets.size();
    ExperimentOutput out;
    std::vector<std::string> head{"trial"};
    for (std::size_t i = 0; i < n; ++i) head.push_back("music_v" + std::to_string(i + 1));
    for (auto h : {"music_resolved", "qmsg_resolved", "fft_peaks", "fft_velocity"}) head.push_back(h);
    CsvWriter w(head);
    for (std::size_t t = 0; t < res.trials.size(); ++t) {
        const auto& tr = res.trials[t];
        std::vector<std::string> cells{fmt(t)};
        for (std::size_t i = 0; i < n; ++i) cells.push_back(i < tr.music_peaks.size() ? fmt(tr.music_peaks[i]) : "nan");
        cells.push_back(tr.music_resolved ? "1" : "0");
        cells.push_back(tr.qmsg_resolved ? "1" : "0");
        cells.push_back(fmt(tr.fft_peaks));
        cells.push_back(fmt(tr.fft_velocity));
        w.row(cells);
    }
    save_csv(w, dir / "doppler_trials.csv", out);

    CsvWriter sum({"method", "success", "trials", "criterion"});
    const auto nt = fmt(res.trials.size());
    sum.row({"music", fmt(res.music_resolved), nt, "all targets resolved"});
    sum.row({"music_quantized_msg", fmt(res.qmsg_resolved), nt, "all targets resolved"});
    sum.row({"fft", fmt(res.fft_single), nt, "single peak"});
    save_csv(sum, dir / "doppler_summary.csv", out);

    const auto& sp = res.first;
    CsvWriter spec({"velocity_mps", "music_db", "music_quantized_db", "fft_db"});
    const auto mdb = spectrum_db(sp.music), qdb = spectrum_db(sp.qmsg), fdb = spectrum_db(sp.fft);
    for (std::size_t i = 0; i < sp.velocity.size(); ++i)
        spec.row({fmt(sp.velocity[i]), fmt(mdb[i]), fmt(qdb[i]), fmt(fdb[i])});
    save_csv(spec, dir / "doppler_spectrum.csv", out);
    save_plot(dir / "doppler_spectrum.svg", "Doppler spectra, first trial", "velocity (m/s)", "normalized power (dB)",
              {{"MUSIC", sp.velocity, mdb}, {"MUSIC, quantized MSG", sp.velocity, qdb}, {"FFT", sp.velocity, fdb}}, out);
    return out;
}

inline ExperimentOutput cmd_opcount(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    const auto rows = opcount(c.op_shapes, c.seed);
    ExperimentOutput out;
    CsvWriter w({"P", "L", "I", "M", "pipeline", "quantity", "expected", "actual", "match"});
    for (const auto& r : rows)
        w.row({fmt(r.shape.P), fmt(r.shape.L), fmt(r.shape.I), fmt(r.shape.M), to_string(r.pipeline), r.row.quantity,
               std::to_string(r.row.expected), std::to_string(r.row.actual), r.row.ok() ? "1" : "0"});
    save_csv(w, dir / "opcount.csv", out);
    return out;
}

inline ExperimentOutput cmd_isac(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    IsacScenario sc = c.isac;
    sc.seed = c.seed;
    sc.validate();
    const auto rows = isac_study(sc, c.configs, grid_or(c.noise_grid, kDefaultIsacGrid), c.isac_trials());
    std::vector<std::size_t> ids;
    for (std::size_t k = 0; k < sc.mus.size(); ++k)
        if (!sc.mus[k].is_clutter) ids.push_back(k);
    ExperimentOutput out;
    CsvWriter w({"config", "noise_dbm", "mu_id", "throughput_msps", "alignments"});
    CsvWriter s({"config", "noise_dbm", "mean_throughput_msps", "alignments"});
    std::vector<PlotSeries> series;
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.summary.throughput_msps.size(); ++k)
            w.row({to_string(r.config), fmt(r.noise_dbm), fmt(ids[k]), fmt(r.summary.throughput_msps[k]),
                   fmt(r.summary.alignments)});
        s.row({to_string(r.config), fmt(r.noise_dbm), fmt(r.summary.mean_msps()), fmt(r.summary.alignments)});
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& p) { return p.name == to_string(r.config); });
        if (it == series.end()) it = series.insert(series.end(), PlotSeries{to_string(r.config), {}, {}});
        it->x.push_back(r.noise_dbm);
        it->y.push_back(r.summary.mean_msps());
    }
    save_csv(w, dir / "isac_throughput.csv", out);
    save_csv(s, dir / "isac_summary.csv", out);
    save_plot(dir / "isac_throughput.svg", "Mean throughput per MU", "noise floor (dBm)", "throughput (Msps)", series,
              out);
    return out;
}

inline ExperimentOutput cmd_sweep(const ExperimentConfig& c, const std::filesystem::path& dir) {
    using namespace detail;
    IsacScenario sc = c.isac;
    sc.seed = c.seed;
    if (c.sweep.axis != SweepAxis::noise_floor) sc.channel.noise_dbm = c.sweep.noise_dbm;
    sc.validate();
    const auto rows = sweep(c.sweep.axis, c.sweep.values, sc, c.configs, c.isac_trials());
    ExperimentOutput out;
    CsvWriter w({to_string(c.sweep.axis), "config", "mean_throughput_msps", "alignments"});
    std::vector<PlotSeries> series;
    for (const auto& r : rows) {
        w.row({fmt(r.value), to_string(r.config), fmt(r.throughput_msps), fmt(r.alignments)});
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& p) { return p.name == to_string(r.config); });
        if (it == series.end()) it = series.insert(series.end(), PlotSeries{to_string(r.config), {}, {}});
        it->x.push_back(r.value);
        it->y.push_back(r.throughput_msps);
    }
    save_csv(w, dir / "sweep.csv", out);
    save_plot(dir / "sweep.svg", "Mean throughput per MU", to_string(c.sweep.axis), "throughput (Msps)", series, out);
    return out;
}

inline constexpr const char* kExperimentNames[] = {"rmse-sweep", "wordlength-sweep", "doppler-superres",
                                                   "opcount",    "isac",             "sweep"};

inline ExperimentOutput run_experiment(const std::string& name, const ExperimentConfig& c,
                                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    if (name == "rmse-sweep") return cmd_rmse_sweep(c, dir);
    if (name == "wordlength-sweep") return cmd_wordlength_sweep(c, dir);
    if (name == "doppler-superres") return cmd_doppler_superres(c, dir);
    if (name == "opcount") return cmd_opcount(c, dir);
    if (name == "isac") return cmd_isac(c, dir);
    if (name == "sweep") return cmd_sweep(c, dir);
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

}  // namespace arsp
