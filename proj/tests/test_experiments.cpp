#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "arsp/experiments.hpp"

using namespace arsp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ChannelModel silent_channel() {
    ChannelModel ch;
    ch.noise_dbm = -kInf;
    ch.clutter_dbm = -kInf;
    ch.kappa_db = kInf;
    ch.swerling = false;
    return ch;
}

Detection det_at(double r, double phi) {
    Detection d;
    d.range_m = r;
    d.azimuth_deg = phi;
    return d;
}

// Exhaustive search over injective assignments, written independently of
// the pruned recursion under test.
double brute_force_cost(std::span<const Detection> dets, std::span<const Target> truths, double r_max) {
    std::vector<std::size_t> idx(dets.size());
    std::iota(idx.begin(), idx.end(), 0);
    double best = kInf;
    do {
        double c = 0.0;
        for (std::size_t k = 0; k < truths.size(); ++k)
            c += std::abs(dets[idx[k]].range_m - truths[k].range_m) / r_max +
                 std::abs(dets[idx[k]].azimuth_deg - truths[k].azimuth_deg) / 180.0;
        best = std::min(best, c);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST(TrialRng, StreamsAreReproducibleAndDistinct) {
    auto a = trial_rng(5, 1, 3), b = trial_rng(5, 1, 3), c = trial_rng(5, 1, 4), d = trial_rng(5, 2, 3);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    EXPECT_NE(va, d());
    EXPECT_NE(trial_rng(1ull << 33, 0, 0)(), trial_rng(0, 0, 0)());
}

TEST(RandomTargets, InsideWindowAndWholeDegrees) {
    const auto cfg = small_radar();
    for (std::uint64_t t = 0; t < 50; ++t) {
        auto rng = trial_rng(9, 0, t);
        const auto ts = random_targets(cfg, rng);
        ASSERT_EQ(ts.size(), 3u);
        EXPECT_DOUBLE_EQ(ts[0].sigma_mean, 10.0);
        EXPECT_DOUBLE_EQ(ts[2].sigma_mean, 1.0);
        for (const auto& x : ts) {
            EXPECT_GE(x.range_m, 3.0);
            EXPECT_LE(x.range_m, 0.9 * cfg.r_max());
            EXPECT_EQ(x.azimuth_deg, std::round(x.azimuth_deg));
            EXPECT_LE(std::abs(x.azimuth_deg), 60.0);
        }
    }
}

TEST(Matching, IdentityAndSwap) {
    const std::vector<Target> truths{{5.0, 10.0}, {20.0, -30.0}};
    const std::vector<Detection> dets{det_at(20.1, -30.0), det_at(5.0, 11.0)};
    const auto m = match_detections(dets, truths, 40.0);
    EXPECT_EQ(m, (std::vector<long>{1, 0}));
}

TEST(Matching, MissingDetectionsLeaveTruthsUnmatched) {
    const std::vector<Target> truths{{5.0, 10.0}, {20.0, -30.0}, {30.0, 0.0}};
    const std::vector<Detection> dets{det_at(30.0, 1.0)};
    const auto m = match_detections(dets, truths, 40.0);
    EXPECT_EQ(m, (std::vector<long>{-1, -1, 0}));
    EXPECT_EQ(match_detections({}, truths, 40.0), (std::vector<long>{-1, -1, -1}));
}

TEST(Matching, OptimalAgainstExhaustiveSearch) {
    Rng rng(4);
    std::uniform_real_distribution<double> ur(0.0, 40.0), ua(-60.0, 60.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<Target> truths;
        std::vector<Detection> dets;
        for (int k = 0; k < 4; ++k) truths.push_back({ur(rng) + 0.1, ua(rng)});
        for (int k = 0; k < 4; ++k) dets.push_back(det_at(ur(rng), ua(rng)));
        const auto m = match_detections(dets, truths, 40.0);
        std::vector<long> sorted = m;
        std::sort(sorted.begin(), sorted.end());
        ASSERT_EQ(sorted, (std::vector<long>{0, 1, 2, 3}));
        double c = 0.0;
        for (std::size_t k = 0; k < 4; ++k)
            c += std::abs(dets[m[k]].range_m - truths[k].range_m) / 40.0 +
                 std::abs(dets[m[k]].azimuth_deg - truths[k].azimuth_deg) / 180.0;
        EXPECT_NEAR(c, brute_force_cost(dets, truths, 40.0), 1e-12);
    }
}

TEST(RmseSweep, NoiseFreeOnGridIsExact) {
    const auto cfg = small_radar();
    const std::vector<Target> ts{{cfg.range_of_bin(40), -20.0, 0.0, 10.0},
                                 {cfg.range_of_bin(90), 15.0, 0.0, 5.0},
                                 {cfg.range_of_bin(60), 40.0, 0.0, 1.0}};
    const double grid[] = {-kInf};
    const auto rows = rmse_sweep(cfg, silent_channel(), ts, grid, 1, 3);
    ASSERT_EQ(rows.size(), 6u);
    for (const auto& r : rows) {
        EXPECT_NEAR(r.rmse_range_m, 0.0, 1e-12) << to_string(r.pipeline) << " T" << r.target;
        EXPECT_NEAR(r.rmse_azimuth_deg, 0.0, 1e-12);
        EXPECT_EQ(r.misses, 0u);
    }
    EXPECT_THROW(rmse_sweep(cfg, silent_channel(), ts, grid, 0, 3), std::invalid_argument);
}

TEST(RmseSweep, RowsFollowGridTargetPipelineOrder) {
    const auto cfg = small_radar();
    const double grid[] = {-100.0, -80.0};
    const auto rows = rmse_sweep(cfg, ChannelModel{}, std::nullopt, grid, 2, 1);
    ASSERT_EQ(rows.size(), 12u);
    EXPECT_EQ(rows[0].noise_dbm, -100.0);
    EXPECT_EQ(rows[0].pipeline, Pipeline::sarp);
    EXPECT_EQ(rows[1].pipeline, Pipeline::mjarp);
    EXPECT_EQ(rows[2].target, 2u);
    EXPECT_EQ(rows[6].noise_dbm, -80.0);
}

TEST(Agreement, DoubleAgreesWithItselfAndFloat32Matches) {
    ChannelModel ch;
    ch.noise_dbm = -90.0;
    const AgreementBench bench(small_radar(), ch, std::nullopt, 10, 2);
    for (auto mode : {Pipeline::sarp, Pipeline::mjarp}) {
        EXPECT_EQ(bench.evaluate(mode, NumericsKind::float64).agree, 10u);
        EXPECT_EQ(bench.evaluate(mode, NumericsKind::float32).agree, 10u);
    }
}

TEST(Agreement, DefaultFormatsMatchOnNoiseFreeTarget) {
    const auto cfg = small_radar();
    const std::vector<Target> ts{{cfg.range_of_bin(50), -12.0, 0.0, 10.0}};
    for (auto mode : {Pipeline::sarp, Pipeline::mjarp}) {
        const auto r = decision_agreement(cfg, silent_channel(), mode, StageFormats{}, 3, 1, ts);
        EXPECT_EQ(r.agree, r.trials) << to_string(mode);
        EXPECT_NEAR(r.error.rmse_range(), 0.0, 1e-12);
    }
}

TEST(Agreement, StarvedDbfDiverges) {
    ChannelModel ch;
    ch.noise_dbm = -90.0;
    StageFormats f;
    f.dbf = {8, 2};
    for (auto mode : {Pipeline::sarp, Pipeline::mjarp})
        EXPECT_LT(decision_agreement(small_radar(), ch, mode, f, 10, 1).fraction(), 1.0) << to_string(mode);
}

TEST(WordlengthSweep, RowLayoutAndSkipsInvalidWidths) {
    ChannelModel ch;
    ch.noise_dbm = -90.0;
    const Stage st[] = {Stage::cm};
    const int widths[] = {6, 16, 26};
    const auto rows = wordlength_sweep(small_radar(), ch, std::nullopt, StageFormats{}, st, widths, 2, 1);
    // float64 and float32 rows plus two valid cm widths (6 bits cannot hold Z = 6), per pipeline
    ASSERT_EQ(rows.size(), 8u);
    EXPECT_EQ(rows[0].format, "float64");
    EXPECT_EQ(rows[1].format, "float32");
    EXPECT_EQ(rows[2].stage, "cm");
    EXPECT_EQ(rows[2].format, "16:6");
    EXPECT_EQ(rows[4].pipeline, Pipeline::mjarp);
    EXPECT_DOUBLE_EQ(rows[3].result.fraction(), 1.0);
}

TEST(DopplerStudyCheck, SingleTargetBothMethodsAgree) {
    DopplerStudy st;
    st.targets = {{10.0, 20.0, 7.0, 10.0}};
    st.music.D = 1;
    st.noise_dbm = -120.0;
    const auto r = doppler_superres(RadarConfig{}, ChannelModel{}, st, StageFormats{}.msg, 3, 1);
    ASSERT_EQ(r.trials.size(), 3u);
    EXPECT_EQ(r.music_resolved, 3u);
    EXPECT_EQ(r.qmsg_resolved, 3u);
    for (const auto& t : r.trials) {
        EXPECT_NEAR(t.fft_velocity, 7.0, st.tolerance_mps);
        EXPECT_NEAR(t.music_peaks.at(0), 7.0, st.tolerance_mps);
    }
    EXPECT_EQ(r.first.velocity.size(), st.music.grid.size());
    EXPECT_EQ(r.first.music.size(), r.first.velocity.size());
    RadarConfig one;
    one.M = 1;
    EXPECT_THROW(doppler_superres(one, ChannelModel{}, st, StageFormats{}.msg, 1, 1), std::invalid_argument);
}

TEST(DopplerStudyCheck, ResolutionNeedsEveryTruth) {
    const std::vector<Target> truths{{10.0, 0.0, 10.0}, {10.0, 0.0, 14.0}};
    auto peak = [](double v) { return SpectralPeak{0, v, 1.0}; };
    const std::vector<SpectralPeak> good{peak(14.4), peak(9.3)}, one{peak(12.0)}, off{peak(10.2), peak(16.0)};
    EXPECT_TRUE(velocities_resolved(good, truths, 1.0));
    EXPECT_FALSE(velocities_resolved(one, truths, 1.0));
    EXPECT_FALSE(velocities_resolved(off, truths, 1.0));
}

TEST(OpCount, SmallShapeMatchesClosedForm) {
    const OpShape sh[] = {{64, 4, 19, 4}};
    const auto rows = opcount(sh, 1);
    ASSERT_EQ(rows.size(), 12u);
    for (const auto& r : rows) EXPECT_TRUE(r.row.ok()) << to_string(r.pipeline) << " " << r.row.quantity;
    EXPECT_EQ(radar_for_shape({64, 4, 19, 4}).num_angles(), 19u);
    EXPECT_EQ(radar_for_shape({1024, 32, 181, 32}).num_angles(), 181u);
    EXPECT_THROW(radar_for_shape({64, 4, 1, 4}), std::invalid_argument);
    EXPECT_THROW(radar_for_shape({60, 4, 19, 4}), std::invalid_argument);
}

TEST(ExperimentConfigJson, DefaultsAndOverrides) {
    const ExperimentConfig d;
    EXPECT_EQ(d.mc_trials(), 50u);
    EXPECT_EQ(d.isac_trials(), 4u);
    ExperimentConfig f;
    f.full = true;
    EXPECT_EQ(f.mc_trials(), 200u);
    EXPECT_EQ(f.isac_trials(), 16u);

    const auto c = experiment_from_json(json::parse(R"({
        "radar": {"P": 256, "L": 8},
        "channel": {"noise_dbm": "-inf"},
        "targets": [{"r": 5, "phi": 10}],
        "noise_dbm": [-100, -90],
        "formats": {"dbf": "20:2"},
        "wordlength": {"stages": ["dbf", "ifft"], "widths": [12, 16]},
        "doppler": {"D": 1, "v_step": 0.5},
        "opcount": {"shapes": [[64, 4, 19, 4]]},
        "configs": ["all-sarp", "baseline"],
        "sweep": {"axis": "kappa_db", "values": [0, 5]},
        "policy": {"sarp_if": 256},
        "trials": 7, "seed": 99})"));
    EXPECT_EQ(c.radar_on(RadarConfig{}).P, 256u);
    EXPECT_EQ(c.channel_on().noise_dbm, -kInf);
    ASSERT_TRUE(c.targets.has_value());
    EXPECT_EQ(c.targets->size(), 1u);
    EXPECT_EQ(c.noise_grid, (std::vector<double>{-100, -90}));
    EXPECT_EQ(c.formats.dbf.W, 20);
    EXPECT_EQ(c.stages, (std::vector<Stage>{Stage::dbf, Stage::ifft}));
    EXPECT_EQ(c.widths, (std::vector<int>{12, 16}));
    EXPECT_EQ(c.doppler.music.D, 1u);
    EXPECT_DOUBLE_EQ(c.doppler.music.grid.step, 0.5);
    EXPECT_EQ(c.op_shapes.size(), 1u);
    EXPECT_EQ(c.configs, (std::vector<IsacConfig>{IsacConfig::all_sarp, IsacConfig::baseline}));
    EXPECT_EQ(c.sweep.axis, SweepAxis::kappa);
    EXPECT_EQ(c.isac.policy.sarp_if, 256u);
    EXPECT_EQ(c.mc_trials(), 7u);
    EXPECT_EQ(c.isac_trials(), 7u);
    EXPECT_EQ(c.seed, 99u);
}

TEST(ExperimentConfigJson, RejectsBadInput) {
    for (const char* bad : {R"({"trails": 3})", R"({"trials": 0})", R"({"trials": -1})", R"({"radar": {"P": 3}})",
                            R"({"configs": ["fastest"]})", R"({"wordlength": {"stages": ["adc"]}})",
                            R"({"wordlength": {"widths": [1]}})", R"({"opcount": {"shapes": [[64, 4, 19]]}})",
                            R"({"sweep": {"axis": "speed"}})", R"({"doppler": {"v_step": 0}})",
                            R"({"noise_dbm": []})", R"({"targets": [{"r": 1}]})", R"({"isac": {"horizon_s": -1}})"})
        EXPECT_THROW(experiment_from_json(json::parse(bad)), config_error) << bad;
}

TEST(Commands, SameSeedSameBytes) {
    const auto root = std::filesystem::temp_directory_path() / "arsp_cmd_repro";
    std::filesystem::remove_all(root);
    ExperimentConfig c;
    c.trials = 1;
    c.radar = json{{"P", 256}, {"L", 8}};
    c.noise_grid = {-90.0};
    c.op_shapes = {{64, 4, 19, 4}};
    for (const char* name : {"rmse-sweep", "opcount"}) {
        const auto a = run_experiment(name, c, root / "a");
        const auto b = run_experiment(name, c, root / "b");
        ASSERT_EQ(a.csv.size(), b.csv.size());
        for (std::size_t k = 0; k < a.csv.size(); ++k) {
            const auto ta = slurp(a.csv[k]);
            EXPECT_FALSE(ta.empty());
            EXPECT_EQ(ta, slurp(b.csv[k])) << a.csv[k];
        }
    }
    EXPECT_EQ(slurp(root / "a" / "rmse_sweep.csv").substr(0, 56),
              "noise_dbm,target,pipeline,rmse_range_m,rmse_azimuth_deg,");
    c.seed = 2;
    run_experiment("rmse-sweep", c, root / "c");
    EXPECT_NE(slurp(root / "a" / "rmse_sweep.csv"), slurp(root / "c" / "rmse_sweep.csv"));
    EXPECT_THROW(run_experiment("fig9", c, root / "d"), std::invalid_argument);
}
