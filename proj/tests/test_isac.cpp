#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "arsp/isac.hpp"

using namespace arsp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Moving straight toward or away from the BS keeps the azimuth fixed.
MuTrajectory radial_mover(double r0, double az_deg, double v, double rcs) {
    const double s = std::sin(deg_to_rad(az_deg)), c = std::cos(deg_to_rad(az_deg));
    return {r0 * s, r0 * c, v * s, v * c, rcs};
}

IsacScenario clean_channel_scenario() {
    IsacScenario sc;
    sc.channel.noise_dbm = -kInf;
    sc.channel.clutter_dbm = -kInf;
    sc.channel.kappa_db = kInf;
    sc.channel.swerling = false;
    sc.mus = {radial_mover(12.0, -20.0, 4.0, 10.0), radial_mover(20.0, 15.0, -3.0, 5.0),
              radial_mover(28.0, 40.0, 2.0, 1.0)};
    return sc;
}

double closed_form_msps(const IsacScenario& sc, double align_s) {
    return (sc.horizon_s - align_s) / sc.horizon_s * sc.symbol_rate / static_cast<double>(sc.num_served()) / 1e6;
}

void expect_consistent_timeline(const ThroughputReport& r, const IsacScenario& sc) {
    ASSERT_FALSE(r.timeline.empty());
    std::size_t aligns = 0;
    double t = 0.0;
    for (const auto& e : r.timeline) {
        EXPECT_NEAR(e.start, t, 1e-9);
        EXPECT_GT(e.duration, 0.0);
        t = e.start + e.duration;
        aligns += e.state == TimelineEntry::State::align;
    }
    EXPECT_EQ(aligns, r.alignments);
    EXPECT_GE(r.alignments, 1u);
    EXPECT_NEAR(r.time_in(TimelineEntry::State::align) + r.time_in(TimelineEntry::State::comm), sc.horizon_s,
                sc.quantum_s);
    for (double v : r.throughput_msps) EXPECT_GE(v, 0.0);
}

}  // namespace

TEST(Trajectory, KinematicsMatchGeometry) {
    const MuTrajectory m{3.0, 4.0, 1.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(m.range(0.0), 5.0);
    EXPECT_NEAR(m.azimuth_deg(0.0), rad_to_deg(std::atan2(3.0, 4.0)), 1e-12);
    EXPECT_DOUBLE_EQ(m.radial_velocity(0.0), 0.6);
    const auto r = radial_mover(10.0, 30.0, 2.0, 1.0);
    EXPECT_NEAR(r.azimuth_deg(0.7), 30.0, 1e-9);
    EXPECT_NEAR(r.radial_velocity(0.7), 2.0, 1e-12);
    EXPECT_NEAR(r.range(0.5), 11.0, 1e-12);
    const auto tgt = MuTrajectory{0.0, 10.0, 0.0, 0.0, 1.0, true}.at(0.0);
    EXPECT_TRUE(tgt.is_clutter);
    EXPECT_EQ(tgt.radial_velocity(), 0.0);
}

TEST(IsacConfigNames, RoundTrip) {
    for (auto c : kAllIsacConfigs) EXPECT_EQ(isac_config_from_string(to_string(c)), c);
    EXPECT_THROW(isac_config_from_string("half-sarp"), std::invalid_argument);
    for (auto a : {SweepAxis::num_targets, SweepAxis::kappa, SweepAxis::noise_floor})
        EXPECT_EQ(sweep_axis_from_string(to_string(a)), a);
    EXPECT_THROW(sweep_axis_from_string("speed"), std::invalid_argument);
}

TEST(IsacScenarioCheck, Validation) {
    auto sc = clean_channel_scenario();
    EXPECT_NO_THROW(sc.validate());
    sc.horizon_s = 0.0;
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    sc = clean_channel_scenario();
    sc.latency.mjarp = 0.0;
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    sc = clean_channel_scenario();
    sc.mus.push_back(radial_mover(40.0, 0.0, 10.0, 1.0));  // leaves the window before the horizon
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    sc = clean_channel_scenario();
    sc.radar.M = 2;
    EXPECT_THROW(sc.validate(), std::invalid_argument);
    EXPECT_NO_THROW(default_isac_scenario().validate());
    EXPECT_EQ(default_isac_scenario().num_served(), 10u);
}

TEST(Latency, RelativeDurations) {
    const LatencyModel lm;
    EXPECT_DOUBLE_EQ(lm.of(Pipeline::jarp), 0.124);
    EXPECT_NEAR(lm.of(Pipeline::mjarp), 0.124 / 2.15, 1e-15);
    EXPECT_NEAR(lm.of(Pipeline::sarp), 0.124 / 4.3, 1e-15);
    EXPECT_LT(lm.of(Pipeline::sarp), lm.of(Pipeline::mjarp));
}

TEST(RunIsac, RadialMoversNeedOneAlignment) {
    const auto sc = clean_channel_scenario();
    const auto r = run_isac(sc, IsacConfig::all_mjarp);
    EXPECT_EQ(r.alignments, 1u);
    ASSERT_EQ(r.throughput_msps.size(), 3u);
    const double expected = closed_form_msps(sc, sc.latency.of(Pipeline::mjarp));
    for (double v : r.throughput_msps) EXPECT_NEAR(v, expected, 1e-6 * expected);
    expect_consistent_timeline(r, sc);
}

TEST(RunIsac, FasterRspWinsWhenDetectionIsEqual) {
    const auto sc = clean_channel_scenario();
    const auto sarp = run_isac(sc, IsacConfig::all_sarp);
    const auto mjarp = run_isac(sc, IsacConfig::all_mjarp);
    EXPECT_EQ(sarp.alignments, 1u);
    EXPECT_NEAR(sarp.mean_msps(), closed_form_msps(sc, sc.latency.of(Pipeline::sarp)), 1e-6 * sarp.mean_msps());
    EXPECT_GE(sarp.mean_msps(), mjarp.mean_msps());
}

TEST(RunIsac, ClutterIsNeverServed) {
    auto sc = clean_channel_scenario();
    sc.mus.push_back({-10.0, 20.0, 0.0, 0.0, 5.0, true});
    const auto r = run_isac(sc, IsacConfig::all_mjarp);
    EXPECT_EQ(r.throughput_msps.size(), 3u);
    EXPECT_EQ(r.alignments, 1u);
    const double expected = closed_form_msps(sc, sc.latency.of(Pipeline::mjarp));
    for (double v : r.throughput_msps) EXPECT_NEAR(v, expected, 1e-6 * expected);
}

TEST(RunIsac, LateralMotionForcesRealignment) {
    auto sc = clean_channel_scenario();
    sc.mus[0] = {-6.0, 12.0, 8.0, 0.0, 10.0};
    const auto r = run_isac(sc, IsacConfig::all_sarp);
    EXPECT_GT(r.alignments, 1u);
    expect_consistent_timeline(r, sc);
}

TEST(Baseline, StaticMusClosedForm) {
    IsacScenario sc;
    sc.mus = {{-5.0, 20.0, 0.0, 0.0, 1.0}, {6.0, 25.0, 0.0, 0.0, 1.0}};
    sc.baseline.sectors = 32;
    sc.baseline.per_sector_s = 5e-3;
    const auto r = baseline_80211ad(sc);
    EXPECT_EQ(r.alignments, 1u);
    const double expected = closed_form_msps(sc, 0.16);
    for (double v : r.throughput_msps) EXPECT_NEAR(v, expected, 1e-6 * expected);
    expect_consistent_timeline(r, sc);
}

TEST(Baseline, LongerTrainingLowersThroughput) {
    auto sc = default_isac_scenario();
    sc.baseline.per_sector_s = 2e-3;
    double prev = kInf;
    for (int k = 0; k < 4; ++k) {
        const auto r = baseline_80211ad(sc);
        expect_consistent_timeline(r, sc);
        EXPECT_LT(r.mean_msps(), prev);
        prev = r.mean_msps();
        sc.baseline.per_sector_s *= 2.0;
    }
}

TEST(Baseline, ZeroMusZeroService) {
    IsacScenario sc;
    const auto r = baseline_80211ad(sc);
    EXPECT_TRUE(r.throughput_msps.empty());
    EXPECT_EQ(r.mean_msps(), 0.0);
    EXPECT_EQ(r.time_in(TimelineEntry::State::comm), 0.0);
    sc.mus = {{0.0, 10.0, 0.0, 0.0, 5.0, true}};
    EXPECT_EQ(run_isac(sc, IsacConfig::all_sarp).mean_msps(), 0.0);
}

TEST(Trials, SeedsAdvanceAndSummaryAverages) {
    IsacScenario sc;
    sc.mus = {{-5.0, 20.0, 0.0, 0.0, 1.0}, {6.0, 25.0, 0.0, 0.0, 1.0}};
    sc.seed = 40;
    const auto reps = run_isac_trials(sc, IsacConfig::baseline, 3);
    ASSERT_EQ(reps.size(), 3u);
    const auto s = summarize(reps);
    EXPECT_NEAR(s.mean_msps(), reps[0].mean_msps(), 1e-9);
    EXPECT_DOUBLE_EQ(s.alignments, 1.0);
    EXPECT_THROW(run_isac_trials(sc, IsacConfig::baseline, 0), std::invalid_argument);
}

TEST(Sweep, SinglePointSingleRow) {
    const auto sc = clean_channel_scenario();
    const double v[] = {-kInf};
    const IsacConfig cfg[] = {IsacConfig::all_sarp};
    const auto rows = sweep(SweepAxis::noise_floor, v, sc, cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].config, IsacConfig::all_sarp);
    EXPECT_DOUBLE_EQ(rows[0].alignments, 1.0);
    EXPECT_THROW(sweep(SweepAxis::noise_floor, std::span<const double>{}, sc, cfg), std::invalid_argument);
}

TEST(Sweep, BaselineShareFallsWithMoreMus) {
    auto sc = default_isac_scenario();
    sc.baseline.per_sector_s = 1e-3;
    const double counts[] = {2, 4, 6, 8, 10};
    const IsacConfig cfg[] = {IsacConfig::baseline};
    const auto rows = sweep(SweepAxis::num_targets, counts, sc, cfg);
    ASSERT_EQ(rows.size(), 5u);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(rows[k].throughput_msps, rows[k - 1].throughput_msps);
    const double bad[] = {13};
    EXPECT_THROW(sweep(SweepAxis::num_targets, bad, sc, cfg), std::invalid_argument);
}
