#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "arsp/adaptive.hpp"

using namespace arsp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const RspSetup& two_pulse_setup() {
    static const RspSetup s{[] {
        RadarConfig c;
        c.M = 2;
        return c;
    }()};
    return s;
}

ChannelModel noise_only(double dbm) {
    ChannelModel ch;
    ch.noise_dbm = dbm;
    return ch;
}

std::vector<Target> three_targets() {
    return {{6.0, -40.0, 3.0, 10.0, false}, {15.0, 12.0, -5.0, 5.0, false}, {28.0, 55.0, 8.0, 1.0, false}};
}

long count_source(const std::vector<Detection>& d, Pipeline p) {
    return std::count_if(d.begin(), d.end(), [&](const Detection& x) { return x.source == p; });
}

}  // namespace

TEST(NoiseFloor, PureNoiseWithinOneDb) {
    const auto& s = two_pulse_setup();
    for (double dbm : {-100.0, -90.0, -75.0}) {
        Rng rng(static_cast<std::uint64_t>(-dbm));
        const auto X = synthesize_cube(s.cfg, {}, noise_only(dbm), s.train, rng);
        EXPECT_NEAR(estimate_noise_floor(X, s.train, s.gt), dbm, 1.0);
    }
}

TEST(NoiseFloor, RobustToStrongTargets) {
    const auto& s = two_pulse_setup();
    Rng rng(3);
    const auto ts = three_targets();
    const auto X = synthesize_cube(s.cfg, ts, noise_only(-90.0), s.train, rng);
    EXPECT_NEAR(estimate_noise_floor(X, s.train, s.gt), -90.0, 1.5);
}

TEST(NoiseFloor, SinglePulseFallsBackToOnePacket) {
    RadarConfig c;
    c.M = 1;
    const RspSetup s(c);
    Rng rng(4);
    const auto X = synthesize_cube(c, {}, noise_only(-85.0), s.train, rng);
    EXPECT_NEAR(estimate_noise_floor(X, s.train, s.gt), -85.0, 1.0);
}

TEST(NoiseFloor, ZeroCubeIsMinusInfinity) {
    const auto& s = two_pulse_setup();
    const DataCube X(s.cfg.P, s.cfg.L, s.cfg.M);
    EXPECT_EQ(estimate_noise_floor(X, s.train, s.gt), -kInf);
}

TEST(SelectRsp, PolicyExamples) {
    const SwitchPolicy pol;
    EXPECT_EQ(select_rsp(-100.0, 1, pol), (RspChoice{Pipeline::sarp, 512}));
    EXPECT_EQ(select_rsp(-70.0, 1, pol).mode, Pipeline::mjarp);
    EXPECT_EQ(select_rsp(-90.0, 3, pol).mode, Pipeline::mjarp);
    EXPECT_EQ(select_rsp(-78.0, 1, pol).mode, Pipeline::mjarp);
    EXPECT_EQ(select_rsp(-kInf, 3, pol).mode, Pipeline::sarp);
    EXPECT_THROW(select_rsp(-90.0, 4, pol), std::invalid_argument);
    EXPECT_THROW(select_rsp(-90.0, 0, pol), std::invalid_argument);
}

TEST(SelectRsp, StepFunctionOverGrid) {
    const SwitchPolicy pol;
    const double switch_points[] = {-78.0, -88.0, -98.0};
    for (int tier = 1; tier <= 3; ++tier) {
        int switches = 0;
        Pipeline prev = Pipeline::sarp;
        for (int k = 0; k <= 120; ++k) {
            const double nf = -120.0 + 0.5 * k;
            const auto c = select_rsp(nf, tier, pol);
            EXPECT_EQ(c.mode, nf < switch_points[tier - 1] ? Pipeline::sarp : Pipeline::mjarp) << nf;
            switches += c.mode != prev;
            prev = c.mode;
        }
        EXPECT_EQ(switches, 1);
    }
}

TEST(SwitchPolicyCheck, ValidationAndRanks) {
    SwitchPolicy pol;
    EXPECT_NO_THROW(pol.validate());
    EXPECT_EQ(pol.tier_for_rank(0), 1);
    EXPECT_EQ(pol.tier_for_rank(2), 3);
    EXPECT_EQ(pol.tier_for_rank(7), 3);
    pol.thresholds[2] = -70.0;
    EXPECT_THROW(pol.validate(), std::invalid_argument);
    pol.thresholds[2] = kInf;
    EXPECT_THROW(pol.validate(), std::invalid_argument);
    pol = SwitchPolicy{};
    pol.thresholds.clear();
    EXPECT_THROW(pol.validate(), std::invalid_argument);
}

TEST(Reconfigurable, NoiseFreeMatchesBothFixedPipelines) {
    const auto& s = two_pulse_setup();
    ChannelModel ch;
    ch.kappa_db = kInf;
    ch.noise_dbm = -kInf;
    ch.clutter_dbm = -kInf;
    ch.swerling = false;
    Rng rng(1);
    const auto ts = three_targets();
    const auto X = synthesize_cube(s.cfg, ts, ch, s.train, rng);
    CleanConfig cc;
    cc.threshold = default_clean_threshold(ch);
    const auto r = reconfigurable_localize(X, SwitchPolicy{}, s, cc);
    EXPECT_LT(r.noise_floor_dbm, -110.0);
    for (Pipeline mode : {Pipeline::sarp, Pipeline::mjarp}) {
        const auto ref = clean_iterate(X.packet(0), mode, s, cc);
        ASSERT_EQ(ref.size(), r.detections.size());
        for (std::size_t n = 0; n < ref.size(); ++n) {
            EXPECT_EQ(ref[n].phi_idx, r.detections[n].phi_idx);
            EXPECT_EQ(ref[n].r_idx, r.detections[n].r_idx);
        }
    }
    EXPECT_EQ(count_source(r.detections, Pipeline::sarp), 3);
}

TEST(Reconfigurable, TagsFollowSensedNoiseFloor) {
    const auto& s = two_pulse_setup();
    const auto ts = three_targets();
    CleanConfig cc;
    cc.max_iters = 3;
    cc.threshold = 1e-15;
    struct Case {
        double noise;
        long sarp;
    };
    for (const auto c : {Case{-110.0, 3}, Case{-93.0, 2}, Case{-83.0, 1}, Case{-70.0, 0}}) {
        Rng rng(2);
        const auto X = synthesize_cube(s.cfg, ts, noise_only(c.noise), s.train, rng);
        const auto r = reconfigurable_localize(X, SwitchPolicy{}, s, cc);
        EXPECT_NEAR(r.noise_floor_dbm, c.noise, 1.5);
        ASSERT_EQ(r.detections.size(), 3u);
        EXPECT_EQ(count_source(r.detections, Pipeline::sarp), c.sarp) << c.noise;
        EXPECT_EQ(count_source(r.detections, Pipeline::mjarp), 3 - c.sarp) << c.noise;
    }
}

TEST(Reconfigurable, HighSnrEqualsAllSarp) {
    const auto& s = two_pulse_setup();
    const auto ts = three_targets();
    Rng rng(5);
    const auto X = synthesize_cube(s.cfg, ts, noise_only(-110.0), s.train, rng);
    CleanConfig cc;
    cc.max_iters = 3;
    cc.threshold = 1e-15;
    const auto r = reconfigurable_localize(X, SwitchPolicy{}, s, cc);
    const auto ref = clean_iterate(X.packet(0), Pipeline::sarp, s, cc);
    ASSERT_EQ(ref.size(), r.detections.size());
    for (std::size_t n = 0; n < ref.size(); ++n) {
        EXPECT_EQ(ref[n].phi_idx, r.detections[n].phi_idx);
        EXPECT_EQ(ref[n].r_idx, r.detections[n].r_idx);
        EXPECT_EQ(ref[n].amp, r.detections[n].amp);
    }
}
