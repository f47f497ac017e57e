#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "arsp/clean.hpp"

using namespace arsp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ChannelModel clean_channel() {
    ChannelModel ch;
    ch.kappa_db = kInf;
    ch.noise_dbm = -kInf;
    ch.clutter_dbm = -kInf;
    ch.swerling = false;
    return ch;
}

std::size_t angle_index(const RadarConfig& cfg, double deg) {
    return static_cast<std::size_t>(std::lround((deg - cfg.fov_min_deg) / cfg.angle_step_deg));
}

const RspSetup& full_setup() {
    static const RspSetup s{[] {
        RadarConfig c;
        c.M = 1;
        return c;
    }()};
    return s;
}

}  // namespace

TEST(Psr, UnitBroadsideColumnsEqualSequence) {
    const auto& s = full_setup();
    Detection d = make_detection(1.0, angle_index(s.cfg, 0.0), 0, s.cfg, Pipeline::mjarp);
    const auto S = psr_synthesize(d, s);
    for (std::size_t p = 0; p < s.cfg.P; ++p)
        for (std::size_t l = 0; l < s.cfg.L; ++l) EXPECT_EQ(S(p, l), s.train.G(0, p));
    d.amp = 0.0;
    const auto Z = psr_synthesize(d, s);
    for (const auto& v : Z.data()) EXPECT_EQ(v, cplx{});
    d.r_idx = s.cfg.P;
    EXPECT_THROW(psr_synthesize(d, s), target_out_of_window);
}

TEST(Psr, RoundTripPeaksAtCell) {
    const auto& s = full_setup();
    const auto d = make_detection(cplx(0.3, -0.2), angle_index(s.cfg, -33.0), 250, s.cfg, Pipeline::mjarp);
    const auto G = jarp_map(fast_time_fft(psr_synthesize(d, s)), s.W, s.gt.row(0));
    const auto pk = peak_search_2d(G.vals);
    EXPECT_EQ(pk.row, d.phi_idx);
    EXPECT_EQ(pk.col, d.r_idx);
    EXPECT_NEAR(std::abs(pk.value / s.gain - d.amp), 0.0, 1e-12);
}

TEST(Psr, MatchesSynthesizedTarget) {
    const auto& s = full_setup();
    const Target t{s.cfg.range_of_bin(300), s.cfg.angle_deg(120), 0.0, 1.0, false};
    Rng rng(1);
    const auto ch = clean_channel();
    const auto X = synthesize_cube(s.cfg, std::span<const Target>(&t, 1), ch, s.train, rng);
    const double a = ch.amplitude_constant(s.cfg) / (t.range_m * t.range_m);
    const auto S = psr_synthesize(make_detection(a, 120, 300, s.cfg, Pipeline::mjarp), s);
    for (std::size_t i = 0; i < S.size(); ++i)
        EXPECT_NEAR(std::abs(S.data()[i] - X.packet(0).data()[i]), 0.0, 1e-12 * a);
}

class CleanModes : public ::testing::TestWithParam<Pipeline> {};

TEST_P(CleanModes, ThreeTargetsRecoveredInAmplitudeOrder) {
    const auto& s = full_setup();
    const std::vector<Target> ts{{6.0, -40.0, 0.0, 10.0, false},
                                 {15.0, 12.0, 0.0, 5.0, false},
                                 {28.0, 55.0, 0.0, 1.0, false}};
    Rng rng(1);
    const auto ch = clean_channel();
    const auto X = synthesize_cube(s.cfg, ts, ch, s.train, rng);
    CleanConfig cc;
    cc.threshold = default_clean_threshold(ch);
    const auto res = clean_run(X.packet(0), GetParam(), s, cc);
    ASSERT_EQ(res.detections.size(), 3u);
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_EQ(res.detections[n].phi_idx, angle_index(s.cfg, ts[n].azimuth_deg));
        EXPECT_EQ(static_cast<long>(res.detections[n].r_idx), s.cfg.delay_bin(ts[n].range_m));
        EXPECT_EQ(res.detections[n].source, GetParam());
        if (n > 0) {
            EXPECT_GE(std::abs(res.detections[n - 1].amp), std::abs(res.detections[n].amp));
        }
    }
    for (std::size_t k = 1; k < res.residue_energy.size(); ++k)
        EXPECT_LT(res.residue_energy[k], res.residue_energy[k - 1]);
}

TEST_P(CleanModes, OwnPsrRemovesTarget) {
    const auto& s = full_setup();
    const Target t{9.0, 21.0, 0.0, 3.0, false};
    Rng rng(1);
    const auto X = synthesize_cube(s.cfg, std::span<const Target>(&t, 1), clean_channel(), s.train, rng);
    CleanConfig cc;
    cc.max_iters = 1;
    const auto dets = clean_iterate(X.packet(0), GetParam(), s, cc);
    ASSERT_EQ(dets.size(), 1u);
    const auto& d = dets[0];
    const auto residue = X.packet(0) - psr_synthesize(d, s);
    const auto G = jarp_map(fast_time_fft(residue), s.W, s.gt.row(0));
    EXPECT_LT(std::abs(G.vals(d.phi_idx, d.r_idx)) / s.gain, 1e-6 * std::abs(d.amp));
}

TEST_P(CleanModes, NoiseOnlyBelowThresholdGivesNothing) {
    const auto& s = full_setup();
    ChannelModel ch;
    ch.noise_dbm = -100.0;
    Rng rng(5);
    const auto X = synthesize_cube(s.cfg, {}, ch, s.train, rng);
    CleanConfig cc;
    cc.threshold = default_clean_threshold(ch);
    EXPECT_TRUE(clean_iterate(X.packet(0), GetParam(), s, cc).empty());
}

TEST_P(CleanModes, SameCellTargetsGiveOneDetection) {
    const auto& s = full_setup();
    const std::vector<Target> ts{{12.0, 10.0, 2.0, 5.0, false}, {12.0, 10.0, 6.0, 5.0, false}};
    Rng rng(1);
    const auto ch = clean_channel();
    const auto X = synthesize_cube(s.cfg, ts, ch, s.train, rng);
    CleanConfig cc;
    cc.threshold = default_clean_threshold(ch);
    const auto dets = clean_iterate(X.packet(0), GetParam(), s, cc);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].phi_idx, angle_index(s.cfg, 10.0));
}

TEST_P(CleanModes, CountBoundedByMaxIters) {
    const auto& s = full_setup();
    std::vector<Target> ts;
    for (int k = 0; k < 5; ++k) ts.push_back({4.0 + 5.0 * k, -60.0 + 25.0 * k, 0.0, 5.0, false});
    Rng rng(1);
    const auto X = synthesize_cube(s.cfg, ts, clean_channel(), s.train, rng);
    CleanConfig cc;
    cc.max_iters = 3;
    EXPECT_EQ(clean_iterate(X.packet(0), GetParam(), s, cc).size(), 3u);
}

INSTANTIATE_TEST_SUITE_P(Both, CleanModes, ::testing::Values(Pipeline::sarp, Pipeline::mjarp),
                         [](const auto& info) { return to_string(info.param); });

TEST(CleanConfigCheck, Validation) {
    CleanConfig cc;
    cc.threshold = 0.0;
    EXPECT_THROW(cc.validate(), std::invalid_argument);
    cc.threshold = 1.0;
    cc.max_iters = 0;
    EXPECT_THROW(cc.validate(), std::invalid_argument);
}

TEST(CleanMixed, ScheduleFollowsRank) {
    const auto& s = full_setup();
    const std::vector<Target> ts{{6.0, -40.0, 0.0, 10.0, false}, {15.0, 12.0, 0.0, 5.0, false}};
    Rng rng(1);
    const auto X = synthesize_cube(s.cfg, ts, clean_channel(), s.train, rng);
    CleanConfig cc;
    cc.max_iters = 2;
    const auto res = clean_in_dbf_image(X.packet(0), s, cc,
                                        [](std::size_t n) { return n == 0 ? Pipeline::sarp : Pipeline::mjarp; });
    ASSERT_EQ(res.detections.size(), 2u);
    EXPECT_EQ(res.detections[0].source, Pipeline::sarp);
    EXPECT_EQ(res.detections[1].source, Pipeline::mjarp);
    EXPECT_EQ(static_cast<long>(res.detections[1].r_idx), s.cfg.delay_bin(15.0));
}
