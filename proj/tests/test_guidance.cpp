#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lytnet/error.hpp"
#include "lytnet/guidance.hpp"
#include "oracles.hpp"

using namespace lytnet;

namespace {

oracle::Log replay(const std::vector<oracle::Frame>& frames, const GuidanceConfig& config = {}) {
    GuidanceSession session(config);
    oracle::Log log;
    for (const auto& f : frames) {
        FrameObservation obs;
        obs.t_ms = f.t_ms;
        obs.probabilities = f.probs;
        obs.coords = f.coords;
        for (const auto& ev : session.process(obs)) log.emplace_back(ev.t_ms, std::string(to_string(ev.kind)));
    }
    return log;
}

FrameObservation frame(std::int64_t t, Coords coords, int cls = 4) {
    FrameObservation obs;
    obs.t_ms = t;
    obs.coords = coords;
    obs.probabilities = oracle::one_hot(cls);
    return obs;
}

/// Normalized coords of a midline starting at the bottom center and rotated
/// `deg` clockwise from image-up, for a 768x576 frame.
Coords rotated_midline(double deg) {
    const double r = deg * std::numbers::pi / 180.0;
    const double sx = 383.5, sy = 517.5, len = 300.0;
    return {sx / 767.0, sy / 575.0, (sx + len * std::sin(r)) / 767.0, (sy - len * std::cos(r)) / 575.0};
}

}  // namespace

TEST(Homography, IdentityAndScale) {
    const Point2 p{12.5, -3.0};
    const Point2 a = to_ground(p, Homography::identity());
    EXPECT_EQ(a.x, 12.5);
    EXPECT_EQ(a.y, -3.0);
    const Point2 b = to_ground(p, Homography({2, 0, 0, 0, 2, 0, 0, 0, 1}));
    EXPECT_EQ(b.x, 25.0);
    EXPECT_EQ(b.y, -6.0);
}

TEST(Homography, RandomRoundTrip) {
    std::mt19937_64 rng(1);
    int checked = 0;
    while (checked < 200) {
        std::array<double, 9> m{};
        for (double& v : m) v = oracle::uniform(rng, -1, 1);
        m[8] = oracle::uniform(rng, 1, 2);
        m[6] = oracle::uniform(rng, -1e-3, 1e-3);
        m[7] = oracle::uniform(rng, -1e-3, 1e-3);
        const Homography h(m);
        if (std::abs(h.determinant()) < 1e-3) continue;
        const Point2 p{oracle::uniform(rng, 0, 767), oracle::uniform(rng, 0, 575)};
        try {
            const Point2 back = h.inverse().apply(h.apply(p));
            EXPECT_NEAR(back.x, p.x, 1e-6 * std::max(1.0, std::abs(p.x)));
            EXPECT_NEAR(back.y, p.y, 1e-6 * std::max(1.0, std::abs(p.y)));
            ++checked;
        } catch (const DegeneratePointError&) {
        }
    }
}

TEST(Homography, SingularAndHorizon) {
    EXPECT_THROW(Homography({1, 2, 3, 2, 4, 6, 0, 0, 1}), ConfigurationError);
    const Homography h({1, 0, 0, 0, 1, 0, 0, -0.01, 1});
    EXPECT_NO_THROW(h.apply({0, 50}));
    EXPECT_THROW(h.apply({0, 100}), DegeneratePointError);
    EXPECT_THROW(h.apply({0, 150}), DegeneratePointError);
}

TEST(Position, Examples) {
    EXPECT_EQ(position_instruction(383.5, 768), PositionInstruction::InRange);
    EXPECT_EQ(position_instruction(383.5 + 0.085 * 768 + 1, 768), PositionInstruction::MoveLeft);
    EXPECT_EQ(position_instruction(449.78, 768), PositionInstruction::MoveLeft);
    EXPECT_EQ(position_instruction(317.22, 768), PositionInstruction::MoveRight);
    EXPECT_EQ(position_instruction(383.5 + 0.085 * 768, 768), PositionInstruction::InRange);
    EXPECT_EQ(position_instruction(383.5 - 0.085 * 768, 768), PositionInstruction::InRange);
}

TEST(Position, AntisymmetricUnderReflection) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double x = oracle::uniform(rng, -100, 900);
        const auto a = position_instruction(x, 768);
        const auto b = position_instruction(767.0 - x, 768);
        if (a == PositionInstruction::InRange) {
            EXPECT_EQ(b, PositionInstruction::InRange);
        } else {
            EXPECT_EQ(b, a == PositionInstruction::MoveLeft ? PositionInstruction::MoveRight
                                                            : PositionInstruction::MoveLeft);
        }
    }
}

TEST(Orientation, Examples) {
    EXPECT_EQ(orientation_instruction(0.0), RotationInstruction::InRange);
    EXPECT_EQ(orientation_instruction(-10.5), RotationInstruction::RotateLeft);
    EXPECT_EQ(orientation_instruction(10.0), RotationInstruction::InRange);
    EXPECT_EQ(orientation_instruction(-10.0), RotationInstruction::InRange);
    EXPECT_EQ(orientation_instruction(10.5), RotationInstruction::RotateRight);
}

TEST(DeltaTheta, PlanarAngles) {
    const Homography id = Homography::identity();
    EXPECT_NEAR(delta_theta_deg({0.3, 0.9, 0.3, 0.2}, id, 768, 576), 0.0, 1e-9);
    EXPECT_NEAR(delta_theta_deg(rotated_midline(15.0), id, 768, 576), 15.0, 1e-9);
    EXPECT_NEAR(delta_theta_deg(rotated_midline(-40.0), id, 768, 576), -40.0, 1e-9);
    EXPECT_THROW(delta_theta_deg({0.4, 0.4, 0.4, 0.4}, id, 768, 576), UndefinedDirectionError);
}

TEST(DeltaTheta, MirrorFlipsSign) {
    std::mt19937_64 rng(3);
    const Homography id = Homography::identity();
    for (int i = 0; i < 200; ++i) {
        const Coords c{oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0.6, 1), oracle::uniform(rng, 0, 1),
                       oracle::uniform(rng, 0, 0.4)};
        const Coords m{1 - c[0], c[1], 1 - c[2], c[3]};
        EXPECT_NEAR(delta_theta_deg(c, id, 768, 576), -delta_theta_deg(m, id, 768, 576), 1e-9);
    }
}

TEST(DeltaTheta, ForwardAxisFollowsHomography) {
    // A pure ground rotation turns forward and the midline together.
    const double r = 0.3;
    const Homography rot({std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1});
    EXPECT_NEAR(delta_theta_deg(rotated_midline(12.0), rot, 768, 576), 12.0, 1e-9);
}

TEST(SmoothedLight, Examples) {
    const std::vector<ClassProbabilities> red(5, oracle::one_hot(0));
    const auto a = smoothed_light_mode(red);
    EXPECT_EQ(a.mode, LightMode::Red);
    EXPECT_EQ(a.confidence, 1.0);
    EXPECT_TRUE(a.actionable);

    std::vector<ClassProbabilities> alt;
    for (int i = 0; i < 5; ++i) alt.push_back(oracle::one_hot(i % 2));
    const auto b = smoothed_light_mode(alt);
    EXPECT_EQ(b.mode, LightMode::Red);
    EXPECT_NEAR(b.confidence, 0.6, 1e-12);
    EXPECT_FALSE(b.actionable);

    const std::vector<ClassProbabilities> cd(5, ClassProbabilities{0, 0, 0.5, 0.5, 0});
    const auto c = smoothed_light_mode(cd);
    EXPECT_EQ(c.mode, LightMode::Countdown);
    EXPECT_NEAR(c.confidence, 1.0, 1e-12);
    EXPECT_TRUE(c.actionable);

    const std::vector<ClassProbabilities> four(4, oracle::one_hot(1));
    EXPECT_FALSE(smoothed_light_mode(four).actionable);
    EXPECT_THROW(smoothed_light_mode({}), ValidationError);
}

TEST(SmoothedLight, ConfidenceNeverExceedsOne) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) {
        std::vector<ClassProbabilities> w;
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int k = 0; k < n; ++k) {
            ClassProbabilities p{};
            double s = 0;
            for (double& v : p) s += (v = oracle::uniform(rng, 0, 1));
            for (double& v : p) v /= s;
            w.push_back(p);
        }
        const auto r = smoothed_light_mode(w);
        EXPECT_LE(r.confidence, 1.0 + 1e-12);
        if (n < 5) {
            EXPECT_FALSE(r.actionable);
        }
    }
}

TEST(Events, NamesChannelsAndJson) {
    EXPECT_EQ(channel_for(EventKind::MoveLeft), Channel::Vibration);
    EXPECT_EQ(channel_for(EventKind::MoveRight), Channel::Vibration);
    EXPECT_EQ(channel_for(EventKind::RotateLeft), Channel::Beep1);
    EXPECT_EQ(channel_for(EventKind::RotateRight), Channel::Beep2);
    EXPECT_EQ(channel_for(EventKind::PositionOk), Channel::Voice);
    EXPECT_EQ(channel_for(EventKind::LightCountdown), Channel::Voice);
    for (int k = 0; k <= static_cast<int>(EventKind::LightNone); ++k) {
        const auto kind = static_cast<EventKind>(k);
        EXPECT_EQ(parse_event_kind(to_string(kind)), kind);
    }
    EXPECT_FALSE(parse_event_kind("Jump").has_value());
    EXPECT_EQ(to_json_line({2013, EventKind::MoveRight, Channel::Vibration}),
              R"({"t_ms":2013,"kind":"MoveRight","channel":"vibration"})");
}

TEST(Step, ScriptedStreams) {
    EXPECT_EQ(replay(oracle::drift_left_stream()), oracle::drift_left_expected());
    EXPECT_EQ(replay(oracle::in_range_red_stream()), oracle::in_range_red_expected());
    EXPECT_EQ(replay(oracle::red_green_flip_stream()), oracle::red_green_flip_expected());
}

TEST(Step, FlipIsImmediateButSpacedPerKind) {
    const std::vector<oracle::Frame> frames = {
        {0, oracle::one_hot(4), {0.1, 0.9, 0.1, 0.3}},     // MoveRight
        {100, oracle::one_hot(4), {0.9, 0.9, 0.9, 0.3}},   // MoveLeft at once
        {200, oracle::one_hot(4), {0.1, 0.9, 0.1, 0.3}},   // MoveRight fired 200 ms ago
        {2100, oracle::one_hot(4), {0.1, 0.9, 0.1, 0.3}},  // spacing elapsed
    };
    EXPECT_EQ(replay(frames), (oracle::Log{{0, "MoveRight"}, {100, "MoveLeft"}, {2100, "MoveRight"}}));
}

TEST(Step, LosingRangeRegressesStage) {
    GuidanceSession s;
    const Coords ok{0.5, 0.9, 0.5, 0.3};
    s.process(frame(0, ok));
    EXPECT_EQ(s.state().stage, Stage::Monitoring);
    const auto ev = s.process(frame(61, {0.1, 0.9, 0.1, 0.3}));
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::MoveRight);
    EXPECT_EQ(s.state().stage, Stage::Positioning);
    const auto back = s.process(frame(122, ok));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].kind, EventKind::PositionOk);
    EXPECT_EQ(back[1].kind, EventKind::OrientationOk);

    const auto tilt = s.process(frame(183, rotated_midline(30.0)));
    ASSERT_EQ(tilt.size(), 1u);
    EXPECT_EQ(tilt[0].kind, EventKind::RotateRight);
    EXPECT_EQ(s.state().stage, Stage::Orienting);
}

TEST(Step, LightsOnlyOnceOriented) {
    GuidanceSession s;
    for (int i = 0; i < 10; ++i) {
        for (const auto& ev : s.process(frame(61 * i, {0.1, 0.9, 0.1, 0.3}, 0))) {
            EXPECT_NE(ev.kind, EventKind::LightRed);
        }
    }
    const auto ev = s.process(frame(610, {0.5, 0.9, 0.5, 0.3}, 0));
    ASSERT_EQ(ev.size(), 3u);
    EXPECT_EQ(ev[2].kind, EventKind::LightRed);
}

TEST(Step, DegenerateStartpointSkipsPositionLogic) {
    GuidanceConfig config;
    config.homography = Homography({1, 0, 0, 0, 1, 0, 0, -0.002, 1});  // horizon at y = 500 px
    GuidanceSession s(config);
    EXPECT_TRUE(s.process(frame(0, {0.1, 0.95, 0.1, 0.1})).empty());
    EXPECT_EQ(s.state().stage, Stage::Positioning);
    EXPECT_EQ(s.state().window.size(), 1u);
}

TEST(Step, RejectsBadObservations) {
    GuidanceSession s;
    s.process(frame(100, {0.5, 0.9, 0.5, 0.3}));
    EXPECT_THROW(s.process(frame(100, {0.5, 0.9, 0.5, 0.3})), SessionError);
    EXPECT_THROW(s.process(frame(50, {0.5, 0.9, 0.5, 0.3})), SessionError);
    FrameObservation bad = frame(200, {0.5, 0.9, 0.5, 0.3});
    bad.probabilities = {0.5, 0.5, 0.5, 0, 0};
    EXPECT_THROW(s.process(bad), ValidationError);
    s.reset();
    EXPECT_TRUE(s.state().window.empty());
    EXPECT_NO_THROW(s.process(frame(0, {0.5, 0.9, 0.5, 0.3})));
}

TEST(Step, StepIsPure) {
    const GuidanceState initial;
    const GuidanceConfig config;
    const auto a = step(initial, frame(0, {0.1, 0.9, 0.1, 0.3}), config);
    const auto b = step(initial, frame(0, {0.1, 0.9, 0.1, 0.3}), config);
    EXPECT_EQ(a.events, b.events);
    EXPECT_FALSE(initial.last_t_ms.has_value());
}

TEST(Step, FuzzedStreamsKeepInvariants) {
    std::mt19937_64 rng(5);
    for (int s = 0; s < 200; ++s) {
        const auto frames = oracle::fuzz_stream(rng);
        GuidanceSession session;
        std::vector<oracle::FrameRecord> records;
        for (const auto& f : frames) {
            FrameObservation obs;
            obs.t_ms = f.t_ms;
            obs.probabilities = f.probs;
            obs.coords = f.coords;
            const Stage before = session.state().stage;
            auto ev = session.process(obs);
            records.push_back({before, session.state().stage, std::move(ev)});
        }
        ASSERT_EQ(oracle::check_invariants(frames, records), "") << "stream " << s;
    }
}

TEST(Config, ParsesAndRejects) {
    const GuidanceConfig c = GuidanceConfig::from_json(
        R"({"homography":[2,0,0,0,2,0,0,0,1],"position_band":0.1,"angle_band_deg":5,"window":3,"renotify_ms":1000,"light_repeat_ms":1500,"confidence_threshold":0.7})");
    EXPECT_EQ(c.homography.rows()[0], 2.0);
    EXPECT_EQ(c.position_band, 0.1);
    EXPECT_EQ(c.angle_band_deg, 5.0);
    EXPECT_EQ(c.window, 3);
    EXPECT_EQ(c.renotify_ms, 1000);
    EXPECT_EQ(c.light_repeat_ms, 1500);
    EXPECT_EQ(c.confidence_threshold, 0.7);
    const GuidanceConfig d = GuidanceConfig::from_json("{}");
    EXPECT_EQ(d.renotify_ms, 2000);
    EXPECT_EQ(d.light_repeat_ms, 3000);
    EXPECT_EQ(d.window, 5);
    EXPECT_THROW(GuidanceConfig::from_json(R"({"speed":1})"), FormatError);
    EXPECT_THROW(GuidanceConfig::from_json(R"({"homography":[1,2,3]})"), FormatError);
    EXPECT_THROW(GuidanceConfig::from_json(R"({"homography":[0,0,0,0,0,0,0,0,0]})"), FormatError);
    EXPECT_THROW(GuidanceConfig::from_json(R"({"position_band":"wide"})"), FormatError);
    EXPECT_THROW(GuidanceConfig::from_json("[1]"), FormatError);
}
