#include <gtest/gtest.h>

#include "voltdrop/power.hpp"

using namespace voltdrop;

namespace {
const VoltageModel kM{};  // defaults: 5.0 V nominal, 4.5 V floor, 40/900/1400 ms
}

TEST(VoltageCurve, AnchorsAreExact) {
    EXPECT_DOUBLE_EQ(voltage_at(kM, 0.0, true), 5.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 40.0, true), 4.5);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 900.0, true), 0.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 0.0, false), 5.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 1400.0, false), 0.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 700.0, false), 2.5);  // linear midpoint
    EXPECT_DOUBLE_EQ(voltage_at(kM, 470.0, true), 2.25);  // midpoint of second leg
}

TEST(VoltageCurve, ClampsOutsideTheCurve) {
    EXPECT_DOUBLE_EQ(voltage_at(kM, -5.0, true), 5.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 5000.0, true), 0.0);
    EXPECT_DOUBLE_EQ(voltage_at(kM, 5000.0, false), 0.0);
}

TEST(VoltageCurve, MonotoneNonIncreasingAndBounded) {
    for (bool loaded : {true, false}) {
        double prev = voltage_at(kM, 0.0, loaded);
        for (int i = 1; i <= 4000; ++i) {
            double v = voltage_at(kM, i * 0.4, loaded);
            EXPECT_LE(v, prev) << "loaded=" << loaded << " ms=" << i * 0.4;
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, kM.v_nominal);
            prev = v;
        }
    }
}

TEST(VoltageCurve, LoadedDecaysAtLeastAsFastAsUnloaded) {
    for (int i = 0; i <= 3000; ++i) {
        double ms = i * 0.5;
        EXPECT_LE(voltage_at(kM, ms, true), voltage_at(kM, ms, false) + 1e-12) << ms;
    }
}

TEST(VoltageCurve, AvailabilityFlipsAtTheFloor) {
    EXPECT_TRUE(device_available(kM, voltage_at(kM, 40.0, true)));
    EXPECT_FALSE(device_available(kM, voltage_at(kM, 40.5, true)));
    EXPECT_TRUE(device_available(kM, 4.5));
    EXPECT_FALSE(device_available(kM, 4.4999));
}

TEST(VoltageModelTest, ValidateRejectsDegenerateCurves) {
    VoltageModel m = kM;
    m.v_unavailable = 5.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m = kM;
    m.v_unavailable = 0.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m = kM;
    m.t_unavailable_ms = 0.0;
    EXPECT_THROW(m.validate(), ConfigError);
    m = kM;
    m.t_zero_loaded_ms = 30.0;  // before the availability knee
    EXPECT_THROW(m.validate(), ConfigError);
    m = kM;
    m.t_zero_unloaded_ms = 0.0;
    EXPECT_THROW(m.validate(), ConfigError);
    EXPECT_NO_THROW(kM.validate());
}

TEST(FaultScheduleTest, EpisodeArithmetic) {
    FaultSchedule s;
    s.cutoffs = {from_ms(3000)};
    s.restore_delay = from_ms(500);
    EXPECT_EQ(s.discharge_span(kM), from_ms(900));
    EXPECT_EQ(s.device_loss_offset(kM), from_ms(40));
    EXPECT_EQ(s.episode_span(kM), from_ms(1400));
    EXPECT_EQ(s.restore_at(kM, 0), from_ms(4400));
}

TEST(FaultScheduleTest, PowerStatePhases) {
    FaultSchedule s;
    s.cutoffs = {from_ms(1000)};
    s.restore_delay = from_ms(500);

    auto st = power_state_at(s, kM, from_ms(999));
    EXPECT_EQ(st.mode, PowerMode::On);
    EXPECT_EQ(st.fault_index, -1);
    EXPECT_TRUE(st.available);
    EXPECT_DOUBLE_EQ(st.voltage, 5.0);

    st = power_state_at(s, kM, from_ms(1000));  // cutoff instant: discharging at nominal
    EXPECT_EQ(st.mode, PowerMode::Discharging);
    EXPECT_EQ(st.fault_index, 0);
    EXPECT_TRUE(st.available);

    st = power_state_at(s, kM, from_ms(1040));  // knee: last available instant
    EXPECT_EQ(st.mode, PowerMode::Discharging);
    EXPECT_TRUE(st.available);
    EXPECT_DOUBLE_EQ(st.voltage, 4.5);

    st = power_state_at(s, kM, from_ms(1041));
    EXPECT_EQ(st.mode, PowerMode::Discharging);
    EXPECT_FALSE(st.available);

    st = power_state_at(s, kM, from_ms(1900));  // discharge done, restore pending
    EXPECT_EQ(st.mode, PowerMode::Off);
    EXPECT_DOUBLE_EQ(st.voltage, 0.0);
    EXPECT_FALSE(st.available);

    st = power_state_at(s, kM, from_ms(2400));  // restore instant
    EXPECT_EQ(st.mode, PowerMode::On);
    EXPECT_EQ(st.fault_index, -1);
    EXPECT_TRUE(st.available);
    EXPECT_DOUBLE_EQ(st.voltage, 5.0);
}

TEST(FaultScheduleTest, SecondEpisodeIsAttributedCorrectly) {
    FaultSchedule s;
    s.cutoffs = {from_ms(1000), from_ms(10000)};
    s.restore_delay = from_ms(500);
    auto st = power_state_at(s, kM, from_ms(10100));
    EXPECT_EQ(st.fault_index, 1);
    EXPECT_EQ(st.mode, PowerMode::Discharging);
    st = power_state_at(s, kM, from_ms(9000));  // between episodes
    EXPECT_EQ(st.fault_index, -1);
    EXPECT_TRUE(st.available);
}

TEST(ScheduleFaults, DeterministicAscendingAndSpaced) {
    const SimTime horizon = 120 * kSecond;
    const SimTime restore = from_ms(500);
    auto a = schedule_faults(42, 8, horizon, restore, kM);
    auto b = schedule_faults(42, 8, horizon, restore, kM);
    EXPECT_EQ(a.cutoffs, b.cutoffs);
    ASSERT_EQ(a.cutoffs.size(), 8u);

    SimTime gap = static_cast<SimTime>(kM.t_zero_unloaded_ms * kMillisecond) + restore;
    for (std::size_t i = 0; i < a.cutoffs.size(); ++i) {
        EXPECT_GE(a.cutoffs[i], 0);
        EXPECT_LT(a.cutoffs[i], horizon);
        if (i > 0) EXPECT_GT(a.cutoffs[i] - a.cutoffs[i - 1], gap);
    }
    auto c = schedule_faults(43, 8, horizon, restore, kM);
    EXPECT_NE(a.cutoffs, c.cutoffs);
}

TEST(ScheduleFaults, ZeroCountAndInfeasibleHorizon) {
    EXPECT_TRUE(schedule_faults(1, 0, kSecond, from_ms(500), kM).cutoffs.empty());
    // gap = 1.4 s + 0.5 s = 1.9 s per fault; 3 faults need > 5.7 s
    EXPECT_THROW(schedule_faults(1, 3, from_ms(5700), from_ms(500), kM), ConfigError);
    EXPECT_NO_THROW(schedule_faults(1, 3, from_ms(30000), from_ms(500), kM));
    EXPECT_THROW(schedule_faults(1, -1, kSecond, from_ms(500), kM), ConfigError);
}
