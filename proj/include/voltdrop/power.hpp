#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "voltdrop/core.hpp"

namespace voltdrop {

// Supply discharge model. After wall power is cut the PSU output decays
// along a piecewise-linear curve; the device keeps running only while the
// rail stays at or above v_unavailable. Under load the rail sags to
// v_unavailable quickly (t_unavailable_ms) and then bleeds to zero by
// t_zero_loaded_ms; unloaded it decays linearly to zero over
// t_zero_unloaded_ms.
struct VoltageModel {
    double v_nominal = 5.0;
    double v_unavailable = 4.5;
    double t_unavailable_ms = 40.0;
    double t_zero_loaded_ms = 900.0;
    double t_zero_unloaded_ms = 1400.0;

    void validate() const {
        if (!(v_nominal > v_unavailable) || !(v_unavailable > 0.0))
            throw ConfigError("voltage model: need v_nominal > v_unavailable > 0");
        if (!(t_unavailable_ms > 0.0) || !(t_zero_loaded_ms > t_unavailable_ms))
            throw ConfigError("voltage model: need 0 < t_unavailable < t_zero_loaded");
        if (!(t_zero_unloaded_ms > 0.0))
            throw ConfigError("voltage model: need t_zero_unloaded > 0");
    }
};

// Rail voltage `elapsed_ms` after the cut, clamped at zero.
inline double voltage_at(const VoltageModel& m, double elapsed_ms, bool loaded = true) {
    if (elapsed_ms <= 0.0) return m.v_nominal;
    if (loaded) {
        if (elapsed_ms <= m.t_unavailable_ms) {
            double f = elapsed_ms / m.t_unavailable_ms;
            return m.v_nominal + f * (m.v_unavailable - m.v_nominal);
        }
        if (elapsed_ms >= m.t_zero_loaded_ms) return 0.0;
        double f = (elapsed_ms - m.t_unavailable_ms) / (m.t_zero_loaded_ms - m.t_unavailable_ms);
        return m.v_unavailable * (1.0 - f);
    }
    if (elapsed_ms >= m.t_zero_unloaded_ms) return 0.0;
    return m.v_nominal * (1.0 - elapsed_ms / m.t_zero_unloaded_ms);
}

inline bool device_available(const VoltageModel& m, double voltage) {
    return voltage >= m.v_unavailable;
}

enum class PowerMode : std::uint8_t { On, Discharging, Off };

struct PowerState {
    PowerMode mode = PowerMode::On;
    int fault_index = -1;        // episode we are inside, -1 when On
    double voltage = 0.0;        // rail voltage at the query instant
    bool available = true;       // device can accept and serve requests
};

// Power-fault plan: cutoff instants plus the shared recovery delay. One
// episode spans [cutoff, cutoff + t_zero_loaded) discharging followed by
// [.., + restore_delay) off; afterwards the rail is back at nominal.
struct FaultSchedule {
    std::vector<SimTime> cutoffs;  // ascending
    SimTime restore_delay = from_ms(500);

    SimTime discharge_span(const VoltageModel& m) const {
        return static_cast<SimTime>(m.t_zero_loaded_ms * kMillisecond);
    }
    SimTime device_loss_offset(const VoltageModel& m) const {
        return static_cast<SimTime>(m.t_unavailable_ms * kMillisecond);
    }
    SimTime episode_span(const VoltageModel& m) const {
        return discharge_span(m) + restore_delay;
    }
    SimTime restore_at(const VoltageModel& m, std::size_t i) const {
        return cutoffs[i] + episode_span(m);
    }
};

inline PowerState power_state_at(const FaultSchedule& s, const VoltageModel& m, SimTime t) {
    PowerState st;
    st.voltage = m.v_nominal;
    for (std::size_t i = 0; i < s.cutoffs.size(); ++i) {
        SimTime c = s.cutoffs[i];
        if (t < c) break;
        if (t >= s.restore_at(m, i)) continue;  // past this episode
        st.fault_index = static_cast<int>(i);
        if (t < c + s.discharge_span(m)) {
            st.mode = PowerMode::Discharging;
            st.voltage = voltage_at(m, to_ms(t - c), /*loaded=*/true);
        } else {
            st.mode = PowerMode::Off;
            st.voltage = 0.0;
        }
        break;
    }
    st.available = device_available(m, st.voltage);
    return st;
}

// Draws `count` cutoffs uniformly over [0, horizon) and keeps a draw only
// if it leaves more than one full worst-case recovery (unloaded bleed-out
// plus restore delay) between neighbours, so episodes can never overlap.
// Draws are rejection-resampled from a splitmix64 stream: the schedule for
// a given seed is identical on every platform.
inline FaultSchedule schedule_faults(std::uint64_t seed, int count, SimTime horizon,
                                     SimTime restore_delay, const VoltageModel& m) {
    m.validate();
    if (count < 0) throw ConfigError("fault count must be >= 0");
    FaultSchedule out;
    out.restore_delay = restore_delay;
    if (count == 0) return out;

    SimTime gap = static_cast<SimTime>(m.t_zero_unloaded_ms * kMillisecond) + restore_delay;
    // Feasibility: count points each needing `gap` of clearance.
    if (horizon <= static_cast<SimTime>(count) * gap)
        throw ConfigError("fault schedule infeasible: horizon too short for fault count");

    std::uint64_t k = 0;
    auto draw = [&] { return static_cast<SimTime>(bounded(stream_word(seed, k++), static_cast<std::uint64_t>(horizon))); };
    std::vector<SimTime>& cs = out.cutoffs;
    std::uint64_t attempts = 0;
    while (cs.size() < static_cast<std::size_t>(count)) {
        if (++attempts > 100000ull * static_cast<std::uint64_t>(count))
            throw ConfigError("fault schedule infeasible: rejection sampling did not converge");
        SimTime c = draw();
        bool ok = true;
        for (SimTime prev : cs) {
            SimTime d = c > prev ? c - prev : prev - c;
            if (d <= gap) { ok = false; break; }  // strictly more than one recovery apart
        }
        if (ok) cs.push_back(c);
    }
    std::sort(cs.begin(), cs.end());
    return out;
}

}  // namespace voltdrop
