#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cellobs {

// Applied-current trace (amps, positive = discharge) with a hold policy.
//
// Evaluation is a pure function of time: before the first sample the first
// value holds, past the last sample the last value holds. running_abs_max
// returns sup over [0, t] of |i| exactly (for both hold policies the extrema
// of |i| sit at segment endpoints), so the sensor-bias model stays a pure
// time function too — important for integrator-order measurements.
struct CurrentProfile {
    enum class Hold { ZeroOrder, Linear };

    std::vector<double> t;  // strictly increasing, t.front() >= 0
    std::vector<double> i;  // same length
    Hold hold = Hold::ZeroOrder;

    double eval(double time) const;
    double running_abs_max(double time) const;

    // Prefix maxima of |i|; called by the loaders/generators below.
    void finalize();

    std::vector<double> cummax_;  // prefix max of |i| over samples 0..k
};

// Two-column CSV `time_s,current_A` (header required, time strictly
// increasing, at least one row). Throws ParseError with the row index.
CurrentProfile load_profile(const std::string& path, CurrentProfile::Hold hold);

// Builds a profile from in-memory samples (validated the same way).
CurrentProfile make_profile(const std::vector<double>& t, const std::vector<double>& i,
                            CurrentProfile::Hold hold);

// Synthetic drive-cycle-like pulse train (the published benchmark trace is
// not available): zero-order-hold pulses of random duration in
// [pulse_min_s, pulse_max_s] and level bias_a + uniform(-amp_a, amp_a),
// deterministic in the seed. With amp_a = bias_a = 0 the profile is zero.
CurrentProfile synthetic_pulse_profile(double horizon_s, double pulse_min_s, double pulse_max_s,
                                       double amp_a, double bias_a, std::uint64_t seed);

}  // namespace cellobs
