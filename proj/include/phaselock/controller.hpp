#pragma once

#include <cstdint>
#include <vector>

#include "phaselock/fringe.hpp"

namespace phaselock {

// Per-channel feedback steps derived from the step-size parameter epsilon:
//   channel 0: eps0 = 2*epsilon*(1-r0)
//   channel 1: eps1 = -2*epsilon*r0
// so that r0*eps0 + (1-r0)*eps1 = 0 exactly at the lock point.
struct StepParams {
    double epsilon = 0.0;
    double r0 = 0.5;
    double eps0 = 0.0;
    double eps1 = 0.0;
};

// Builds the steps and enforces the stability convention: epsilon and the
// lock-point slope must have opposite signs (epsilon = 0 is allowed and
// means free-running). Throws std::invalid_argument on a sign match.
StepParams make_step_params(double epsilon, const LockPoint& lock);

// 16-bit-DAC style actuator: commands quantize to range_rad / 2^dac_bits and
// clamp to [0, range_rad]; feedback takes effect loop_delay_s after the click.
// With recenter_on_saturation the command register shifts by a whole number
// of wavelengths (multiples of 2 pi) back toward mid-range when it saturates,
// which the fringe cannot see.
struct ActuatorModel {
    int dac_bits = 16;
    double range_rad = 2.0 * 3.141592653589793 * 3.4;
    double loop_delay_s = 2e-6;
    bool recenter_on_saturation = false;

    double lsb() const;
    // Nearest DAC level, clamped. Sets `saturated` when the raw command left
    // the range.
    double quantize(double command, bool& saturated) const;
    void validate() const;
};

enum class ControllerVariant { Immediate, AveragingN, PI };

struct ControllerConfig {
    ControllerVariant variant = ControllerVariant::Immediate;
    int averaging_n = 10;  // AveragingN block size
    double pi_kp = 0.5;    // P gain on the windowed ratio deviation
    double pi_ki = 1.0;    // scale on the per-click I step
    int pi_window = 64;    // clicks in the ratio estimation window
};

// Feedback law state. Single-owner mutable; one instance per simulation run.
class Controller {
public:
    Controller() = default;
    Controller(const StepParams& steps, const ControllerConfig& cfg);

    // Registers a click on `channel` and returns the phase command delta to
    // apply now. Immediate: the per-channel step. AveragingN: the summed
    // block every n-th click, else 0. PI: scaled I step plus the change of
    // the proportional offset.
    double on_detection(int channel);

    // Sum of all deltas returned so far.
    double command_phase() const { return command_; }

    const StepParams& steps() const { return steps_; }
    void reset();

private:
    StepParams steps_;
    ControllerConfig cfg_;
    double command_ = 0.0;
    // AveragingN state
    double block_sum_ = 0.0;
    int block_count_ = 0;
    // PI state: ring buffer of recent channels for the windowed ratio
    std::vector<std::uint8_t> window_;
    int win_pos_ = 0;
    int win_fill_ = 0;
    int win_ones_ = 0;  // channel-0 clicks currently in the window
    double p_offset_ = 0.0;
};

}  // namespace phaselock
