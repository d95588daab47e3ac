#pragma once

#include <numbers>

namespace phaselock {

inline constexpr double kInvSqrt8 = 0.35355339059327373;  // 1/sqrt(8)

enum class FringeKind { SimpleFringe, PulsePairPattern };

// Interferometer fringe: the mapping from relative arm phase to the
// probability that a detection lands in output channel 0.
//
// SimpleFringe:       r(phi) = (1 + v*cos(phi - phase_offset)) / 2
// PulsePairPattern:   r(phi) = 1/2 + (cos(phi - phase_offset) + sin(phi - phase_offset)) / 8
//
// The pulse-pair pattern is the mean of two half-visibility fringes offset by
// 90 degrees (alternating 0/90-degree pulse pairs, half the power interfering),
// which pins its visibility to 1/sqrt(8).
struct FringeModel {
    FringeKind kind = FringeKind::PulsePairPattern;
    double visibility = kInvSqrt8;
    double phase_offset = 0.0;  // rad

    void validate() const;  // throws std::invalid_argument
};

FringeModel make_pulse_pair_fringe();
FringeModel make_simple_fringe(double visibility, double phase_offset = 0.0);

// Target operating point on a fringe.
struct LockPoint {
    double phi0 = 0.0;    // rad, target phase
    double r0 = 0.625;    // target click ratio r(phi0)
    double slope = 0.125; // rad^-1, dr/dphi at phi0 (signed)
};

struct DetectorConfig {
    double f_signal = 200e3;  // Hz, signal rate summed over both channels
    double f_dark_ch0 = 0.0;  // Hz
    double f_dark_ch1 = 0.0;  // Hz

    double f_total() const { return f_signal + f_dark_ch0 + f_dark_ch1; }
    void validate() const;  // throws std::invalid_argument
};

// P(click in channel 0) at interferometer phase phi. 2*pi periodic, in [0,1].
double click_ratio(const FringeModel& model, double phi);

// dr/dphi at phi.
double fringe_slope(const FringeModel& model, double phi);

// |r'| = sqrt(v^2 - (2 r0 - 1)^2) / 2. Throws std::domain_error when the
// requested ratio is unreachable at this visibility.
double slope_magnitude(double visibility, double r0);

// Lock point with r0 and slope evaluated from the fringe at phi0.
LockPoint lock_point_at(const FringeModel& model, double phi0);

// Effective lock point seen by a counter that also registers dark counts:
// the flat background pulls r0 toward the dark-count ratio and dilutes the
// slope by the signal fraction f_signal/f_total.
LockPoint apply_darkcounts(const LockPoint& lock, const DetectorConfig& det);

// Effective visibility under dark counts, v_eff = v * f_signal / f_total.
double effective_visibility(double visibility, const DetectorConfig& det);

}  // namespace phaselock
