#pragma once

#include "phaselock/fringe.hpp"
#include "phaselock/spectrum.hpp"

namespace phaselock {

// Ornstein-Uhlenbeck parameters of the locked phase:
//   theta     = -2 * epsilon * r0' * f_c      (stiffness, s^-1)
//   tau       = 1/theta
//   f_lock    = theta / (2 pi)
//   diffusion = V * f_c / 2, V = 4 eps^2 r0 (1-r0)   (rad^2/s)
//   sigma_stat = sqrt(diffusion/theta) = sqrt(eps r0 (1-r0) / -r0')
struct OuParams {
    double theta = 0.0;
    double tau = 0.0;
    double f_lock = 0.0;
    double diffusion = 0.0;
    double sigma_stat = 0.0;
};

OuParams ou_params(double epsilon, const LockPoint& lock, double f_c);

// Two-sided Lorentzian PSD of the locked phase:
// S_lock(f) = r0(1-r0) / (r0'^2 f_c (1 + (f/f_lock)^2)).
double lock_psd(double f, const OuParams& params, const LockPoint& lock, double f_c);

// First-order high-pass the lock applies to the free drift: f^2/(f^2+f_lock^2).
double drift_highpass(double f, double f_lock);

// Total two-sided phase-noise PSD: lock Lorentzian plus high-passed drift.
double total_psd(double f, const NoiseSpectrum& s_drift, const OuParams& params,
                 const LockPoint& lock, double f_c);

// Total RMS phase error: sqrt(sigma_stat^2 + integral of the high-passed
// drift spectrum). The band integral runs over [f_lo, f_hi] (f_hi <= 0 means
// f_c/2) with log-spaced adaptive quadrature at relative tolerance rel_tol.
double total_sigma(const NoiseSpectrum& s_drift, double epsilon, const LockPoint& lock,
                   double f_c, double f_lo = 1e-6, double f_hi = -1.0, double rel_tol = 1e-4);

// Equilibrium offset under a constant drift d: phi - phi0 = -d/(2 f_c eps r0').
double linear_drift_offset(double d, double f_c, double epsilon, const LockPoint& lock);

// Combined error under linear drift: sqrt(offset^2 + sigma_stat^2).
double linear_drift_total(double d, double f_c, double epsilon, const LockPoint& lock);

struct Optimum {
    double epsilon_opt = 0.0;  // signed
    double sigma_min = 0.0;    // rad
};

// eps_opt = cbrt(d^2 / (2 f_c^2 r0(1-r0) |r0'|)) * sign(-r0'),
// sigma_min = sqrt(3) * cbrt(|d| r0(1-r0) / (4 f_c r0'^2)).
Optimum linear_drift_optimum(double d, double f_c, const LockPoint& lock);

// Total error with Wiener drift folded into the per-click variance:
// sigma = sqrt((4 eps^2 r0(1-r0) + D/f_c) / (-4 eps r0')).
double wiener_total(double epsilon, const LockPoint& lock, double f_c, double d_fiber);

// eps_opt = sqrt(D / (4 f_c r0(1-r0))) * sign(-r0'),
// sigma_min = (D r0(1-r0) / (f_c r0'^2))^(1/4).
Optimum wiener_optimum(const LockPoint& lock, double f_c, double d_fiber);

// Averaging feedback over n clicks leaves theta, D and sigma unchanged and
// only adds a mean feedback delay of n/(2 f_c).
struct AveragingEquivalence {
    double theta_n = 0.0;
    double diffusion_n = 0.0;
    double sigma_n = 0.0;
    double extra_delay_s = 0.0;
};
AveragingEquivalence averaging_equivalence(int n, double epsilon, const LockPoint& lock,
                                           double f_c);

// Largest |epsilon| whose stationary lock noise stays at or below the target.
double max_epsilon_for_accuracy(double target_rad, const LockPoint& lock);

// Smallest count rate that can reach the target under the given drift
// (optimal epsilon assumed). Closed form for Wiener/linear drift.
double min_count_rate_wiener(double target_rad, const LockPoint& lock, double d_fiber);
double min_count_rate_linear(double target_rad, const LockPoint& lock, double d);

// Numeric optimum of total_sigma over |epsilon| for a tabulated drift
// spectrum; golden-section search on log10 |epsilon|.
Optimum minimize_total_sigma(const NoiseSpectrum& s_drift, const LockPoint& lock, double f_c,
                             double abs_eps_lo = 1e-8, double abs_eps_hi = 1e-1,
                             double rel_tol = 1e-6);

}  // namespace phaselock
