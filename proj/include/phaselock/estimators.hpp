#pragma once

#include <cstdint>
#include <vector>

#include "phaselock/spectrum.hpp"

namespace phaselock {

// Uniformly sampled phase trace.
struct PhaseTrace {
    std::vector<double> samples;  // rad
    double f_s = 0.0;             // Hz
    double t0 = 0.0;              // s

    double span() const { return samples.empty() ? 0.0 : (samples.size() - 1) / f_s; }
    void validate() const;  // throws std::invalid_argument
};

struct DeviationPoint {
    double tau = 0.0;        // s
    double deviation = 0.0;  // rad
    std::uint64_t n_pairs = 0;
};

// FirstDifference: sqrt(mean (phi(t+tau) - phi(t))^2), the structure-function
// form; a linear ramp shows up with slope 1. SecondDifference nulls linear
// drift (classic two-sample form, normalized to match on pure diffusion).
enum class DeviationKind { FirstDifference, SecondDifference };

// Overlapping increment ("Allan-type") deviation at the requested lags.
// Each tau is rounded to the sample grid and must satisfy 1/f_s <= tau < span/2.
std::vector<DeviationPoint> increment_deviation(const PhaseTrace& trace,
                                                const std::vector<double>& taus,
                                                DeviationKind kind = DeviationKind::FirstDifference);

// Log-spaced lags covering [1/f_s, span/2), points_per_decade each decade.
std::vector<double> log_spaced_taus(const PhaseTrace& trace, int points_per_decade = 10);

// Welch PSD: mean-detrended, Hann window, 50 % overlap, one-sided,
// normalized so the spectrum integrates to the trace variance. n_segments
// sets the nominal segment count (segment length rounds to a power of two).
NoiseSpectrum psd_estimate(const PhaseTrace& trace, int n_segments);

struct OuFit {
    double theta_hat = 0.0;       // s^-1
    double sigma_stat_hat = 0.0;  // rad
    double lag1 = 0.0;            // fitted AR(1) coefficient
    bool out_of_band = false;     // decay faster than the sampling resolves
};

// Lag-1 autoregression: phi_{k+1} on phi_k (mean removed), theta = -f_s ln a.
// Throws std::runtime_error when no decay is detected (a >= 1) or the trace
// is shorter than 20/theta_hat.
OuFit ou_fit(const PhaseTrace& trace);

// Slope of a log10-log10 line fit through (x, y); zero/negative points are
// rejected. Used to classify deviation and spectrum regimes.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phaselock
