#pragma once

#include <string>
#include <vector>

namespace phaselock {

enum class Sidedness { OneSided, TwoSided };

// Tabulated amplitude spectral density of phase noise over frequency.
// Interpolation between table points is linear in log-log; outside the
// tabulated band the boundary value is held constant.
struct NoiseSpectrum {
    std::vector<double> frequency;  // Hz, strictly increasing, > 0
    std::vector<double> asd;        // rad/sqrt(Hz), >= 0
    Sidedness sidedness = Sidedness::OneSided;

    void validate() const;  // throws std::invalid_argument
    bool empty() const { return frequency.empty(); }
    double min_frequency() const { return frequency.front(); }
    double max_frequency() const { return frequency.back(); }

    // ASD at f in the spectrum's own sidedness convention.
    double asd_at(double f) const;

    // PSD at f converted to the requested convention (S1 = 2*S2).
    double psd_at(double f, Sidedness out) const;
};

// ASD table of a pure diffusion with <dphi^2> = d_fiber * dt:
// one-sided S1(f) = d_fiber / (2 pi^2 f^2), i.e. asd(f) = sqrt(d_fiber/2)/(pi f).
NoiseSpectrum wiener_equivalent_asd(double d_fiber, double f_lo, double f_hi,
                                    int points_per_decade = 10);

// Integral of the one-sided PSD over [f_lo, f_hi] by log-spaced adaptive
// quadrature (relative tolerance rel_tol). Equals the variance contribution
// of that band.
double integrated_variance(const NoiseSpectrum& spec, double f_lo, double f_hi,
                           double rel_tol = 1e-6);

// CSV I/O, header `freq_hz,asd_rad_per_sqrthz`, one-sided, ascending frequency.
NoiseSpectrum load_asd_csv(const std::string& path);
void save_asd_csv(const NoiseSpectrum& spec, const std::string& path);

}  // namespace phaselock
