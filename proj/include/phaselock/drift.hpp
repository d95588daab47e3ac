#pragma once

#include <optional>
#include <vector>

#include "phaselock/rng.hpp"
#include "phaselock/spectrum.hpp"

namespace phaselock {

enum class DriftKind { None, Wiener, Linear, FromAsd, Composite };

// Exogenous interferometer phase drift. A model is a sum of up to three
// components: a Wiener diffusion (variance d_fiber * dt), a deterministic
// linear ramp d * dt, and colored noise synthesized from a tabulated ASD.
// Composite models merge component-wise, which leaves increments equal to
// the sum of member increments.
struct DriftModel {
    double wiener_d = 0.0;  // rad^2/s
    double linear_d = 0.0;  // rad/s
    std::optional<NoiseSpectrum> asd;
    double asd_sample_rate_hz = 2000.0;  // synthesis rate for the ASD component

    static DriftModel none() { return {}; }
    static DriftModel wiener(double d_fiber);
    static DriftModel linear(double d);
    static DriftModel from_asd(NoiseSpectrum spec, double sample_rate_hz = 2000.0);
    static DriftModel composite(const std::vector<DriftModel>& members);

    DriftKind kind() const;
    bool is_none() const { return kind() == DriftKind::None; }
    void validate() const;
};

struct DopplerParams {
    double altitude_m = 500e3;
    double orbital_speed_mps = 7.6e3;
    double wavelength_m = 1550e-9;
    double mzi_delay_s = 170e-12;

    void validate() const;
};

// Worst-case frequency chirp of a low-Earth-orbit pass, gamma = v^2/(h*lambda).
double doppler_chirp_rate(const DopplerParams& p);  // s^-2 (Hz per second)

// Phase drift rate induced in an MZI of delay T: d = 2*pi*gamma*T.
double doppler_drift_rate(const DopplerParams& p);  // rad/s

// One drift increment over dt for models without an ASD component.
// Throws std::invalid_argument for FromAsd/Composite-with-ASD models, which
// need a pre-synthesized trace (use DriftSource).
double drift_increment(const DriftModel& model, double dt, Rng& rng);

// Synthesizes a real phase trace whose ensemble-averaged periodogram matches
// the tabulated spectrum: frequency-domain shaping of white Gaussian noise
// with Hermitian symmetry. Deterministic given (spec, duration, f_s, rng state).
std::vector<double> synthesize_from_asd(const NoiseSpectrum& spec, double duration_s,
                                        double f_s, Rng& rng);

// Uniformly sampled drift trace (phase in rad, starting at 0). Wiener and
// linear parts are generated exactly per sample; the ASD part by synthesis.
std::vector<double> drift_trace(const DriftModel& model, double duration_s, double f_s,
                                Rng& rng);

// Stateful per-run sampler. Pre-synthesizes the ASD component over the run
// horizon; increments between event times interpolate that trace linearly.
class DriftSource {
public:
    DriftSource(const DriftModel& model, double horizon_s, Rng& rng);

    // Advances internal time by dt and returns the phase increment.
    // Throws std::out_of_range past the synthesized horizon.
    double increment(double dt);

    double time() const { return t_; }
    bool active() const { return active_; }

private:
    double asd_value_at(double t) const;

    Rng* rng_ = nullptr;
    double sqrt_wiener_d_ = 0.0;
    double linear_d_ = 0.0;
    bool has_wiener_ = false;
    bool has_asd_ = false;
    bool active_ = false;
    std::vector<double> asd_trace_;
    double asd_fs_ = 0.0;
    double horizon_ = 0.0;
    double t_ = 0.0;
    double asd_prev_ = 0.0;
};

}  // namespace phaselock
