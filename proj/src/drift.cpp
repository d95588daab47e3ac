#include "phaselock/drift.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "phaselock/fft.hpp"

namespace phaselock {

DriftModel DriftModel::wiener(double d_fiber) {
    DriftModel m;
    m.wiener_d = d_fiber;
    m.validate();
    return m;
}

DriftModel DriftModel::linear(double d) {
    DriftModel m;
    m.linear_d = d;
    return m;
}

DriftModel DriftModel::from_asd(NoiseSpectrum spec, double sample_rate_hz) {
    spec.validate();
    DriftModel m;
    m.asd = std::move(spec);
    m.asd_sample_rate_hz = sample_rate_hz;
    m.validate();
    return m;
}

DriftModel DriftModel::composite(const std::vector<DriftModel>& members) {
    DriftModel out;
    for (const auto& m : members) {
        m.validate();
        out.wiener_d += m.wiener_d;
        out.linear_d += m.linear_d;
        if (m.asd) {
            if (out.asd) throw std::invalid_argument("drift: at most one ASD component");
            out.asd = m.asd;
            out.asd_sample_rate_hz = m.asd_sample_rate_hz;
        }
    }
    return out;
}

DriftKind DriftModel::kind() const {
    const bool w = wiener_d > 0.0;
    const bool l = linear_d != 0.0;
    const bool a = asd.has_value();
    const int n = int(w) + int(l) + int(a);
    if (n == 0) return DriftKind::None;
    if (n > 1) return DriftKind::Composite;
    if (w) return DriftKind::Wiener;
    if (l) return DriftKind::Linear;
    return DriftKind::FromAsd;
}

void DriftModel::validate() const {
    if (!(wiener_d >= 0.0)) throw std::invalid_argument("drift: wiener diffusion must be >= 0");
    if (!std::isfinite(linear_d)) throw std::invalid_argument("drift: linear rate must be finite");
    if (asd) {
        asd->validate();
        if (!(asd_sample_rate_hz > 0.0))
            throw std::invalid_argument("drift: asd sample rate must be > 0");
    }
}

void DopplerParams::validate() const {
    if (!(altitude_m > 0) || !(orbital_speed_mps > 0) || !(wavelength_m > 0) || !(mzi_delay_s >= 0))
        throw std::invalid_argument("doppler: parameters must be positive");
}

double doppler_chirp_rate(const DopplerParams& p) {
    p.validate();
    return p.orbital_speed_mps * p.orbital_speed_mps / (p.altitude_m * p.wavelength_m);
}

double doppler_drift_rate(const DopplerParams& p) {
    return 2.0 * std::numbers::pi * doppler_chirp_rate(p) * p.mzi_delay_s;
}

double drift_increment(const DriftModel& model, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw std::invalid_argument("drift_increment: dt must be > 0");
    model.validate();
    if (model.asd)
        throw std::invalid_argument(
            "drift_increment: ASD component requires a synthesized trace (DriftSource)");
    double inc = model.linear_d * dt;
    if (model.wiener_d > 0.0) inc += rng.normal(0.0, std::sqrt(model.wiener_d * dt));
    return inc;
}

std::vector<double> synthesize_from_asd(const NoiseSpectrum& spec, double duration_s,
                                        double f_s, Rng& rng) {
    spec.validate();
    if (!(duration_s > 0.0) || !(f_s > 0.0))
        throw std::invalid_argument("synthesize_from_asd: duration and f_s must be > 0");
    const std::size_t n_req = static_cast<std::size_t>(std::llround(duration_s * f_s));
    if (n_req < 2) throw std::invalid_argument("synthesize_from_asd: need duration*f_s >= 2");

    const std::size_t n = next_pow2(n_req);
    std::vector<std::complex<double>> half(n / 2 + 1, {0.0, 0.0});
    const double df = f_s / static_cast<double>(n);
    // Bin k gets |X_k|^2 = S1(f_k) * f_s * N / 2 on average, which makes the
    // one-sided periodogram 2|X_k|^2/(f_s N) match S1.
    for (std::size_t k = 1; k < n / 2; ++k) {
        const double f = df * static_cast<double>(k);
        const double s1 = spec.psd_at(f, Sidedness::OneSided);
        const double amp = std::sqrt(0.5 * s1 * f_s * static_cast<double>(n));
        const double g1 = rng.normal();
        const double g2 = rng.normal();
        half[k] = {amp * g1 * std::numbers::sqrt2 / 2.0, amp * g2 * std::numbers::sqrt2 / 2.0};
    }
    {
        const double f_nyq = 0.5 * f_s;
        const double s1 = spec.psd_at(f_nyq, Sidedness::OneSided);
        half[n / 2] = {std::sqrt(0.5 * s1 * f_s * static_cast<double>(n)) * rng.normal(), 0.0};
    }
    std::vector<double> x = irfft(half, n);
    x.resize(n_req);
    return x;
}

std::vector<double> drift_trace(const DriftModel& model, double duration_s, double f_s,
                                Rng& rng) {
    model.validate();
    if (!(duration_s > 0.0) || !(f_s > 0.0))
        throw std::invalid_argument("drift_trace: duration and f_s must be > 0");
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * f_s));
    if (n < 2) throw std::invalid_argument("drift_trace: need at least 2 samples");

    std::vector<double> out(n, 0.0);
    const double dt = 1.0 / f_s;
    if (model.wiener_d > 0.0) {
        const double step_sigma = std::sqrt(model.wiener_d * dt);
        double acc = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            acc += step_sigma * rng.normal();
            out[i] = acc;
        }
    }
    if (model.linear_d != 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] += model.linear_d * dt * static_cast<double>(i);
    }
    if (model.asd) {
        // Synthesized at its own rate, then resampled linearly onto the grid.
        const double fs_syn = model.asd_sample_rate_hz;
        std::vector<double> syn = synthesize_from_asd(*model.asd, duration_s + 2.0 / fs_syn, fs_syn, rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = dt * static_cast<double>(i) * fs_syn;
            const std::size_t k = std::min(static_cast<std::size_t>(t), syn.size() - 2);
            const double w = t - static_cast<double>(k);
            out[i] += syn[k] + w * (syn[k + 1] - syn[k]) - syn[0];
        }
    }
    return out;
}

DriftSource::DriftSource(const DriftModel& model, double horizon_s, Rng& rng)
    : rng_(&rng), horizon_(horizon_s) {
    model.validate();
    if (!(horizon_s > 0.0)) throw std::invalid_argument("DriftSource: horizon must be > 0");
    linear_d_ = model.linear_d;
    has_wiener_ = model.wiener_d > 0.0;
    sqrt_wiener_d_ = std::sqrt(model.wiener_d);
    has_asd_ = model.asd.has_value();
    active_ = has_wiener_ || linear_d_ != 0.0 || has_asd_;
    if (has_asd_) {
        asd_fs_ = model.asd_sample_rate_hz;
        asd_trace_ = synthesize_from_asd(*model.asd, horizon_s + 2.0 / asd_fs_, asd_fs_, rng);
        asd_prev_ = asd_value_at(0.0);
    }
}

double DriftSource::asd_value_at(double t) const {
    const double pos = t * asd_fs_;
    const std::size_t k = std::min(static_cast<std::size_t>(pos), asd_trace_.size() - 2);
    const double w = pos - static_cast<double>(k);
    return asd_trace_[k] + w * (asd_trace_[k + 1] - asd_trace_[k]);
}

double DriftSource::increment(double dt) {
    if (!(dt >= 0.0)) throw std::invalid_argument("DriftSource: dt must be >= 0");
    t_ += dt;
    if (!active_) return 0.0;
    double inc = linear_d_ * dt;
    if (has_wiener_) inc += rng_->normal() * sqrt_wiener_d_ * std::sqrt(dt);
    if (has_asd_) {
        if (t_ > horizon_ + 1.0 / asd_fs_)
            throw std::out_of_range("DriftSource: request beyond synthesized horizon");
        const double now = asd_value_at(std::min(t_, horizon_));
        inc += now - asd_prev_;
        asd_prev_ = now;
    }
    return inc;
}

}  // namespace phaselock
