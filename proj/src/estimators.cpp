#include "phaselock/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "phaselock/fft.hpp"
#include "phaselock/numeric.hpp"

namespace phaselock {

void PhaseTrace::validate() const {
    if (!(f_s > 0.0)) throw std::invalid_argument("trace: sample rate must be > 0");
    if (samples.size() < 2) throw std::invalid_argument("trace: need at least 2 samples");
}

std::vector<DeviationPoint> increment_deviation(const PhaseTrace& trace,
                                                const std::vector<double>& taus,
                                                DeviationKind kind) {
    trace.validate();
    const std::size_t n = trace.samples.size();
    std::vector<DeviationPoint> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        const auto m = static_cast<std::size_t>(std::llround(tau * trace.f_s));
        if (m < 1 || !(tau < 0.5 * trace.span()))
            throw std::invalid_argument("increment_deviation: tau outside [1/f_s, span/2)");
        const double tau_snapped = static_cast<double>(m) / trace.f_s;
        double acc = 0.0;
        std::uint64_t pairs = 0;
        if (kind == DeviationKind::FirstDifference) {
            for (std::size_t i = 0; i + m < n; ++i) {
                const double d = trace.samples[i + m] - trace.samples[i];
                acc += d * d;
                ++pairs;
            }
        } else {
            if (2 * m >= n) throw std::invalid_argument("increment_deviation: tau too large for second differences");
            for (std::size_t i = 0; i + 2 * m < n; ++i) {
                const double d =
                    trace.samples[i + 2 * m] - 2.0 * trace.samples[i + m] + trace.samples[i];
                acc += 0.5 * d * d;
                ++pairs;
            }
        }
        if (pairs == 0) throw std::invalid_argument("increment_deviation: trace too short");
        out.push_back({tau_snapped, std::sqrt(acc / static_cast<double>(pairs)), pairs});
    }
    return out;
}

std::vector<double> log_spaced_taus(const PhaseTrace& trace, int points_per_decade) {
    trace.validate();
    if (points_per_decade < 1) throw std::invalid_argument("log_spaced_taus: need >= 1 point/decade");
    const double tau_min = 1.0 / trace.f_s;
    const double tau_max = 0.5 * trace.span();
    std::vector<double> taus;
    std::size_t last_m = 0;
    const double step = std::pow(10.0, 1.0 / points_per_decade);
    for (double tau = tau_min; tau < tau_max; tau *= step) {
        const auto m = static_cast<std::size_t>(std::llround(tau * trace.f_s));
        if (m == last_m) continue;  // grid-snapping made it a duplicate
        last_m = m;
        const double snapped = static_cast<double>(m) / trace.f_s;
        if (snapped < tau_max) taus.push_back(snapped);
    }
    return taus;
}

NoiseSpectrum psd_estimate(const PhaseTrace& trace, int n_segments) {
    trace.validate();
    if (n_segments < 1) throw std::invalid_argument("psd_estimate: n_segments must be >= 1");
    const std::size_t n = trace.samples.size();
    if (n < static_cast<std::size_t>(2 * n_segments))
        throw std::invalid_argument("psd_estimate: trace shorter than 2*n_segments");

    // Segment length: power of two so that ~n_segments segments at 50 %
    // overlap cover the trace.
    std::size_t seg = next_pow2(2 * n / static_cast<std::size_t>(n_segments + 1));
    if (seg > 2 * n / static_cast<std::size_t>(n_segments + 1)) seg /= 2;
    seg = std::min(seg, next_pow2(n) == n ? n : next_pow2(n) / 2);
    if (seg < 4) throw std::invalid_argument("psd_estimate: degenerate segmentation");
    const std::size_t hop = seg / 2;
    const std::size_t k_segs = (n - seg) / hop + 1;

    double mean = 0.0;
    for (double v : trace.samples) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> window(seg);
    double u = 0.0;  // window power
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(seg)));
        u += window[i] * window[i];
    }

    std::vector<double> psd(seg / 2 + 1, 0.0);
    std::vector<double> buf(seg);
    for (std::size_t s = 0; s < k_segs; ++s) {
        const double* seg_begin = trace.samples.data() + s * hop;
        for (std::size_t i = 0; i < seg; ++i) buf[i] = (seg_begin[i] - mean) * window[i];
        const auto bins = rfft(buf);
        for (std::size_t k = 0; k <= seg / 2; ++k) psd[k] += std::norm(bins[k]);
    }
    // One-sided normalization: 2 |X|^2 / (f_s * sum w^2), DC and Nyquist unscaled.
    const double scale = 1.0 / (trace.f_s * u * static_cast<double>(k_segs));
    NoiseSpectrum spec;
    spec.sidedness = Sidedness::OneSided;
    for (std::size_t k = 1; k <= seg / 2; ++k) {
        const double factor = (k == seg / 2) ? 1.0 : 2.0;
        spec.frequency.push_back(trace.f_s * static_cast<double>(k) / static_cast<double>(seg));
        spec.asd.push_back(std::sqrt(psd[k] * factor * scale));
    }
    return spec;
}

OuFit ou_fit(const PhaseTrace& trace) {
    trace.validate();
    const std::size_t n = trace.samples.size();
    double mean = 0.0;
    for (double v : trace.samples) mean += v;
    mean /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double x = trace.samples[i] - mean;
        const double y = trace.samples[i + 1] - mean;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    if (sxx == 0.0) throw std::runtime_error("ou_fit: constant trace");
    const double a = sxy / sxx;

    OuFit fit;
    fit.lag1 = a;
    if (a >= 1.0) throw std::runtime_error("ou_fit: no decay detected (lag-1 coefficient >= 1)");
    if (a <= 0.0) {
        fit.theta_hat = std::numeric_limits<double>::infinity();
        fit.out_of_band = true;
    } else {
        fit.theta_hat = -trace.f_s * std::log(a);
        fit.out_of_band = fit.theta_hat > trace.f_s;
    }

    double var = 0.0;
    for (double v : trace.samples) var += (v - mean) * (v - mean);
    fit.sigma_stat_hat = std::sqrt(var / static_cast<double>(n - 1));

    if (!fit.out_of_band && trace.span() * fit.theta_hat < 20.0)
        throw std::runtime_error("ou_fit: trace shorter than 20/theta_hat");
    return fit;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("loglog_slope: need >= 2 matching points");
    std::vector<double> lx, ly;
    lx.reserve(x.size());
    ly.reserve(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("loglog_slope: points must be positive");
        lx.push_back(std::log10(x[i]));
        ly.push_back(std::log10(y[i]));
    }
    return fit_line(lx, ly).slope;
}

}  // namespace phaselock
