#include "phaselock/analytics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "phaselock/numeric.hpp"

namespace phaselock {

namespace {

void check_lock(const LockPoint& lock) {
    if (lock.slope == 0.0) throw std::invalid_argument("analytics: lock point has zero slope");
    if (!(lock.r0 > 0.0 && lock.r0 < 1.0))
        throw std::invalid_argument("analytics: r0 must be in (0, 1)");
}

void check_stable(double epsilon, const LockPoint& lock, double f_c) {
    check_lock(lock);
    if (!(f_c > 0.0)) throw std::invalid_argument("analytics: count rate must be > 0");
    if (epsilon == 0.0) throw std::invalid_argument("analytics: epsilon must be nonzero");
    if (epsilon * lock.slope > 0.0)
        throw std::invalid_argument("analytics: epsilon and slope must have opposite signs");
}

}  // namespace

OuParams ou_params(double epsilon, const LockPoint& lock, double f_c) {
    check_stable(epsilon, lock, f_c);
    OuParams p;
    p.theta = -2.0 * epsilon * lock.slope * f_c;
    p.tau = 1.0 / p.theta;
    p.f_lock = p.theta / (2.0 * std::numbers::pi);
    const double v = 4.0 * epsilon * epsilon * lock.r0 * (1.0 - lock.r0);
    p.diffusion = 0.5 * v * f_c;
    p.sigma_stat = std::sqrt(p.diffusion / p.theta);
    return p;
}

double lock_psd(double f, const OuParams& params, const LockPoint& lock, double f_c) {
    const double x = f / params.f_lock;
    return lock.r0 * (1.0 - lock.r0) / (lock.slope * lock.slope * f_c * (1.0 + x * x));
}

double drift_highpass(double f, double f_lock) {
    const double f2 = f * f;
    return f2 / (f2 + f_lock * f_lock);
}

double total_psd(double f, const NoiseSpectrum& s_drift, const OuParams& params,
                 const LockPoint& lock, double f_c) {
    if (!(f > 0.0)) throw std::invalid_argument("total_psd: drift spectrum undefined at DC");
    return lock_psd(f, params, lock, f_c) +
           s_drift.psd_at(f, Sidedness::TwoSided) * drift_highpass(f, params.f_lock);
}

double total_sigma(const NoiseSpectrum& s_drift, double epsilon, const LockPoint& lock,
                   double f_c, double f_lo, double f_hi, double rel_tol) {
    const OuParams p = ou_params(epsilon, lock, f_c);
    if (f_hi <= 0.0) f_hi = 0.5 * f_c;
    double drift_var = 0.0;
    try {
        // One-sided integral over (0, inf) equals the two-sided one over the line.
        drift_var = integrate_log_adaptive(
            [&](double f) {
                return s_drift.psd_at(f, Sidedness::OneSided) * drift_highpass(f, p.f_lock);
            },
            f_lo, f_hi, rel_tol);
    } catch (const std::runtime_error& ex) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "total_sigma: quadrature over [%g, %g] Hz did not reach relative tolerance %g (%s)",
                      f_lo, f_hi, rel_tol, ex.what());
        throw std::runtime_error(msg);
    }
    return std::sqrt(p.sigma_stat * p.sigma_stat + drift_var);
}

double linear_drift_offset(double d, double f_c, double epsilon, const LockPoint& lock) {
    check_stable(epsilon, lock, f_c);
    return -d / (2.0 * f_c * epsilon * lock.slope);
}

double linear_drift_total(double d, double f_c, double epsilon, const LockPoint& lock) {
    const double offset = linear_drift_offset(d, f_c, epsilon, lock);
    const OuParams p = ou_params(epsilon, lock, f_c);
    return std::sqrt(offset * offset + p.sigma_stat * p.sigma_stat);
}

Optimum linear_drift_optimum(double d, double f_c, const LockPoint& lock) {
    check_lock(lock);
    if (!(f_c > 0.0)) throw std::invalid_argument("analytics: count rate must be > 0");
    if (d == 0.0)
        throw std::invalid_argument("linear_drift_optimum: undefined at d = 0 (degenerates to 0)");
    const double r01 = lock.r0 * (1.0 - lock.r0);
    const double s = std::abs(lock.slope);
    Optimum o;
    o.epsilon_opt = std::cbrt(d * d / (2.0 * f_c * f_c * r01 * s)) * (lock.slope > 0 ? -1.0 : 1.0);
    o.sigma_min = std::sqrt(3.0) * std::cbrt(std::abs(d) * r01 / (4.0 * f_c * s * s));
    return o;
}

double wiener_total(double epsilon, const LockPoint& lock, double f_c, double d_fiber) {
    check_stable(epsilon, lock, f_c);
    if (!(d_fiber >= 0.0)) throw std::invalid_argument("wiener_total: d_fiber must be >= 0");
    const double v = 4.0 * epsilon * epsilon * lock.r0 * (1.0 - lock.r0) + d_fiber / f_c;
    return std::sqrt(v / (-4.0 * epsilon * lock.slope));
}

Optimum wiener_optimum(const LockPoint& lock, double f_c, double d_fiber) {
    check_lock(lock);
    if (!(f_c > 0.0)) throw std::invalid_argument("analytics: count rate must be > 0");
    if (!(d_fiber >= 0.0)) throw std::invalid_argument("wiener_optimum: d_fiber must be >= 0");
    const double r01 = lock.r0 * (1.0 - lock.r0);
    Optimum o;
    o.epsilon_opt = std::sqrt(d_fiber / (4.0 * f_c * r01)) * (lock.slope > 0 ? -1.0 : 1.0);
    o.sigma_min = std::pow(d_fiber * r01 / (f_c * lock.slope * lock.slope), 0.25);
    return o;
}

AveragingEquivalence averaging_equivalence(int n, double epsilon, const LockPoint& lock,
                                           double f_c) {
    if (n < 1) throw std::invalid_argument("averaging_equivalence: n must be >= 1");
    const OuParams p = ou_params(epsilon, lock, f_c);
    AveragingEquivalence eq;
    eq.theta_n = p.theta;
    eq.diffusion_n = p.diffusion;
    eq.sigma_n = p.sigma_stat;
    eq.extra_delay_s = static_cast<double>(n) / (2.0 * f_c);
    return eq;
}

double max_epsilon_for_accuracy(double target_rad, const LockPoint& lock) {
    check_lock(lock);
    if (!(target_rad > 0.0)) throw std::invalid_argument("target accuracy must be > 0");
    return target_rad * target_rad * std::abs(lock.slope) / (lock.r0 * (1.0 - lock.r0));
}

double min_count_rate_wiener(double target_rad, const LockPoint& lock, double d_fiber) {
    check_lock(lock);
    if (!(target_rad > 0.0)) throw std::invalid_argument("target accuracy must be > 0");
    const double t4 = std::pow(target_rad, 4);
    return d_fiber * lock.r0 * (1.0 - lock.r0) / (t4 * lock.slope * lock.slope);
}

double min_count_rate_linear(double target_rad, const LockPoint& lock, double d) {
    check_lock(lock);
    if (!(target_rad > 0.0)) throw std::invalid_argument("target accuracy must be > 0");
    const double t3 = target_rad * target_rad * target_rad;
    return std::abs(d) * lock.r0 * (1.0 - lock.r0) * std::sqrt(27.0) /
           (4.0 * lock.slope * lock.slope * t3);
}

Optimum minimize_total_sigma(const NoiseSpectrum& s_drift, const LockPoint& lock, double f_c,
                             double abs_eps_lo, double abs_eps_hi, double rel_tol) {
    check_lock(lock);
    const double sign = lock.slope > 0 ? -1.0 : 1.0;
    auto objective = [&](double log_eps) {
        return total_sigma(s_drift, sign * std::pow(10.0, log_eps), lock, f_c, 1e-6, -1.0, rel_tol);
    };
    const double log_opt =
        golden_section_min(objective, std::log10(abs_eps_lo), std::log10(abs_eps_hi), 1e-10);
    Optimum o;
    o.epsilon_opt = sign * std::pow(10.0, log_opt);
    o.sigma_min = total_sigma(s_drift, o.epsilon_opt, lock, f_c, 1e-6, -1.0, rel_tol);
    return o;
}

}  // namespace phaselock
