// Acceptance suite: one check per release criterion, each printing a
// PASS/FAIL line with the measured value and its pinned tolerance.
// Exit code = number of failed criteria. An optional argv[1] selects a
// single criterion by number.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <string>
#include <vector>

#include "phaselock/analytics.hpp"
#include "phaselock/estimators.hpp"
#include "phaselock/numeric.hpp"
#include "phaselock/rng.hpp"
#include "phaselock/sim.hpp"

using namespace phaselock;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("%s  %2d  %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

SimConfig default_point() {
    SimConfig cfg;
    cfg.fringe = make_pulse_pair_fringe();
    cfg.lock = lock_point_at(cfg.fringe, 0.0);  // r0 = 5/8, slope = +1/8
    cfg.det = DetectorConfig{200e3, 0.0, 0.0};
    cfg.epsilon = -1e-5;
    cfg.duration_s = 100.0;
    cfg.seed = 1;
    return cfg;
}

// Pooled RMS phase error over independent replicates of the same run.
double pooled_sigma(const SimConfig& base, int replicates, std::uint64_t master_seed) {
    double sum_sq = 0.0, n = 0.0;
    for (int k = 0; k < replicates; ++k) {
        SimConfig cfg = base;
        cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(k));
        const SimResult r = run(cfg);
        sum_sq += r.sigma_phi * r.sigma_phi * static_cast<double>(r.steady_events);
        n += static_cast<double>(r.steady_events);
    }
    return std::sqrt(sum_sq / n);
}

// Independent 1-D minimizer (trisection), used as the oracle against the
// closed-form optima.
template <typename F>
double oracle_minimize(F f, double lo, double hi) {
    for (int i = 0; i < 300; ++i) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2))
            hi = m2;
        else
            lo = m1;
    }
    return 0.5 * (lo + hi);
}

// --- criterion 1 -----------------------------------------------------------
void criterion_1() {
    SimConfig cfg = default_point();
    const double expected = ou_params(cfg.epsilon, cfg.lock, cfg.det.f_total()).sigma_stat;
    const double sigma = pooled_sigma(cfg, 25, 1);
    const double rel = sigma / expected - 1.0;
    report(1, "OU stationary noise", std::abs(rel) <= 0.05,
           fmt("sigma_phi = %.4g rad vs %.4g rad (%+.2f %%, tol 5 %%, 25 x 100 s pooled)", sigma,
               expected, 100.0 * rel));
}

// --- criterion 2 -----------------------------------------------------------
double fitted_tau(double abs_epsilon, double duration, double f_s, int replicates,
                  std::uint64_t master_seed) {
    SimConfig cfg = default_point();
    cfg.epsilon = -abs_epsilon;
    cfg.initial_phase_error_rad = 0.5;
    cfg.duration_s = duration;
    cfg.record = RecordMode::FullTrace;
    cfg.sample_rate_hz = f_s;

    std::vector<double> mean;
    for (int k = 0; k < replicates; ++k) {
        cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(k));
        const SimResult r = run(cfg);
        if (mean.empty()) mean.assign(r.trace_phase.size(), 0.0);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += r.trace_phase[i];
    }
    for (double& v : mean) v /= replicates;

    // Fit ln(mean) where the transient is inside the near-linear fringe band.
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (mean[i] <= 0.125 && mean[i] >= 0.025) {
            ts.push_back(static_cast<double>(i) / f_s);
            ys.push_back(std::log(mean[i]));
        }
    }
    if (ts.size() < 8) return -1.0;
    return -1.0 / fit_line(ts, ys).slope;
}

void criterion_2() {
    struct Case {
        double abs_eps, tau_expected, duration, f_s;
        int reps;
    };
    const Case cases[] = {
        {1e-6, 20.0, 80.0, 100.0, 16},
        {1e-5, 2.0, 12.0, 500.0, 32},
        {1e-4, 0.2, 1.5, 2000.0, 128},
    };
    bool all = true;
    std::string detail;
    for (const Case& c : cases) {
        const double tau = fitted_tau(c.abs_eps, c.duration, c.f_s, c.reps, 2);
        const double rel = tau / c.tau_expected - 1.0;
        const bool ok = tau > 0.0 && std::abs(rel) <= 0.10;
        all = all && ok;
        detail += fmt("|eps|=%.0e: tau = %.3g s vs %.3g s (%+.1f %%); ", c.abs_eps, tau,
                      c.tau_expected, 100.0 * rel);
    }
    report(2, "Exponential settling", all, detail + "tol 10 %");
}

// --- criterion 3 -----------------------------------------------------------
void criterion_3() {
    const SimConfig cfg = default_point();
    const OuParams p = ou_params(cfg.epsilon, cfg.lock, cfg.det.f_total());
    // 0.0796 Hz, which rounds to the quoted 0.08 Hz at two significant figures
    const bool ok = std::abs(p.f_lock - 0.0795775) < 1e-6 && p.f_lock >= 0.0795 && p.f_lock < 0.0805;
    report(3, "Lock bandwidth", ok, fmt("f_lock = %.6g Hz (expect 0.0796, 2 sig figs -> 0.080)", p.f_lock));
    const OuParams slow = ou_params(-5e-4, cfg.lock, 1e3);
    std::printf("      note: at |eps| = 5e-4 and f_c = 1 kHz the bandwidth drops to f_lock = %.4g Hz\n"
                "      (2 sig figs -> 0.020); the pi/100 accuracy claim under drift at that point\n"
                "      rests on the reduced-drift lock-noise term and is not independently testable.\n",
                slow.f_lock);
}

// --- criterion 4 -----------------------------------------------------------
void criterion_4() {
    SimConfig cfg = default_point();
    cfg.duration_s = 2000.0;
    cfg.record = RecordMode::FullTrace;
    cfg.sample_rate_hz = 4.0;
    cfg.seed = 4;
    const SimResult r = run(cfg);
    const OuParams p = ou_params(cfg.epsilon, cfg.lock, cfg.det.f_total());

    const NoiseSpectrum est = psd_estimate(r.phase_trace(), 8);
    double sum_est = 0.0, sum_model = 0.0;
    int n_bins = 0;
    for (std::size_t k = 0; k < est.frequency.size(); ++k) {
        const double f = est.frequency[k];
        if (f < p.f_lock / 10.0 || f > 10.0 * p.f_lock) continue;
        sum_est += est.asd[k] * est.asd[k];
        sum_model += 2.0 * lock_psd(f, p, cfg.lock, cfg.det.f_total());  // one-sided model
        ++n_bins;
    }
    const double ratio = sum_est / sum_model;
    const bool psd_ok = n_bins > 20 && std::abs(ratio - 1.0) <= 0.20;

    const double integral = 2.0 * integrate_log_adaptive(
                                [&](double f) { return lock_psd(f, p, cfg.lock, cfg.det.f_total()); },
                                1e-6, 1e6, 1e-7);
    const double quad_rel = integral / (p.sigma_stat * p.sigma_stat) - 1.0;
    const bool quad_ok = std::abs(quad_rel) <= 1e-3;

    report(4, "Lorentzian PSD", psd_ok && quad_ok,
           fmt("band-averaged Welch/model = %.3f over [f_lock/10, 10 f_lock] (%d bins, tol 20 %%); "
               "quadrature/sigma^2 - 1 = %.2e (tol 1e-3)",
               ratio, n_bins, quad_rel));
}

// --- criterion 5 -----------------------------------------------------------
void criterion_5() {
    SimConfig cfg = default_point();
    cfg.drift = DriftModel::linear(0.08);
    cfg.initial_phase_error_rad = 0.16;  // start near the equilibrium
    cfg.seed = 5;
    const SimResult r = run(cfg);
    const double expected = linear_drift_offset(0.08, cfg.det.f_total(), cfg.epsilon, cfg.lock);
    // The feedback-balance equilibrium is measured through the click ratio,
    // for which the drift/correction balance behind the formula is exact.
    // The raw phase-trace mean also carries the fringe-curvature shift and is
    // reported alongside.
    const double measured = r.ratio_implied_offset;
    const double rel = measured / expected - 1.0;
    report(5, "Linear-drift equilibrium", std::abs(rel) <= 0.05,
           fmt("ratio-implied offset = %+.4g rad vs %+.4g rad (%+.2f %%, tol 5 %%); "
               "raw phase mean %+.4g rad includes the fringe-curvature shift",
               measured, expected, 100.0 * rel, r.mean_offset));
}

// --- criterion 6 -----------------------------------------------------------
void criterion_6() {
    const LockPoint lock{0.0, 0.625, 0.125};
    const double f_c = 200e3;
    const double d_fiber = 4e-3 * 4e-3;
    const double d_lin = 0.08;

    const Optimum wie = wiener_optimum(lock, f_c, d_fiber);
    const Optimum lin = linear_drift_optimum(d_lin, f_c, lock);

    const double eps_wie_num =
        -oracle_minimize([&](double e) { return wiener_total(-e, lock, f_c, d_fiber); }, 1e-7, 1e-3);
    const double eps_lin_num = -oracle_minimize(
        [&](double e) { return linear_drift_total(d_lin, f_c, -e, lock); }, 1e-6, 1e-2);

    const double rel_wie = eps_wie_num / wie.epsilon_opt - 1.0;
    const double rel_lin = eps_lin_num / lin.epsilon_opt - 1.0;
    const bool numeric_ok = std::abs(rel_wie) <= 1e-6 && std::abs(rel_lin) <= 1e-6;

    const bool values_ok = std::abs(wie.epsilon_opt + 9.2376e-6) <= 1e-9 &&
                           std::abs(wie.sigma_min - 5.8857e-3) <= 1e-6;
    const bool consistent =
        std::abs(wiener_total(wie.epsilon_opt, lock, f_c, d_fiber) / wie.sigma_min - 1.0) <= 1e-12 &&
        std::abs(linear_drift_total(d_lin, f_c, lin.epsilon_opt, lock) / lin.sigma_min - 1.0) <= 1e-12;

    report(6, "Optimal step sizes", numeric_ok && values_ok && consistent,
           fmt("wiener eps_opt = %.5g (numeric %+0.1e rel), sigma_min = %.4g rad; "
               "linear eps_opt = %.5g (numeric %+0.1e rel), sigma_min = %.4g rad",
               wie.epsilon_opt, rel_wie, wie.sigma_min, lin.epsilon_opt, rel_lin, lin.sigma_min));
    std::printf("      note: ideal-Wiener minimum 5.89 mrad is order-level consistent with the\n"
                "      6.5 mrad quoted for the measured (non-ideal) drift spectrum; not asserted.\n");
}

// --- criterion 7 -----------------------------------------------------------
void criterion_7() {
    SimConfig base = default_point();
    base.epsilon = -1e-4;

    // (a) identical click streams through n = 1, 10, 100 controllers
    Rng rng(700);
    std::vector<TimedClick> stream;
    double t = 0.0;
    const int n_clicks = 600000;  // divisible by all block sizes
    stream.reserve(n_clicks);
    for (int i = 0; i < n_clicks; ++i) {
        t += rng.exponential(base.det.f_total());
        stream.push_back({t, rng.u01() < base.lock.r0 ? 0 : 1});
    }
    double total1 = 0.0;
    double lag1 = 0.0;
    bool totals_ok = true, lags_ok = true;
    std::string lag_detail;
    for (int n : {1, 10, 100}) {
        SimConfig cfg = base;
        cfg.controller.variant = n == 1 ? ControllerVariant::Immediate : ControllerVariant::AveragingN;
        cfg.controller.averaging_n = n;
        const ReplayResult rep = replay(stream, cfg);
        if (n == 1) {
            total1 = rep.total_correction;
            lag1 = rep.mean_feedback_lag_s;
        } else {
            // The steps commute exactly; only summation order differs, so the
            // totals may disagree by float accumulation noise (~1e-13 rad).
            totals_ok = totals_ok && std::abs(rep.total_correction - total1) <= 1e-9;
            const double expect_extra =
                averaging_equivalence(n, cfg.epsilon, cfg.lock, cfg.det.f_total()).extra_delay_s -
                averaging_equivalence(1, cfg.epsilon, cfg.lock, cfg.det.f_total()).extra_delay_s;
            const double measured = rep.mean_feedback_lag_s - lag1;
            lags_ok = lags_ok && std::abs(measured / expect_extra - 1.0) <= 0.05;
            lag_detail += fmt("n=%d: delay %.3g s vs %.3g s; ", n, measured, expect_extra);
        }
    }

    // (b) closed-loop noise is independent of n
    double sigma1 = 0.0, se1 = 0.0;
    bool sigma_ok = true;
    std::string sigma_detail;
    for (int n : {1, 10, 100}) {
        SimConfig cfg = base;
        cfg.controller.variant = n == 1 ? ControllerVariant::Immediate : ControllerVariant::AveragingN;
        cfg.controller.averaging_n = n;
        const int reps = 4;
        double s = 0.0, s2 = 0.0;
        for (int k = 0; k < reps; ++k) {
            cfg.seed = derive_seed(701 + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
            const SimResult r = run(cfg);
            s += r.sigma_phi;
            s2 += r.sigma_phi * r.sigma_phi;
        }
        const double mean = s / reps;
        const double se = std::sqrt(std::max(0.0, (s2 - s * s / reps) / (reps - 1)) / reps);
        if (n == 1) {
            sigma1 = mean;
            se1 = se;
        } else {
            const double comb = std::sqrt(se * se + se1 * se1);
            sigma_ok = sigma_ok && std::abs(mean - sigma1) <= 2.0 * comb;
            sigma_detail += fmt("sigma(n=%d) = %.4g vs sigma(1) = %.4g (+-2se %.2g); ", n, mean,
                                sigma1, 2.0 * comb);
        }
    }

    report(7, "Averaging equivalence", totals_ok && lags_ok && sigma_ok,
           fmt("identical total correction: %s; %s%s", totals_ok ? "yes" : "NO",
               lag_detail.c_str(), sigma_detail.c_str()));
}

// --- criterion 8 -----------------------------------------------------------
void criterion_8() {
    // Wiener drift, free-running
    SimConfig cfg = default_point();
    cfg.epsilon = 0.0;
    cfg.det.f_signal = 2e4;
    cfg.drift = DriftModel::wiener(4e-3 * 4e-3);
    cfg.duration_s = 600.0;
    cfg.record = RecordMode::FullTrace;
    cfg.sample_rate_hz = 2000.0;
    cfg.seed = 8;
    const SimResult r = run(cfg);
    std::vector<double> taus, devs;
    for (double tau = 1e-3; tau <= 3.0 * 1.0001; tau *= std::pow(10.0, 0.25)) taus.push_back(tau);
    for (const auto& p : increment_deviation(r.phase_trace(), taus)) devs.push_back(p.deviation);
    const double slope_w = loglog_slope(taus, devs);
    const double amp_mid = devs[8] / std::sqrt(cfg.drift.wiener_d * taus[8]);  // tau = 0.1 s
    const bool wiener_ok = std::abs(slope_w - 0.5) <= 0.05 && std::abs(amp_mid - 1.0) <= 0.10;

    // Linear drift
    SimConfig lin = default_point();
    lin.epsilon = 0.0;
    lin.drift = DriftModel::linear(0.08);
    lin.duration_s = 100.0;
    lin.record = RecordMode::FullTrace;
    lin.sample_rate_hz = 2000.0;
    lin.seed = 9;
    const SimResult rl = run(lin);
    std::vector<double> taus_l, devs_l;
    for (double tau = 1e-3; tau <= 3.0 * 1.0001; tau *= std::pow(10.0, 0.25)) taus_l.push_back(tau);
    for (const auto& p : increment_deviation(rl.phase_trace(), taus_l)) devs_l.push_back(p.deviation);
    const double slope_l = loglog_slope(taus_l, devs_l);
    const bool linear_ok = std::abs(slope_l - 1.0) <= 0.02;

    report(8, "Allan regimes", wiener_ok && linear_ok,
           fmt("wiener slope = %.3f (tol 0.50+-0.05), amplitude/sqrt(D tau) = %.3f at 0.1 s; "
               "linear slope = %.4f (tol 1.00+-0.02)",
               slope_w, amp_mid, slope_l));
}

// --- criterion 9 -----------------------------------------------------------
void criterion_9() {
    SimConfig cfg = default_point();
    cfg.det = DetectorConfig{200e3, 100e3, 100e3};  // 50 % dark fraction, balanced
    cfg.epsilon = -1e-4;
    cfg.seed = 10;
    const LockPoint eff = cfg.effective_lock();
    const double expected = ou_params(cfg.epsilon, eff, cfg.det.f_total()).sigma_stat;

    double sum_sq = 0.0, n_ss = 0.0, ratio_acc = 0.0, offset_acc = 0.0;
    const int reps = 4;
    for (int k = 0; k < reps; ++k) {
        cfg.seed = derive_seed(10, static_cast<std::uint64_t>(k));
        const SimResult r = run(cfg);
        sum_sq += r.sigma_phi * r.sigma_phi * static_cast<double>(r.steady_events);
        n_ss += static_cast<double>(r.steady_events);
        ratio_acc += static_cast<double>(r.clicks_ch0) / static_cast<double>(r.n_events);
        offset_acc += r.mean_offset;
    }
    const double sigma = std::sqrt(sum_sq / n_ss);
    const double ratio = ratio_acc / reps;
    const double offset = offset_acc / reps;
    const double rel = sigma / expected - 1.0;
    const bool ok = std::abs(rel) <= 0.10 && std::abs(ratio - eff.r0) < 5e-4 &&
                    std::abs(offset) < 2e-3;
    report(9, "Dark-count correction", ok,
           fmt("locks at ratio %.4f (r0_eff = %.4f); sigma = %.4g vs slope-diluted model %.4g "
               "(%+.1f %%, tol 10 %%); mean offset %+.2e rad",
               ratio, eff.r0, sigma, expected, 100.0 * rel, offset));
}

// --- criterion 10 ----------------------------------------------------------
void criterion_10() {
    SimConfig cfg = default_point();
    cfg.duration_s = 50.0;
    std::vector<double> values;
    for (int i = 0; i <= 4; ++i) values.push_back(1e-4 * std::pow(10.0, i / 4.0));
    cfg.seed = 11;
    const auto rows = sweep(cfg, SweepAxis::Epsilon, values, 8);
    std::vector<double> xs, ys;
    bool cells_ok = true;
    for (const auto& row : rows) {
        cells_ok = cells_ok && row.replicates_ok == 8;
        xs.push_back(row.value);
        ys.push_back(row.sigma_mean);
    }
    const double slope = loglog_slope(xs, ys);
    report(10, "Epsilon square-root scaling", cells_ok && std::abs(slope - 0.5) <= 0.03,
           fmt("power-law exponent = %.3f over one decade (tol 0.50 +- 0.03)", slope));
}

// --- criterion 11 ----------------------------------------------------------
std::string serialize_trace(const SimResult& r) {
    std::string out;
    char buf[128];
    for (std::size_t i = 0; i < r.trace_phase.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.trace_phase[i], r.trace_command[i]);
        out += buf;
    }
    return out;
}

void criterion_11() {
    SimConfig cfg = default_point();
    cfg.seed = 12;
    const SimResult a = run(cfg);
    const SimResult b = run(cfg);
    bool deterministic = a.n_events == b.n_events && a.sigma_phi == b.sigma_phi &&
                         a.mean_offset == b.mean_offset && a.clicks_ch0 == b.clicks_ch0;

    SimConfig tr = cfg;
    tr.duration_s = 10.0;
    tr.record = RecordMode::FullTrace;
    tr.sample_rate_hz = 1000.0;
    const std::string ta = serialize_trace(run(tr));
    const std::string tb = serialize_trace(run(tr));
    deterministic = deterministic && ta == tb;

    const double evps = a.events_per_second;
    const bool fast = evps >= 1e7;
    report(11, "Determinism and throughput", deterministic && fast,
           fmt("repeat runs byte-identical: %s; %.3g events/s in summary mode (floor 1e7)",
               deterministic ? "yes" : "NO", evps));
}

}  // namespace

int main(int argc, char** argv) {
    const int only = argc > 1 ? std::atoi(argv[1]) : 0;
    using Fn = void (*)();
    const Fn criteria[] = {criterion_1, criterion_2, criterion_3, criterion_4,
                           criterion_5, criterion_6, criterion_7, criterion_8,
                           criterion_9, criterion_10, criterion_11};
    for (int i = 0; i < 11; ++i) {
        if (only != 0 && only != i + 1) continue;
        criteria[i]();
    }
    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
    return g_failures;
}
