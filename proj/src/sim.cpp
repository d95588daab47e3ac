#include "phaselock/sim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "phaselock/analytics.hpp"
#include "phaselock/rng.hpp"

namespace phaselock {

namespace {
constexpr double kQuarterPi = std::numbers::pi / 4.0;
constexpr double kSqrt2Over8 = 0.17677669529663687;
constexpr double kHalfPi = std::numbers::pi / 2.0;
}  // namespace

void SimConfig::validate() const {
    fringe.validate();
    det.validate();
    drift.validate();
    if (!(duration_s > 0.0)) throw std::invalid_argument("sim: duration must be > 0");
    if (!std::isfinite(epsilon)) throw std::invalid_argument("sim: epsilon must be finite");
    if (!std::isfinite(initial_phase_error_rad))
        throw std::invalid_argument("sim: initial phase error must be finite");
    // The lock point must live on the configured fringe.
    const LockPoint derived = lock_point_at(fringe, lock.phi0);
    if (std::abs(derived.r0 - lock.r0) > 1e-6 || std::abs(derived.slope - lock.slope) > 1e-6)
        throw std::invalid_argument("sim: lock point does not match the fringe at phi0");
    if (record == RecordMode::FullTrace) {
        if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sim: sample rate must be > 0");
        if (sample_rate_hz > 10.0 * det.f_total())
            throw std::invalid_argument("sim: sample rate cannot out-resolve events (> 10 f_total)");
    }
    if (actuator) actuator->validate();
    if (!allow_unstable && epsilon != 0.0) {
        const LockPoint eff = effective_lock();
        if (eff.slope != 0.0 && epsilon * eff.slope > 0.0)
            throw std::invalid_argument(
                "sim: epsilon and slope have equal signs (unstable); set allow_unstable to force");
    }
}

SimResult run(const SimConfig& config) {
    config.validate();

    const double f_signal = config.det.f_signal;
    const double f_dark0 = config.det.f_dark_ch0;
    const double f_dark1 = config.det.f_dark_ch1;
    const double f_total = config.det.f_total();
    const bool has_dark = f_dark0 > 0.0 || f_dark1 > 0.0;

    const LockPoint eff = config.effective_lock();
    StepParams steps;
    if (config.epsilon != 0.0) {
        if (config.allow_unstable) {
            steps.epsilon = config.epsilon;
            steps.r0 = eff.r0;
            steps.eps0 = 2.0 * config.epsilon * (1.0 - eff.r0);
            steps.eps1 = -2.0 * config.epsilon * eff.r0;
        } else {
            steps = make_step_params(config.epsilon, eff);
        }
    } else {
        steps.r0 = eff.r0;
    }
    Controller controller(steps, config.controller);
    const bool fast_immediate =
        config.controller.variant == ControllerVariant::Immediate && !config.actuator;

    // Burn-in: 5 time constants of the expected OU transient.
    const double theta = -2.0 * config.epsilon * eff.slope * f_total;
    const double burn_in = theta > 0.0 ? 5.0 / theta : 0.0;

    Rng rng(config.seed);
    DriftSource drift(config.drift, config.duration_s, rng);
    const bool drifting = drift.active();

    // Fringe evaluated at phi0 + e with one trig call per signal event.
    const bool pulse_pair = config.fringe.kind == FringeKind::PulsePairPattern;
    const double fringe_base = config.lock.phi0 - config.fringe.phase_offset + (pulse_pair ? kQuarterPi : 0.0);
    const double fringe_v = config.fringe.visibility;

    // Actuator state: biased to mid-range so both signs have headroom.
    const bool with_actuator = config.actuator.has_value();
    const double act_delay = with_actuator ? config.actuator->loop_delay_s : 0.0;
    double raw_cmd = 0.0;      // accumulated controller output
    double applied_cmd = 0.0;  // quantized feedback currently acting on the phase
    double act_bias = 0.0;
    double act_bias_q = 0.0;
    if (with_actuator) {
        act_bias = 0.5 * config.actuator->range_rad;
        bool sat = false;
        act_bias_q = config.actuator->quantize(act_bias, sat);
    }
    std::deque<std::pair<double, double>> pending;  // (apply time, delta)

    SimResult res;
    res.burn_in_s = burn_in;
    const bool record = config.record == RecordMode::FullTrace;
    std::size_t sample_idx = 0;
    const double sample_dt = record ? 1.0 / config.sample_rate_hz : 0.0;
    if (record) {
        const auto n_samples = static_cast<std::size_t>(config.duration_s * config.sample_rate_hz) + 1;
        res.trace_phase.reserve(n_samples);
        res.trace_command.reserve(n_samples);
        res.trace_fs = config.sample_rate_hz;
    }

    double t = 0.0;
    double e = config.initial_phase_error_rad;  // phi - phi0, includes feedback
    double sum_e = 0.0, sum_e2 = 0.0;
    std::uint64_t n_ss = 0, n_ss_ch0 = 0, breaches = 0;
    std::uint64_t n_events = 0, n_ch0 = 0, n_ch1 = 0, n_dark = 0;

    auto apply_quantized = [&](double delta) {
        raw_cmd += delta;
        bool sat = false;
        double new_applied = config.actuator->quantize(act_bias + raw_cmd, sat) - act_bias_q;
        if (sat) {
            ++res.saturation_events;
            if (config.actuator->recenter_on_saturation) {
                // Shift by whole wavelengths back toward mid-range; the fringe
                // cannot tell, so the tracked phase error stays continuous.
                const double two_pi = 2.0 * std::numbers::pi;
                const double turns = std::nearbyint(raw_cmd / two_pi);
                if (turns != 0.0) {
                    raw_cmd -= turns * two_pi;
                    bool sat2 = false;
                    new_applied = config.actuator->quantize(act_bias + raw_cmd, sat2) - act_bias_q;
                    e += turns * two_pi;
                    ++res.recenter_events;
                }
            }
        }
        e += new_applied - applied_cmd;
        applied_cmd = new_applied;
    };

    const auto t_start = std::chrono::steady_clock::now();
    while (true) {
        const double dt = rng.exponential(f_total);
        const double t_next = t + dt;
        if (record) {
            double tg = static_cast<double>(sample_idx) * sample_dt;
            while (tg < t_next && tg <= config.duration_s) {
                res.trace_phase.push_back(e);
                res.trace_command.push_back(with_actuator ? applied_cmd : raw_cmd);
                tg = static_cast<double>(++sample_idx) * sample_dt;
            }
        }
        if (t_next > config.duration_s) break;
        t = t_next;

        while (!pending.empty() && pending.front().first <= t) {
            apply_quantized(pending.front().second);
            pending.pop_front();
        }
        if (drifting) e += drift.increment(dt);

        int ch = 0;
        bool dark = false;
        if (has_dark) {
            const double u = rng.u01() * f_total;
            if (u >= f_signal) {
                dark = true;
                ch = u < f_signal + f_dark0 ? 0 : 1;
            }
        }
        if (dark) {
            ++n_dark;
        } else {
            const double r = pulse_pair ? 0.5 + kSqrt2Over8 * std::sin(fringe_base + e)
                                        : 0.5 * (1.0 + fringe_v * std::cos(fringe_base + e));
            ch = rng.u01() < r ? 0 : 1;
        }

        double delta;
        if (fast_immediate) {
            delta = ch == 0 ? steps.eps0 : steps.eps1;
            raw_cmd += delta;
            e += delta;
        } else {
            delta = controller.on_detection(ch);
            if (delta != 0.0) {
                if (with_actuator) {
                    if (act_delay > 0.0)
                        pending.emplace_back(t + act_delay, delta);
                    else
                        apply_quantized(delta);
                } else {
                    raw_cmd += delta;
                    e += delta;
                }
            }
        }

        ++n_events;
        if (ch == 0)
            ++n_ch0;
        else
            ++n_ch1;
        if (t >= burn_in) {
            ++n_ss;
            sum_e += e;
            sum_e2 += e * e;
            if (ch == 0) ++n_ss_ch0;
            if (e > kHalfPi || e < -kHalfPi) ++breaches;
        }
        if (config.capture_clicks)
            res.clicks.push_back({t, static_cast<std::uint8_t>(ch), with_actuator ? applied_cmd : raw_cmd});
    }
    const auto t_end = std::chrono::steady_clock::now();

    res.n_events = n_events;
    res.clicks_ch0 = n_ch0;
    res.clicks_ch1 = n_ch1;
    res.dark_events = n_dark;
    res.steady_events = n_ss;
    if (n_ss >= 2) {
        res.stats_valid = true;
        const double n = static_cast<double>(n_ss);
        res.mean_offset = sum_e / n;
        res.sigma_phi = std::sqrt(sum_e2 / n);
        const double var = sum_e2 / n - res.mean_offset * res.mean_offset;
        res.std_phi = var > 0.0 ? std::sqrt(var) : 0.0;
        if (eff.slope != 0.0) {
            const double r_hat = static_cast<double>(n_ss_ch0) / n;
            res.ratio_implied_offset = (r_hat - eff.r0) / eff.slope;
        }
        res.nonconvergence = breaches * 10 > n_ss;
    }
    res.wallclock_s = std::chrono::duration<double>(t_end - t_start).count();
    res.events_per_second = res.wallclock_s > 0.0 ? static_cast<double>(n_events) / res.wallclock_s : 0.0;
    return res;
}

std::vector<SweepRow> sweep(const SimConfig& base, SweepAxis axis,
                            const std::vector<double>& values, int replicates, EpsilonMode mode,
                            int jobs) {
    if (values.empty()) throw std::invalid_argument("sweep: values must be non-empty");
    if (replicates < 1) throw std::invalid_argument("sweep: replicates must be >= 1");
    if (jobs < 1) jobs = 1;

    struct Cell {
        double sigma = 0.0;
        double offset = 0.0;
        bool ok = false;
        bool nonconverged = false;
        std::string error;
    };
    std::vector<Cell> cells(values.size() * static_cast<std::size_t>(replicates));

    auto run_cell = [&](std::size_t idx) {
        const std::size_t vi = idx / static_cast<std::size_t>(replicates);
        SimConfig cfg = base;
        cfg.record = RecordMode::SummaryOnly;
        cfg.capture_clicks = false;
        cfg.seed = derive_seed(base.seed, idx);
        try {
            const double value = values[vi];
            const LockPoint eff = cfg.effective_lock();
            const double sign = eff.slope > 0.0 ? -1.0 : 1.0;
            if (axis == SweepAxis::Epsilon) {
                cfg.epsilon = std::abs(value) * sign;
            } else {
                if (!(value > 0.0)) throw std::invalid_argument("sweep: count rate must be > 0");
                cfg.det.f_signal = value;
                if (mode == EpsilonMode::WienerOpt) {
                    cfg.epsilon =
                        wiener_optimum(cfg.effective_lock(), cfg.det.f_total(), cfg.drift.wiener_d)
                            .epsilon_opt;
                } else if (mode == EpsilonMode::LinearOpt) {
                    cfg.epsilon =
                        linear_drift_optimum(cfg.drift.linear_d, cfg.det.f_total(), cfg.effective_lock())
                            .epsilon_opt;
                }
            }
            const SimResult r = run(cfg);
            if (!r.stats_valid) throw std::runtime_error("run too short for steady-state statistics");
            cells[idx] = {r.sigma_phi, r.mean_offset, true, r.nonconvergence, {}};
        } catch (const std::exception& ex) {
            cells[idx] = {0.0, 0.0, false, false, ex.what()};
        }
    };

    const std::size_t total = cells.size();
    if (jobs == 1) {
        for (std::size_t i = 0; i < total; ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), total);
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) run_cell(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::vector<SweepRow> rows(values.size());
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        SweepRow& row = rows[vi];
        row.value = values[vi];
        double sum = 0.0, sum2 = 0.0, off = 0.0;
        int ok = 0;
        for (int j = 0; j < replicates; ++j) {
            const Cell& c = cells[vi * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(j)];
            if (c.ok) {
                sum += c.sigma;
                sum2 += c.sigma * c.sigma;
                off += c.offset;
                ++ok;
                if (c.nonconverged) ++row.nonconverged;
            } else if (row.error.empty()) {
                row.error = c.error;
            }
        }
        row.replicates_ok = ok;
        if (ok > 0) {
            row.sigma_mean = sum / ok;
            row.mean_offset = off / ok;
            if (ok > 1) {
                const double var = (sum2 - sum * sum / ok) / (ok - 1);
                row.sigma_stderr = var > 0.0 ? std::sqrt(var / ok) : 0.0;
            }
        }
    }
    return rows;
}

ReplayResult replay(const std::vector<TimedClick>& stream, const SimConfig& config) {
    ReplayResult res;
    if (stream.empty()) return res;

    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& c : stream) {
        if (c.channel != 0 && c.channel != 1)
            throw std::invalid_argument("replay: channel must be 0 or 1");
        if (c.t < prev_t) throw std::invalid_argument("replay: timestamps must be sorted");
        prev_t = c.t;
    }

    const LockPoint eff = config.effective_lock();
    StepParams steps =
        config.epsilon != 0.0 ? make_step_params(config.epsilon, eff) : StepParams{0.0, eff.r0, 0.0, 0.0};
    Controller controller(steps, config.controller);

    res.commands.reserve(stream.size());
    double cmd = 0.0;
    double step_sum = 0.0, step_sum2 = 0.0;
    double lag_sum = 0.0;
    double block_time_sum = 0.0;
    std::uint64_t block_count = 0;
    std::uint64_t lag_clicks = 0;

    for (const auto& c : stream) {
        const double delta = controller.on_detection(c.channel);
        block_time_sum += c.t;
        ++block_count;
        if (delta != 0.0 || config.controller.variant != ControllerVariant::AveragingN) {
            // Steps earned by the block's clicks take effect now.
            lag_sum += static_cast<double>(block_count) * c.t - block_time_sum;
            lag_clicks += block_count;
            block_time_sum = 0.0;
            block_count = 0;
        }
        cmd += delta;
        step_sum += delta;
        step_sum2 += delta * delta;
        if (c.channel == 0)
            ++res.clicks_ch0;
        else
            ++res.clicks_ch1;
        res.commands.push_back({c.t, static_cast<std::uint8_t>(c.channel), cmd});
    }
    res.n_events = stream.size();
    res.click_ratio = static_cast<double>(res.clicks_ch0) / static_cast<double>(res.n_events);
    res.total_correction = cmd;
    const double n = static_cast<double>(res.n_events);
    res.step_mean = step_sum / n;
    res.step_variance = n > 1 ? (step_sum2 - step_sum * step_sum / n) / (n - 1) : 0.0;
    res.mean_feedback_lag_s = lag_clicks > 0 ? lag_sum / static_cast<double>(lag_clicks) : 0.0;

    if (config.record == RecordMode::FullTrace && config.sample_rate_hz > 0.0) {
        res.grid_fs = config.sample_rate_hz;
        const double t_end = stream.back().t;
        const double dt = 1.0 / config.sample_rate_hz;
        std::size_t i = 0;
        double current = 0.0;
        for (std::size_t k = 0; static_cast<double>(k) * dt <= t_end; ++k) {
            const double tg = static_cast<double>(k) * dt;
            while (i < res.commands.size() && res.commands[i].t <= tg) current = res.commands[i++].command;
            res.command_grid.push_back(current);
        }
    }
    return res;
}

}  // namespace phaselock
