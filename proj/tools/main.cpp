#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>

#include "cli_util.hpp"
#include "phaselock/analytics.hpp"
#include "phaselock/version.hpp"

namespace fs = std::filesystem;
using namespace phaselock;
using namespace phaselock::cli;

namespace {

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool force = false;
    bool strict = false;
    std::string format = "csv";
    int jobs = 1;
    std::string command_line;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_file, "configuration file (key = value lines)");
    cmd->add_option("--set", c.sets, "override a configuration key (key=value, repeatable)");
    cmd->add_option("--out-dir", c.out_dir, "output directory (default: current)");
    cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
    cmd->add_flag("--force", c.force, "overwrite existing output files");
    cmd->add_flag("--strict", c.strict, "treat nonconvergence warnings as errors (exit 3)");
    cmd->add_option("--format", c.format, "table output format: csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--jobs", c.jobs, "parallel sweep cells")->check(CLI::PositiveNumber);
}

Settings make_settings(const Common& c) {
    Settings s;
    if (!c.config_file.empty()) s.load_file(c.config_file);
    for (const auto& kv : c.sets) s.apply_override(kv);
    if (c.seed) s.set("seed", std::to_string(*c.seed));
    return s;
}

std::string out_path(const Common& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

void write_manifest(const Common& c, const Settings& s, const std::string& started,
                    const std::vector<std::string>& outputs) {
    const json m = make_manifest(c.command_line, s, started, utc_now(), outputs);
    atomic_write(out_path(c, manifest_filename()), m.dump(2) + "\n", true);
}

int finish_run_status(const Common& c, const SimResult& r) {
    if (r.nonconvergence) {
        std::cerr << "warning: phase error exceeded pi/2 in more than 10 % of steady-state samples "
                     "(linear-regime breach)\n";
        if (c.strict) return kExitNonconvergence;
    }
    return kExitOk;
}

int cmd_simulate(const Common& c) {
    const std::string started = utc_now();
    const Settings settings = make_settings(c);
    const SimConfig cfg = settings.build_sim_config();
    const SimResult result = run(cfg);

    std::vector<std::string> outputs;
    json summary = result_json(result);
    summary["config"] = settings.echo();

    if (cfg.record == RecordMode::FullTrace) {
        atomic_write(out_path(c, "trace.csv"), trace_csv(result), c.force);
        outputs.push_back("trace.csv");
    }
    if (cfg.capture_clicks) {
        atomic_write(out_path(c, "clicks.csv"), clicks_csv(result.clicks), c.force);
        outputs.push_back("clicks.csv");
    }
    summary["manifest"] = make_manifest(c.command_line, settings, started, utc_now(), outputs);
    atomic_write(out_path(c, "summary.json"), summary.dump(2) + "\n", c.force);
    outputs.push_back("summary.json");
    write_manifest(c, settings, started, outputs);

    std::cout << "sigma_phi_rad=" << fmt(result.sigma_phi)
              << " mean_offset_rad=" << fmt(result.mean_offset)
              << " events=" << result.n_events << "\n";
    return finish_run_status(c, result);
}

std::vector<double> parse_values(const std::string& values_csv, const std::string& log_range) {
    std::vector<double> values;
    if (!values_csv.empty()) {
        std::size_t pos = 0;
        while (pos <= values_csv.size()) {
            const auto comma = values_csv.find(',', pos);
            const std::string tok = values_csv.substr(pos, comma - pos);
            if (!tok.empty()) {
                char* end = nullptr;
                const double v = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0')
                    throw ConfigError("--values: not a number: '" + tok + "'");
                values.push_back(v);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (!log_range.empty()) {
        double lo = 0, hi = 0;
        int n = 0;
        if (std::sscanf(log_range.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 2 || !(lo > 0) ||
            !(hi > lo))
            throw ConfigError("--log-range expects LO:HI:N with 0 < LO < HI, N >= 2");
        for (int i = 0; i < n; ++i)
            values.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    }
    if (values.empty()) throw ConfigError("sweep: no axis values given (--values or --log-range)");
    return values;
}

int cmd_sweep(const Common& c, const std::string& axis_name, const std::string& values_csv,
              const std::string& log_range, int replicates, const std::string& eps_mode) {
    const std::string started = utc_now();
    const Settings settings = make_settings(c);
    const SimConfig base = settings.build_sim_config();

    SweepAxis axis;
    if (axis_name == "epsilon")
        axis = SweepAxis::Epsilon;
    else if (axis_name == "countrate")
        axis = SweepAxis::CountRate;
    else
        throw ConfigError("--axis must be epsilon or countrate");

    EpsilonMode mode = EpsilonMode::Fixed;
    if (eps_mode == "wiener-opt")
        mode = EpsilonMode::WienerOpt;
    else if (eps_mode == "linear-opt")
        mode = EpsilonMode::LinearOpt;
    else if (eps_mode != "fixed")
        throw ConfigError("--epsilon-mode must be fixed, wiener-opt or linear-opt");

    const std::vector<double> values = parse_values(values_csv, log_range);
    const auto rows = sweep(base, axis, values, replicates, mode, c.jobs);

    int ok_rows = 0;
    for (const auto& r : rows)
        if (r.replicates_ok > 0) ++ok_rows;

    std::vector<std::string> outputs;
    if (c.format == "json") {
        atomic_write(out_path(c, "sweep.json"), sweep_json(rows, axis_name).dump(2) + "\n", c.force);
        outputs.push_back("sweep.json");
    } else {
        atomic_write(out_path(c, "sweep.csv"), sweep_csv(rows, axis_name), c.force);
        outputs.push_back("sweep.csv");
    }
    write_manifest(c, settings, started, outputs);

    int nonconverged = 0;
    for (const auto& r : rows) {
        nonconverged += r.nonconverged;
        std::cout << axis_name << "=" << fmt(r.value) << " sigma=" << fmt(r.sigma_mean)
                  << " stderr=" << fmt(r.sigma_stderr) << " ok=" << r.replicates_ok << "\n";
    }
    if (ok_rows == 0) throw ConfigError("sweep: every cell failed");
    if (nonconverged > 0) {
        std::cerr << "warning: " << nonconverged
                  << " replicate(s) breached the linear regime (|error| > pi/2)\n";
        if (c.strict) return kExitNonconvergence;
    }
    return kExitOk;
}

int cmd_plan(const Common& c, const std::string& drift_kind, double wiener_d, double linear_d,
             const std::string& asd_file, double f_c_opt, double target, double eval_epsilon) {
    const std::string started = utc_now();
    const Settings settings = make_settings(c);
    const SimConfig base = settings.build_sim_config();
    const LockPoint lock = base.effective_lock();
    const double f_c = f_c_opt > 0.0 ? f_c_opt : base.det.f_total();
    if (!(f_c > 0.0)) throw ConfigError("plan: count rate must be > 0");

    json out;
    out["schema_version"] = kSchemaVersion;
    out["manifest"] = manifest_filename();
    out["f_c_hz"] = f_c;
    out["lock"] = {{"phi0_rad", lock.phi0}, {"r0", lock.r0}, {"slope_per_rad", lock.slope}};

    Optimum opt;
    if (drift_kind == "wiener") {
        const double d = wiener_d > 0.0 ? wiener_d : settings.get_double("drift.wiener_d_rad2_per_s");
        if (!(d > 0.0)) throw ConfigError("plan: wiener drift needs --wiener-d > 0");
        opt = wiener_optimum(lock, f_c, d);
        out["drift"] = {{"kind", "wiener"}, {"d_fiber_rad2_per_s", d}};
        if (target > 0.0) {
            out["target"] = {{"accuracy_rad", target},
                             {"max_epsilon", max_epsilon_for_accuracy(target, lock)},
                             {"min_count_rate_hz", min_count_rate_wiener(target, lock, d)},
                             {"feasible", true}};
        }
    } else if (drift_kind == "linear" || drift_kind == "doppler") {
        double d = linear_d != 0.0 ? linear_d : settings.get_double("drift.linear_d_rad_per_s");
        json drift_info = {{"kind", drift_kind}};
        if (drift_kind == "doppler") {
            DopplerParams p;
            p.altitude_m = settings.get_double("doppler.altitude_m");
            p.orbital_speed_mps = settings.get_double("doppler.orbital_speed_mps");
            p.wavelength_m = settings.get_double("doppler.wavelength_m");
            p.mzi_delay_s = settings.get_double("doppler.mzi_delay_s");
            d = doppler_drift_rate(p);
            drift_info["chirp_rate_hz_per_s"] = doppler_chirp_rate(p);
            drift_info["mzi_delay_s"] = p.mzi_delay_s;
        }
        if (d == 0.0) throw ConfigError("plan: linear drift needs a nonzero rate");
        opt = linear_drift_optimum(d, f_c, lock);
        drift_info["d_rad_per_s"] = d;
        out["drift"] = drift_info;
        if (target > 0.0) {
            out["target"] = {{"accuracy_rad", target},
                             {"max_epsilon", max_epsilon_for_accuracy(target, lock)},
                             {"min_count_rate_hz", min_count_rate_linear(target, lock, d)},
                             {"feasible", true}};
        }
    } else if (drift_kind == "asd") {
        if (asd_file.empty()) throw ConfigError("plan: --asd-file required for asd drift");
        const NoiseSpectrum spec = load_asd_csv(asd_file);
        opt = minimize_total_sigma(spec, lock, f_c);
        out["drift"] = {{"kind", "asd"}, {"file", asd_file}};
        if (target > 0.0) {
            // Bisection on the count rate; sigma_min decreases with f_c.
            double lo = 1e-3, hi = 1e12;
            const bool feasible = minimize_total_sigma(spec, lock, hi, 1e-8, 1e-1, 1e-4).sigma_min <= target;
            json tgt = {{"accuracy_rad", target},
                        {"max_epsilon", max_epsilon_for_accuracy(target, lock)},
                        {"feasible", feasible}};
            if (feasible) {
                for (int i = 0; i < 60; ++i) {
                    const double mid = std::sqrt(lo * hi);
                    if (minimize_total_sigma(spec, lock, mid, 1e-8, 1e-1, 1e-4).sigma_min <= target)
                        hi = mid;
                    else
                        lo = mid;
                    if (hi / lo < 1.01) break;
                }
                tgt["min_count_rate_hz"] = hi;
            }
            out["target"] = tgt;
        }
    } else {
        throw ConfigError("--drift must be wiener, linear, doppler or asd");
    }

    out["epsilon_opt"] = opt.epsilon_opt;
    out["sigma_min_rad"] = opt.sigma_min;
    {
        const OuParams p = ou_params(opt.epsilon_opt, lock, f_c);
        out["f_lock_hz"] = p.f_lock;
        out["tau_s"] = p.tau;
    }
    if (eval_epsilon > 0.0) {
        const double eps = lock.slope > 0.0 ? -eval_epsilon : eval_epsilon;
        const OuParams p = ou_params(eps, lock, f_c);
        out["evaluated"] = {{"epsilon", eps},
                            {"f_lock_hz", p.f_lock},
                            {"tau_s", p.tau},
                            {"sigma_stat_rad", p.sigma_stat}};
    }

    atomic_write(out_path(c, "plan.json"), out.dump(2) + "\n", c.force);
    write_manifest(c, settings, started, {"plan.json"});
    std::cout << "epsilon_opt=" << fmt(opt.epsilon_opt) << " sigma_min_rad=" << fmt(opt.sigma_min)
              << "\n";
    return kExitOk;
}

int cmd_analyze(const Common& c, const std::string& input, const std::string& long_input,
                bool use_command_column, int n_segments, int points_per_decade,
                bool second_difference) {
    const std::string started = utc_now();
    const Settings settings = make_settings(c);

    PhaseTrace trace;
    json extra;
    if (is_timestamp_file(input)) {
        const auto stream = load_timestamps_csv(input);
        if (stream.empty()) throw ConfigError(input + ": timestamp file has no rows");
        SimConfig cfg = settings.build_sim_config();
        cfg.record = RecordMode::FullTrace;
        const ReplayResult rep = replay(stream, cfg);
        trace.samples = rep.command_grid;
        trace.f_s = rep.grid_fs;
        extra["replay"] = {{"n_events", rep.n_events},
                           {"clicks_ch0", rep.clicks_ch0},
                           {"clicks_ch1", rep.clicks_ch1},
                           {"click_ratio", rep.click_ratio},
                           {"total_correction_rad", rep.total_correction},
                           {"step_mean_rad", rep.step_mean},
                           {"step_variance_rad2", rep.step_variance},
                           {"mean_feedback_lag_s", rep.mean_feedback_lag_s}};
    } else {
        trace = load_trace_csv(input, use_command_column).trace;
    }
    try {
        trace.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(input + std::string(": ") + ex.what());
    }

    std::vector<std::string> outputs;

    const DeviationKind dev_kind =
        second_difference ? DeviationKind::SecondDifference : DeviationKind::FirstDifference;
    const auto taus = log_spaced_taus(trace, points_per_decade);
    if (taus.empty()) throw ConfigError("trace too short for deviation analysis");
    auto dev = increment_deviation(trace, taus, dev_kind);
    if (!long_input.empty()) {
        // Two-section recording: a slow long-span trace carries the lags at
        // and beyond the 1 s crossover, the primary trace everything below.
        const PhaseTrace slow = load_trace_csv(long_input, use_command_column).trace;
        std::vector<double> long_taus;
        for (double tau : log_spaced_taus(slow, points_per_decade))
            if (tau >= 1.0) long_taus.push_back(tau);
        if (long_taus.empty()) throw ConfigError(long_input + ": no lags at or above 1 s");
        std::erase_if(dev, [](const DeviationPoint& p) { return p.tau >= 1.0; });
        for (const auto& p : increment_deviation(slow, long_taus, dev_kind)) dev.push_back(p);
    }
    if (c.format == "json") {
        json arr = json::array();
        for (const auto& p : dev)
            arr.push_back({{"tau_s", p.tau}, {"deviation_rad", p.deviation}, {"n_pairs", p.n_pairs}});
        atomic_write(out_path(c, "deviation.json"), arr.dump(2) + "\n", c.force);
        outputs.push_back("deviation.json");
    } else {
        std::string out = "# manifest: " + manifest_filename() + "\n";
        out += "tau_s,deviation_rad,n_pairs\n";
        for (const auto& p : dev)
            out += fmt(p.tau) + "," + fmt(p.deviation) + "," + std::to_string(p.n_pairs) + "\n";
        atomic_write(out_path(c, "deviation.csv"), out, c.force);
        outputs.push_back("deviation.csv");
    }

    const NoiseSpectrum spec = psd_estimate(trace, n_segments);
    if (c.format == "json") {
        json arr = json::array();
        for (std::size_t i = 0; i < spec.frequency.size(); ++i)
            arr.push_back({{"freq_hz", spec.frequency[i]}, {"asd_rad_per_sqrthz", spec.asd[i]}});
        atomic_write(out_path(c, "psd.json"), arr.dump(2) + "\n", c.force);
        outputs.push_back("psd.json");
    } else {
        std::string out = "# manifest: " + manifest_filename() + "\n";
        out += "freq_hz,asd_rad_per_sqrthz\n";
        for (std::size_t i = 0; i < spec.frequency.size(); ++i)
            out += fmt(spec.frequency[i]) + "," + fmt(spec.asd[i]) + "\n";
        atomic_write(out_path(c, "psd.csv"), out, c.force);
        outputs.push_back("psd.csv");
    }

    json fit_json;
    fit_json["schema_version"] = kSchemaVersion;
    fit_json["manifest"] = manifest_filename();
    try {
        const OuFit fit = ou_fit(trace);
        fit_json["status"] = fit.out_of_band ? "out-of-band" : "ok";
        fit_json["theta_hat_per_s"] = std::isfinite(fit.theta_hat) ? json(fit.theta_hat) : json("inf");
        fit_json["sigma_stat_hat_rad"] = fit.sigma_stat_hat;
        fit_json["lag1"] = fit.lag1;
    } catch (const std::runtime_error& ex) {
        fit_json["status"] = "unstable-fit";
        fit_json["message"] = ex.what();
    }
    {
        // Lags near span/2 average too few independent increments to classify
        // a regime; fit the slope over the well-averaged part only.
        const double tau_fit_max = trace.span() / 20.0;
        std::vector<double> xs, ys;
        for (const auto& p : dev) {
            if (p.deviation > 0.0 && p.tau <= tau_fit_max) {
                xs.push_back(p.tau);
                ys.push_back(p.deviation);
            }
        }
        if (xs.size() >= 2) {
            fit_json["deviation_loglog_slope"] = loglog_slope(xs, ys);
            fit_json["deviation_slope_tau_max_s"] = xs.back();
        }
    }
    if (!extra.is_null()) fit_json.update(extra);
    atomic_write(out_path(c, "oufit.json"), fit_json.dump(2) + "\n", c.force);
    outputs.push_back("oufit.json");

    write_manifest(c, settings, started, outputs);
    std::cout << "analyzed " << trace.samples.size() << " samples at f_s=" << fmt(trace.f_s)
              << " Hz\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo simulator and analytic toolkit for single-photon "
                 "interferometer phase locking"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    Common c_sim, c_sweep, c_plan, c_analyze;

    auto* sim_cmd = app.add_subcommand("simulate", "run one locking simulation");
    add_common(sim_cmd, c_sim);
    std::optional<double> opt_duration, opt_epsilon, opt_raw_eps, opt_initial, opt_sample_rate;
    bool flag_trace = false, flag_clicks = false;
    sim_cmd->add_option("--duration", opt_duration, "run length in seconds");
    sim_cmd->add_option("--epsilon", opt_epsilon, "step magnitude |epsilon| (sign from the slope)");
    sim_cmd->add_option("--raw-epsilon", opt_raw_eps, "signed epsilon, bypasses the sign convention");
    sim_cmd->add_option("--initial-error", opt_initial, "initial phase error in rad");
    sim_cmd->add_option("--sample-rate", opt_sample_rate, "trace sample rate in Hz");
    sim_cmd->add_flag("--trace", flag_trace, "record and write the phase trace");
    sim_cmd->add_flag("--export-clicks", flag_clicks, "write per-click timestamps (t_ns,channel)");

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep epsilon or count rate");
    add_common(sweep_cmd, c_sweep);
    std::string sweep_axis = "epsilon", sweep_values, sweep_logrange, sweep_eps_mode = "fixed";
    int sweep_replicates = 1;
    std::optional<double> sweep_duration, sweep_epsilon;
    sweep_cmd->add_option("--axis", sweep_axis, "epsilon or countrate");
    sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values");
    sweep_cmd->add_option("--log-range", sweep_logrange, "LO:HI:N log-spaced axis values");
    sweep_cmd->add_option("--replicates", sweep_replicates, "independent runs per value");
    sweep_cmd->add_option("--epsilon-mode", sweep_eps_mode,
                          "fixed, wiener-opt or linear-opt (countrate axis)");
    sweep_cmd->add_option("--duration", sweep_duration, "run length per cell in seconds");
    sweep_cmd->add_option("--epsilon", sweep_epsilon, "|epsilon| for countrate sweeps");

    auto* plan_cmd = app.add_subcommand("plan", "optimal step size for a drift model");
    add_common(plan_cmd, c_plan);
    std::string plan_drift = "wiener", plan_asd_file;
    double plan_wiener_d = 0.0, plan_linear_d = 0.0, plan_fc = 0.0, plan_target = 0.0,
           plan_eval_eps = 0.0;
    plan_cmd->add_option("--drift", plan_drift, "wiener, linear, doppler or asd");
    plan_cmd->add_option("--wiener-d", plan_wiener_d, "diffusion constant in rad^2/s");
    plan_cmd->add_option("--linear-d", plan_linear_d, "drift rate in rad/s");
    plan_cmd->add_option("--asd-file", plan_asd_file, "one-sided ASD CSV");
    plan_cmd->add_option("--f-c", plan_fc, "count rate in Hz (default: detector config)");
    plan_cmd->add_option("--target", plan_target, "accuracy target in rad");
    plan_cmd->add_option("--epsilon", plan_eval_eps, "also evaluate at this |epsilon|");

    auto* analyze_cmd = app.add_subcommand("analyze", "deviation, PSD and OU fit of a trace");
    add_common(analyze_cmd, c_analyze);
    std::string analyze_input, analyze_long;
    bool analyze_command_col = false, analyze_second = false;
    int analyze_segments = 16, analyze_ppd = 10;
    analyze_cmd->add_option("--input", analyze_input, "trace CSV or timestamp CSV")->required();
    analyze_cmd->add_option("--long-input", analyze_long,
                            "slow-sampled long-span trace; deviations at tau >= 1 s come from it");
    analyze_cmd->add_flag("--command-column", analyze_command_col, "analyze the command column");
    analyze_cmd->add_flag("--second-difference", analyze_second,
                          "second-difference deviation (nulls linear drift)");
    analyze_cmd->add_option("--n-segments", analyze_segments, "Welch segments");
    analyze_cmd->add_option("--points-per-decade", analyze_ppd, "deviation lags per decade");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (sim_cmd->parsed()) {
            c_sim.command_line = command_line;
            if (opt_duration) c_sim.sets.push_back("duration_s=" + fmt(*opt_duration));
            if (opt_epsilon) c_sim.sets.push_back("epsilon=" + fmt(*opt_epsilon));
            if (opt_raw_eps) c_sim.sets.push_back("raw_epsilon=" + fmt(*opt_raw_eps));
            if (opt_initial) c_sim.sets.push_back("initial_phase_error_rad=" + fmt(*opt_initial));
            if (opt_sample_rate) c_sim.sets.push_back("sample_rate_hz=" + fmt(*opt_sample_rate));
            if (flag_trace) c_sim.sets.push_back("record=trace");
            if (flag_clicks) c_sim.sets.push_back("capture_clicks=true");
            return cmd_simulate(c_sim);
        }
        if (sweep_cmd->parsed()) {
            c_sweep.command_line = command_line;
            if (sweep_duration) c_sweep.sets.push_back("duration_s=" + fmt(*sweep_duration));
            if (sweep_epsilon) c_sweep.sets.push_back("epsilon=" + fmt(*sweep_epsilon));
            return cmd_sweep(c_sweep, sweep_axis, sweep_values, sweep_logrange, sweep_replicates,
                             sweep_eps_mode);
        }
        if (plan_cmd->parsed()) {
            c_plan.command_line = command_line;
            return cmd_plan(c_plan, plan_drift, plan_wiener_d, plan_linear_d, plan_asd_file,
                            plan_fc, plan_target, plan_eval_eps);
        }
        if (analyze_cmd->parsed()) {
            c_analyze.command_line = command_line;
            return cmd_analyze(c_analyze, analyze_input, analyze_long, analyze_command_col,
                               analyze_segments, analyze_ppd, analyze_second);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitConfigError;
    }
    return kExitConfigError;
}
