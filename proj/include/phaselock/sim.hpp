#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phaselock/controller.hpp"
#include "phaselock/drift.hpp"
#include "phaselock/estimators.hpp"
#include "phaselock/fringe.hpp"

namespace phaselock {

enum class RecordMode { SummaryOnly, FullTrace };

struct SimConfig {
    FringeModel fringe = make_pulse_pair_fringe();
    LockPoint lock{0.0, 0.625, 0.125};  // on the signal fringe, must match it at phi0
    DetectorConfig det{};
    DriftModel drift{};
    ControllerConfig controller{};
    std::optional<ActuatorModel> actuator;  // none: ideal, delay-free actuator
    double epsilon = -1e-5;                 // rad, signed
    double duration_s = 100.0;
    double initial_phase_error_rad = 0.0;
    std::uint64_t seed = 1;
    RecordMode record = RecordMode::SummaryOnly;
    double sample_rate_hz = 1000.0;
    bool capture_clicks = false;
    bool allow_unstable = false;  // permit sign(epsilon) == sign(slope)

    void validate() const;  // throws std::invalid_argument

    // Lock point a click counter sees: dark counts shift r0 and dilute the
    // slope. This is what the controller targets and what theta is built from.
    LockPoint effective_lock() const { return apply_darkcounts(lock, det); }
};

struct ClickEvent {
    double t = 0.0;
    std::uint8_t channel = 0;
    double command = 0.0;  // applied command phase just after this click
};

struct SimResult {
    // Uniformly sampled traces (FullTrace mode), value held since last event.
    std::vector<double> trace_phase;    // phi - phi0
    std::vector<double> trace_command;  // accumulated feedback phase
    double trace_fs = 0.0;

    std::uint64_t n_events = 0;
    std::uint64_t clicks_ch0 = 0;
    std::uint64_t clicks_ch1 = 0;
    std::uint64_t dark_events = 0;

    // Steady-state statistics (events after the burn-in of 5 tau).
    double burn_in_s = 0.0;
    std::uint64_t steady_events = 0;
    double sigma_phi = 0.0;             // RMS of phi - phi0
    double mean_offset = 0.0;           // mean of phi - phi0
    double std_phi = 0.0;               // standard deviation about the mean
    double ratio_implied_offset = 0.0;  // (r_hat - r0_eff)/slope_eff
    bool stats_valid = false;
    bool nonconvergence = false;  // |phi - phi0| > pi/2 in > 10 % of steady events

    std::uint64_t saturation_events = 0;
    std::uint64_t recenter_events = 0;
    double wallclock_s = 0.0;
    double events_per_second = 0.0;

    std::vector<ClickEvent> clicks;  // when capture_clicks

    PhaseTrace phase_trace() const { return PhaseTrace{trace_phase, trace_fs, 0.0}; }
    PhaseTrace command_trace() const { return PhaseTrace{trace_command, trace_fs, 0.0}; }
};

// Event-driven Monte Carlo run: Poissonian arrivals at the total detector
// rate, drift integrated between events, Bernoulli channel choice from the
// fringe for signal events, fixed channels for dark events, feedback per
// click. Deterministic given the config (including seed).
SimResult run(const SimConfig& config);

enum class SweepAxis { Epsilon, CountRate };

// How epsilon is set for each sweep cell: fixed from the base config, or
// re-derived per count rate from the drift model's optimum.
enum class EpsilonMode { Fixed, WienerOpt, LinearOpt };

struct SweepRow {
    double value = 0.0;
    double sigma_mean = 0.0;
    double sigma_stderr = 0.0;
    double mean_offset = 0.0;
    int replicates_ok = 0;
    int nonconverged = 0;  // replicates that breached the linear regime
    std::string error;     // empty when the cell succeeded
};

// |values| x replicates independent runs with per-cell seeds derived from the
// base seed. Rows come back in input order; a failed cell is marked, not fatal.
std::vector<SweepRow> sweep(const SimConfig& base, SweepAxis axis,
                            const std::vector<double>& values, int replicates,
                            EpsilonMode mode = EpsilonMode::Fixed, int jobs = 1);

struct TimedClick {
    double t = 0.0;  // s
    int channel = 0;
};

struct ReplayResult {
    std::uint64_t n_events = 0;
    std::uint64_t clicks_ch0 = 0;
    std::uint64_t clicks_ch1 = 0;
    double click_ratio = 0.0;
    std::vector<ClickEvent> commands;   // command value after each click
    double total_correction = 0.0;
    double step_mean = 0.0;             // per-click command delta statistics
    double step_variance = 0.0;
    double mean_feedback_lag_s = 0.0;   // click time -> command application time
    std::vector<double> command_grid;   // resampled at sample_rate_hz
    double grid_fs = 0.0;
};

// Drives the controller with recorded clicks instead of synthetic ones.
// True phase is unknown; the command trace is the reconstruction.
ReplayResult replay(const std::vector<TimedClick>& stream, const SimConfig& config);

}  // namespace phaselock
