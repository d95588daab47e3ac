#include "cli_util.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "phaselock/version.hpp"

namespace phaselock::cli {

namespace fs = std::filesystem;

Settings::Settings() {
    values_ = {
        {"fringe.kind", "pulse_pair"},
        {"fringe.visibility", "0.35355339059327373"},
        {"fringe.phase_offset", "0"},
        {"lock.phi0", "0"},
        {"lock.r0", ""},          // optional: overrides phi0 by solving the fringe
        {"lock.slope_sign", "+"},  // branch when solving for r0
        {"det.f_signal_hz", "200000"},
        {"det.f_dark_ch0_hz", "0"},
        {"det.f_dark_ch1_hz", "0"},
        {"drift.wiener_d_rad2_per_s", "0"},
        {"drift.linear_d_rad_per_s", "0"},
        {"drift.asd_file", ""},
        {"drift.asd_sample_rate_hz", "2000"},
        {"controller.variant", "immediate"},
        {"controller.averaging_n", "10"},
        {"controller.pi_kp", "0.5"},
        {"controller.pi_ki", "1"},
        {"controller.pi_window", "64"},
        {"actuator.enabled", "false"},
        {"actuator.dac_bits", "16"},
        {"actuator.range_rad", "21.362830044410597"},  // 3.4 wavelengths
        {"actuator.loop_delay_s", "2e-6"},
        {"actuator.recenter_on_saturation", "false"},
        {"doppler.altitude_m", "500000"},
        {"doppler.orbital_speed_mps", "7600"},
        {"doppler.wavelength_m", "1.55e-6"},
        {"doppler.mzi_delay_s", "1.7e-10"},
        {"epsilon", "1e-5"},  // magnitude; sign applied from the lock slope
        {"raw_epsilon", ""},  // signed value, bypasses the sign convention
        {"duration_s", "100"},
        {"initial_phase_error_rad", "0"},
        {"seed", "1"},
        {"record", "summary"},
        {"sample_rate_hz", "1000"},
        {"capture_clicks", "false"},
        {"allow_unstable", "false"},
    };
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void Settings::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void Settings::apply_override(const std::string& key_eq_value) {
    const auto eq = key_eq_value.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + key_eq_value);
    set(trim(key_eq_value.substr(0, eq)), trim(key_eq_value.substr(eq + 1)));
}

void Settings::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key: " + key);
    it->second = value;
}

const std::string& Settings::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown configuration key: " + key);
    return it->second;
}

double Settings::get_double(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError("key " + key + ": not a number: '" + s + "'");
    return v;
}

std::uint64_t Settings::get_u64(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError("key " + key + ": not an unsigned integer: '" + s + "'");
    return v;
}

int Settings::get_int(const std::string& key) const {
    const double v = get_double(key);
    if (v != std::floor(v)) throw ConfigError("key " + key + ": not an integer");
    return static_cast<int>(v);
}

bool Settings::get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no" || s.empty()) return false;
    throw ConfigError("key " + key + ": not a boolean: '" + s + "'");
}

namespace {

// Solves the fringe for the phase whose click ratio is r0, picking the branch
// with the requested slope sign.
double solve_phi0(const FringeModel& fringe, double r0, bool positive_slope) {
    if (fringe.kind == FringeKind::PulsePairPattern) {
        const double s = (r0 - 0.5) * 8.0 / std::numbers::sqrt2;
        if (std::abs(s) > 1.0) throw ConfigError("lock.r0 unreachable on the pulse-pair fringe");
        const double base = std::asin(s);
        const double phi_pos = base - std::numbers::pi / 4.0;
        const double phi_neg = std::numbers::pi - base - std::numbers::pi / 4.0;
        return positive_slope ? phi_pos : phi_neg;
    }
    if (fringe.visibility == 0.0) throw ConfigError("lock.r0: zero-visibility fringe has no slope");
    const double c = (2.0 * r0 - 1.0) / fringe.visibility;
    if (std::abs(c) > 1.0) throw ConfigError("lock.r0 unreachable at this visibility");
    const double a = std::acos(c);  // in [0, pi]; slope there is negative
    return fringe.phase_offset + (positive_slope ? -a : a);
}

}  // namespace

SimConfig Settings::build_sim_config() const {
    SimConfig cfg;

    const std::string kind = get("fringe.kind");
    if (kind == "pulse_pair") {
        cfg.fringe = make_pulse_pair_fringe();
        cfg.fringe.phase_offset = get_double("fringe.phase_offset");
    } else if (kind == "simple") {
        cfg.fringe = make_simple_fringe(get_double("fringe.visibility"),
                                        get_double("fringe.phase_offset"));
    } else {
        throw ConfigError("fringe.kind must be pulse_pair or simple");
    }

    double phi0 = get_double("lock.phi0");
    if (!get("lock.r0").empty()) {
        const std::string sign = get("lock.slope_sign");
        if (sign != "+" && sign != "-") throw ConfigError("lock.slope_sign must be + or -");
        phi0 = solve_phi0(cfg.fringe, get_double("lock.r0"), sign == "+");
    }
    cfg.lock = lock_point_at(cfg.fringe, phi0);
    if (cfg.lock.slope == 0.0) throw ConfigError("lock point has zero slope; not lockable");

    cfg.det.f_signal = get_double("det.f_signal_hz");
    cfg.det.f_dark_ch0 = get_double("det.f_dark_ch0_hz");
    cfg.det.f_dark_ch1 = get_double("det.f_dark_ch1_hz");

    std::vector<DriftModel> members;
    if (get_double("drift.wiener_d_rad2_per_s") > 0.0)
        members.push_back(DriftModel::wiener(get_double("drift.wiener_d_rad2_per_s")));
    if (get_double("drift.linear_d_rad_per_s") != 0.0)
        members.push_back(DriftModel::linear(get_double("drift.linear_d_rad_per_s")));
    if (!get("drift.asd_file").empty())
        members.push_back(DriftModel::from_asd(load_asd_csv(get("drift.asd_file")),
                                               get_double("drift.asd_sample_rate_hz")));
    cfg.drift = members.empty() ? DriftModel::none() : DriftModel::composite(members);

    const std::string variant = get("controller.variant");
    if (variant == "immediate") {
        cfg.controller.variant = ControllerVariant::Immediate;
    } else if (variant == "averaging") {
        cfg.controller.variant = ControllerVariant::AveragingN;
        cfg.controller.averaging_n = get_int("controller.averaging_n");
    } else if (variant == "pi") {
        cfg.controller.variant = ControllerVariant::PI;
        cfg.controller.pi_kp = get_double("controller.pi_kp");
        cfg.controller.pi_ki = get_double("controller.pi_ki");
        cfg.controller.pi_window = get_int("controller.pi_window");
    } else {
        throw ConfigError("controller.variant must be immediate, averaging or pi");
    }

    if (get_bool("actuator.enabled")) {
        ActuatorModel act;
        act.dac_bits = get_int("actuator.dac_bits");
        act.range_rad = get_double("actuator.range_rad");
        act.loop_delay_s = get_double("actuator.loop_delay_s");
        act.recenter_on_saturation = get_bool("actuator.recenter_on_saturation");
        cfg.actuator = act;
    }

    if (!get("raw_epsilon").empty()) {
        cfg.epsilon = get_double("raw_epsilon");
    } else {
        const double mag = std::abs(get_double("epsilon"));
        cfg.epsilon = cfg.lock.slope > 0.0 ? -mag : mag;
    }

    cfg.duration_s = get_double("duration_s");
    cfg.initial_phase_error_rad = get_double("initial_phase_error_rad");
    cfg.seed = get_u64("seed");

    const std::string record = get("record");
    if (record == "summary") {
        cfg.record = RecordMode::SummaryOnly;
    } else if (record == "trace") {
        cfg.record = RecordMode::FullTrace;
        cfg.sample_rate_hz = get_double("sample_rate_hz");
    } else {
        throw ConfigError("record must be summary or trace");
    }
    cfg.capture_clicks = get_bool("capture_clicks");
    cfg.allow_unstable = get_bool("allow_unstable");

    try {
        cfg.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    return cfg;
}

json Settings::echo() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

void atomic_write(const std::string& path, const std::string& content, bool force) {
    if (!force && fs::exists(path))
        throw ConfigError("refusing to overwrite existing file (use --force): " + path);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write: " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

std::string manifest_filename() { return "manifest.json"; }

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json make_manifest(const std::string& command_line, const Settings& settings,
                   const std::string& started, const std::string& finished,
                   const std::vector<std::string>& outputs) {
    json m;
    m["schema_version"] = kSchemaVersion;
    m["tool"] = "phaselock";
    m["tool_version"] = kToolVersion;
    m["command_line"] = command_line;
    m["config"] = settings.echo();
    m["seed"] = settings.get("seed");
    m["started_utc"] = started;
    m["finished_utc"] = finished;
    m["outputs"] = outputs;
    return m;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string trace_csv(const SimResult& result) {
    std::string out;
    out.reserve(result.trace_phase.size() * 40 + 64);
    out += "# manifest: " + manifest_filename() + "\n";
    out += "t_s,phase_error_rad,command_rad\n";
    char buf[128];
    for (std::size_t i = 0; i < result.trace_phase.size(); ++i) {
        const double t = static_cast<double>(i) / result.trace_fs;
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", t, result.trace_phase[i],
                      result.trace_command[i]);
        out += buf;
    }
    return out;
}

std::string clicks_csv(const std::vector<ClickEvent>& clicks) {
    std::string out = "# manifest: " + manifest_filename() + "\n";
    out += "t_ns,channel\n";
    char buf[64];
    for (const auto& c : clicks) {
        std::snprintf(buf, sizeof buf, "%lld,%d\n",
                      static_cast<long long>(std::llround(c.t * 1e9)), static_cast<int>(c.channel));
        out += buf;
    }
    return out;
}

std::string timestamps_csv(const std::vector<ClickEvent>& clicks) { return clicks_csv(clicks); }

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis_name) {
    std::string out;
    out += "# manifest: " + manifest_filename() + "\n";
    out += axis_name + ",sigma_phi_mean_rad,sigma_phi_stderr_rad,mean_offset_rad,replicates_ok,status\n";
    for (const auto& r : rows) {
        const char* status = !r.error.empty() ? "failed" : (r.nonconverged > 0 ? "nonconverged" : "ok");
        out += fmt(r.value) + "," + fmt(r.sigma_mean) + "," + fmt(r.sigma_stderr) + "," +
               fmt(r.mean_offset) + "," + std::to_string(r.replicates_ok) + "," + status + "\n";
    }
    return out;
}

json sweep_json(const std::vector<SweepRow>& rows, const std::string& axis_name) {
    json arr = json::array();
    for (const auto& r : rows) {
        json row;
        row[axis_name] = r.value;
        row["sigma_phi_mean_rad"] = r.sigma_mean;
        row["sigma_phi_stderr_rad"] = r.sigma_stderr;
        row["mean_offset_rad"] = r.mean_offset;
        row["replicates_ok"] = r.replicates_ok;
        row["nonconverged"] = r.nonconverged;
        row["status"] = r.error.empty() ? (r.nonconverged > 0 ? "nonconverged" : "ok") : r.error;
        arr.push_back(row);
    }
    return arr;
}

json result_json(const SimResult& r) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["n_events"] = r.n_events;
    j["clicks_ch0"] = r.clicks_ch0;
    j["clicks_ch1"] = r.clicks_ch1;
    j["dark_events"] = r.dark_events;
    j["burn_in_s"] = r.burn_in_s;
    j["steady_events"] = r.steady_events;
    j["stats_valid"] = r.stats_valid;
    j["sigma_phi_rad"] = r.sigma_phi;
    j["mean_offset_rad"] = r.mean_offset;
    j["std_phi_rad"] = r.std_phi;
    j["ratio_implied_offset_rad"] = r.ratio_implied_offset;
    j["nonconvergence"] = r.nonconvergence;
    j["saturation_events"] = r.saturation_events;
    j["recenter_events"] = r.recenter_events;
    j["wallclock_s"] = r.wallclock_s;
    j["events_per_second"] = r.events_per_second;
    return j;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& what) {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

bool is_timestamp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open input file: " + path);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        return t.rfind("t_ns", 0) == 0;
    }
    return false;
}

LoadedTrace load_trace_csv(const std::string& path, bool use_command_column) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file: " + path);
    LoadedTrace loaded;
    std::vector<double> times;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t.rfind("t_s,", 0) != 0) parse_fail(path, line_no, "expected header t_s,phase_rad[,...]");
            loaded.had_command_column = t.find(",command_rad") != std::string::npos;
            header_seen = true;
            continue;
        }
        double tv = 0, phase = 0, cmd = 0;
        const int got = std::sscanf(t.c_str(), "%lf,%lf,%lf", &tv, &phase, &cmd);
        if (got < 2) parse_fail(path, line_no, "malformed trace row: '" + t + "'");
        if (use_command_column && got < 3)
            parse_fail(path, line_no, "no command column in this trace");
        times.push_back(tv);
        loaded.trace.samples.push_back(use_command_column ? cmd : phase);
    }
    if (times.size() < 2) throw ConfigError(path + ": trace needs at least 2 samples");
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (!(dt > 0.0)) throw ConfigError(path + ": time column must increase");
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double expect = times.front() + dt * static_cast<double>(i);
        if (std::abs(times[i] - expect) > 1e-6 * dt + 1e-12)
            throw ConfigError(path + ": non-uniform sampling near row " + std::to_string(i + 1));
    }
    loaded.trace.f_s = 1.0 / dt;
    loaded.trace.t0 = times.front();
    return loaded;
}

std::vector<TimedClick> load_timestamps_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open timestamp file: " + path);
    std::vector<TimedClick> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    long long prev = -1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t.rfind("t_ns,channel", 0) != 0) parse_fail(path, line_no, "expected header t_ns,channel");
            header_seen = true;
            continue;
        }
        long long ns = 0;
        int ch = 0;
        char extra = 0;
        if (std::sscanf(t.c_str(), "%lld,%d %c", &ns, &ch, &extra) != 2)
            parse_fail(path, line_no, "malformed timestamp row: '" + t + "'");
        if (ch != 0 && ch != 1) parse_fail(path, line_no, "channel must be 0 or 1");
        if (ns < prev) parse_fail(path, line_no, "timestamps must be non-decreasing");
        prev = ns;
        out.push_back({static_cast<double>(ns) * 1e-9, ch});
    }
    if (!header_seen) throw ConfigError(path + ": missing header t_ns,channel");
    return out;
}

}  // namespace phaselock::cli
