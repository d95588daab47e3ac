#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phaselock/sim.hpp"

namespace phaselock::cli {

using nlohmann::json;

// Exit codes shared across subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNonconvergence = 3;

// Thrown for anything that should terminate with exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat dotted-key configuration: file values first, --set overrides on top.
class Settings {
public:
    Settings();  // defaults: the 200 kHz pulse-pair operating point

    void load_file(const std::string& path);
    void apply_override(const std::string& key_eq_value);  // "key=value"

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    int get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    // Builds the simulation config; resolves the lock point from the fringe
    // and applies the sign convention (|epsilon| signed by -sign(slope)
    // unless raw_epsilon is set).
    SimConfig build_sim_config() const;

    json echo() const;  // effective configuration for the manifest

private:
    std::map<std::string, std::string> values_;
};

// Refuses to overwrite unless force; writes via a temp file and rename.
void atomic_write(const std::string& path, const std::string& content, bool force);

std::string manifest_filename();

json make_manifest(const std::string& command_line, const Settings& settings,
                   const std::string& started, const std::string& finished,
                   const std::vector<std::string>& outputs);

std::string utc_now();

// Serialization of results.
std::string trace_csv(const SimResult& result);
std::string clicks_csv(const std::vector<ClickEvent>& clicks);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& axis_name);
json sweep_json(const std::vector<SweepRow>& rows, const std::string& axis_name);
json result_json(const SimResult& result);

// Input parsing; errors carry 1-based line numbers.
struct LoadedTrace {
    PhaseTrace trace;
    bool had_command_column = false;
};
LoadedTrace load_trace_csv(const std::string& path, bool use_command_column);
std::vector<TimedClick> load_timestamps_csv(const std::string& path);
std::string timestamps_csv(const std::vector<ClickEvent>& clicks);

// True when the file's header is the timestamp format `t_ns,channel`.
bool is_timestamp_file(const std::string& path);

// Formats a double with enough digits to round-trip.
std::string fmt(double v);

}  // namespace phaselock::cli
