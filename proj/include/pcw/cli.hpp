#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pcw::cli {

enum class Command { bands, simulate_decay, fit_decay, fit_spectrum, calibrate, extract_beta, reproduce_paper };

const char* to_string(Command c);
std::optional<Command> parse_command(const std::string& name);
std::vector<std::string> command_names();

struct RunConfig {
    Command command = Command::bands;
    std::vector<std::filesystem::path> inputs;
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool plot = false;
    std::optional<std::filesystem::path> geometry;
    std::optional<std::filesystem::path> config;   // JSON object of command options
    std::optional<std::filesystem::path> manifest; // fit-decay batch manifest
    std::optional<std::filesystem::path> edge;     // calibrate: band-edge tuning CSV
    std::string timestamp;                         // empty: current UTC time
    std::vector<std::string> argv;                 // recorded in manifest.json

    void validate() const;
};

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitChecksFailed = 1; // reproduce-paper ran but a target was missed
inline constexpr int kExitUsage = 2;        // bad arguments, unreadable or malformed input
inline constexpr int kExitNumerical = 3;    // a module failed (no guided mode, non-convergence, ...)

struct RunOutcome {
    int exit_code = kExitOk;
    std::filesystem::path run_dir; // <out>/<command>-<timestamp>
    std::vector<std::string> files; // names written inside run_dir
};

// Runs one command. Results go to a fresh directory <out>/<command>-<timestamp>
// together with manifest.json; failures also leave error.json there (when the
// directory could be created) and print the same record to `err`.
RunOutcome run(const RunConfig& config, std::ostream& out, std::ostream& err);

} // namespace pcw::cli
