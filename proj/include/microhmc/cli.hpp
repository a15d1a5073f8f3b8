#ifndef MICROHMC_CLI_HPP
#define MICROHMC_CLI_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "microhmc/sample.hpp"

namespace microhmc::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAdaptation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitUnreliable = 4;

enum class ModelKind { gauss, cauchy, eight_schools_cp, eight_schools_ncp };

struct RunConfig {
    ModelKind model = ModelKind::gauss;
    std::size_t dim = 100;
    std::optional<std::filesystem::path> data_file;
    std::optional<std::filesystem::path> metric_file;
    SamplerConfig sampler;
    std::filesystem::path output_dir = "output";
    bool report = true;
    bool strict = false;
};

/// Bad command line; carries the exit code and a message naming the token.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
    int exit_code() const noexcept { return kExitUsage; }
};

std::string usage();

/// Parses `<model> [dim=N] sample [key=value ...] [adapt ...] [data file=PATH]
/// [random seed=N] [output dir=PATH] [strict]`. Throws UsageError.
RunConfig parse_args(const std::vector<std::string>& args);

/// Column names of a trace CSV for a model with the given parameter names.
std::vector<std::string> trace_columns(const std::vector<std::string>& parameter_names);

/// CSV text for one chain: header plus one row per draw, 17 significant digits.
std::string format_trace_csv(const ChainTrace& trace, const std::vector<std::string>& parameter_names);

/// Writes format_trace_csv() to `path`; throws std::runtime_error when the
/// file cannot be written.
void emit_trace_csv(const ChainTrace& trace, const std::vector<std::string>& parameter_names,
                    const std::filesystem::path& path);

/// Parsed trace CSV, for round-trip checks and downstream tooling.
struct ParsedTrace {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

ParsedTrace read_trace_csv(const std::filesystem::path& path);

/// Builds the model, runs the chains and writes outputs. Returns a process
/// exit code; diagnostics go to `log`.
int run_command(const RunConfig& cfg, std::ostream& log);

/// Full entry point: parse, run, map failures to exit codes.
int main_with_args(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace microhmc::cli

#endif  // MICROHMC_CLI_HPP
