#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace corrdef::cli {

enum ExitCode : int {
    kSuccess = 0,
    kConfigError = 2,
    kInfeasibleInput = 3,
    kNumericFailure = 4,
};

/// Command-line overrides shared by all commands.
struct Invocation {
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    bool fit = false;                                        // model
    std::optional<std::filesystem::path> independent_alpha;  // dynamics
    std::optional<double> independent_horizon;               // dynamics
};

int run_model(const Invocation& inv, std::ostream& log);
int run_dynamics(const Invocation& inv, std::ostream& log);
int run_search(const Invocation& inv, std::ostream& log);

/// Parses argv and dispatches; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace corrdef::cli
