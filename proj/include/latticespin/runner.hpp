#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace latticespin {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitBlowup = 4;

struct ConfigIssue {
    std::string path; // JSON pointer into the config
    std::string message;
};

/// JSON schema of the experiment config.
const nlohmann::json& config_schema();

/// Schema violations of a parsed config; empty when it conforms.
std::vector<ConfigIssue> check_config(const nlohmann::json& config);

struct RunOptions {
    std::optional<std::filesystem::path> out; // overrides the config's "output"
    std::optional<int> threads;               // overrides the config's "threads"
};

struct RunResult {
    int exit_code = kExitOk;
    std::filesystem::path out_dir;
    nlohmann::json summary;
};

/// Runs one experiment and writes its tables and summary.json into the output directory.
RunResult run_config(const nlohmann::json& config, const RunOptions& options, std::string_view source = {});
RunResult run_config_file(const std::filesystem::path& path, const RunOptions& options);

std::string library_version();

} // namespace latticespin
