#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ebtforge::detail {

struct ProcessResult {
    int exit_code = -1;  // 128 + signal when killed
    std::string out;
    std::string err;
    bool timed_out = false;
};

using EnvVars = std::vector<std::pair<std::string, std::string>>;

/// Runs argv[0] (PATH lookup) in `cwd` with `env` added to the inherited
/// environment. A zero timeout means no limit; on expiry the whole process
/// group is killed. Throws RunnerError when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
                          const EnvVars& env = {},
                          std::chrono::milliseconds timeout = std::chrono::milliseconds{0});

inline ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                               const EnvVars& env = {},
                               std::chrono::milliseconds timeout = std::chrono::milliseconds{0}) {
    return run_process({"/bin/sh", "-c", command}, cwd, env, timeout);
}

}  // namespace ebtforge::detail
