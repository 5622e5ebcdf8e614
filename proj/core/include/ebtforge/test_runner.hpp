#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/trace_store.hpp"

namespace ebtforge {

struct RunnerCapabilities {
    bool compile = false;
    bool run = false;
    bool markers = false;
    bool needs_checkout = false;  // works on a full copy of the repository
};

struct PrepareRequest {
    std::filesystem::path repo_root;
    std::vector<InstrumentPoint> plan;
    std::vector<std::string> tests;  // ids of the non-EBTs to execute
    std::filesystem::path trace_log;      // runner appends trace-log records here
    std::filesystem::path coverage_file;  // runner writes {test: [[class, method], ...]}
};

struct PrepareOutcome {
    int exit_code = 0;
    std::string diagnostics;
};

struct EvalRequest {
    std::filesystem::path workdir;  // scratch directory owned by this evaluation
    std::string test_file;          // relative to workdir
    std::string test_class;         // qualified
    std::string test_method;
    std::string candidate_source;   // the inserted test method
};

struct EvalOutcome {
    bool compiled = false;
    bool passed = false;
    std::vector<std::string> markers;
    std::string diagnostics;
};

/// Compiles and runs tests. Implementations must be deterministic for the
/// same file-system state and must be safe to call concurrently.
class TestRunner {
public:
    virtual ~TestRunner() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual RunnerCapabilities capabilities() const = 0;
    /// Throws RunnerError on infrastructure failure.
    virtual PrepareOutcome prepare(const PrepareRequest& request) = 0;
    /// Throws RunnerError on infrastructure failure. A compile failure is a
    /// normal outcome.
    virtual EvalOutcome evaluate(const EvalRequest& request) = 0;
};

/// Replays a JSON manifest instead of building anything:
///   {"prepare": {"exit_code": 0, "diagnostics": "",
///                "tests": {id: {"traces": [{"frames": [...], "marker": "f:l"}],
///                               "covers": [[class, method], ...]}}},
///    "candidates": {hash: {"compiles", "runs", "markers": [...], "diagnostics"}}}
/// Candidates are keyed by the prompt-hash of their source; unknown hashes
/// do not compile.
class SimulatedRunner : public TestRunner {
public:
    explicit SimulatedRunner(const std::string& manifest_json);
    static std::unique_ptr<SimulatedRunner> from_file(const std::filesystem::path& path);
    ~SimulatedRunner() override;

    [[nodiscard]] std::string name() const override { return "simulated"; }
    [[nodiscard]] RunnerCapabilities capabilities() const override { return {true, true, true, false}; }
    PrepareOutcome prepare(const PrepareRequest& request) override;
    EvalOutcome evaluate(const EvalRequest& request) override;

    /// Test ids executed by prepare(), in order.
    [[nodiscard]] std::vector<std::string> call_log() const;

private:
    struct Manifest;
    std::unique_ptr<Manifest> manifest_;
    mutable std::mutex mu_;
    std::vector<std::string> call_log_;
};

/// Shell command templates. Placeholders: {class}, {method}, {tests}.
struct RunnerCommands {
    std::string prepare = "mvn -q test -Dtest={tests}";
    std::string compile = "mvn -q test-compile";
    std::string test = "mvn -q test -Dtest={class}#{method}";
    std::chrono::milliseconds timeout{std::chrono::minutes(10)};
};

/// Reads compile_command / test_command / prepare_command /
/// command_timeout_ms from project settings.
RunnerCommands commands_from_settings(const ProjectSettings& settings);

inline constexpr std::string_view kMarkerPrefix = "EBTFORGE-MARKER ";

/// Runs the project's build tool through /bin/sh. Preparation passes the
/// plan, trace-log and coverage paths in EBTFORGE_PLAN, EBTFORGE_TRACE_LOG
/// and EBTFORGE_COVERAGE; markers are stdout lines prefixed with
/// kMarkerPrefix.
class CommandRunner : public TestRunner {
public:
    explicit CommandRunner(RunnerCommands commands) : commands_(std::move(commands)) {}

    [[nodiscard]] std::string name() const override { return "command"; }
    [[nodiscard]] RunnerCapabilities capabilities() const override { return {true, true, true, true}; }
    PrepareOutcome prepare(const PrepareRequest& request) override;
    EvalOutcome evaluate(const EvalRequest& request) override;

private:
    RunnerCommands commands_;
};

/// Marker lines from runner output, in order of appearance.
std::vector<std::string> parse_markers(std::string_view output);

}  // namespace ebtforge
