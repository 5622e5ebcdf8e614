#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebtforge/context_assembler.hpp"
#include "ebtforge/generation_backend.hpp"
#include "ebtforge/oracle_ranker.hpp"
#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/test_runner.hpp"
#include "ebtforge/trace_store.hpp"

namespace ebtforge {

enum class RunnerKind { None, Simulated, Command };
std::string_view to_string(RunnerKind k);
/// Throws UsageError on an unknown name.
RunnerKind runner_kind_from_string(std::string_view name);

struct RunConfig {
    std::optional<std::filesystem::path> repo_path;
    std::optional<std::string> repo_link;
    std::optional<std::string> sha;
    bool pick_best = false;
    std::optional<double> timeout_s;  // machine view time budget
    std::optional<std::filesystem::path> output_file;  // user view, default ./output.java
    std::optional<std::filesystem::path> output_dir;   // machine view, default ./ebtforge-out
    std::optional<std::string> test_name;
    GeneratorConfig generator;
    RunnerKind runner = RunnerKind::None;
    std::filesystem::path runner_manifest;
    bool force = false;  // accept a cache recorded for another commit
    std::optional<std::filesystem::path> report_file;
    bool report_timings = false;
    std::optional<std::filesystem::path> prompt_template;
    std::optional<std::filesystem::path> dump_prompts;  // writes <hash>.prompt.txt per prompt
    std::size_t prompt_budget = kDefaultPromptBudget;
    unsigned workers = 0;  // 0: hardware concurrency
    std::optional<std::filesystem::path> clone_dir;  // where repo_link is cloned

    /// Throws ConfigError: both or neither of repo_path/repo_link, a
    /// non-positive timeout, a simulated runner without a manifest, or an
    /// invalid generator config.
    void validate() const;
};

/// Repository root to analyze. repo_path must be a directory; repo_link is
/// cloned (shallow, at sha when given) into clone_dir or a cache directory.
/// Throws ConfigError.
std::filesystem::path resolve_repo(const RunConfig& config);

std::unique_ptr<TestRunner> make_runner(const RunConfig& config, const std::filesystem::path& repo_root);

/// Scan with the repository's .ebtforge.toml applied.
RepoIndex scan_with_settings(const std::filesystem::path& root);

struct PrepareResult {
    std::filesystem::path repo_root;
    PreparedDb db;
};

/// Runs the preparation phase and writes the cache. Throws ConfigError
/// without a runner and PreparationError when the run fails.
PrepareResult run_prepare(const RunConfig& config);

struct UserViewArgs {
    std::string mut_file_path;
    int mut_line = 0;
    std::string throw_file_path;
    int throw_line = 0;
    std::optional<std::string> test_context_path;
};

enum class TraceSource { Recorded, Synthesized, Static };
std::string_view to_string(TraceSource s);

struct UserViewResult {
    Candidate chosen;
    std::optional<Verdict> verdict;  // set when candidates were evaluated
    bool best_effort = false;
    std::filesystem::path output;
    TraceSource trace_source = TraceSource::Recorded;
    StackTrace trace;
    std::string guard;
    DestTestFile dest;
    std::size_t prompts = 0;
    std::vector<std::string> warnings;
};

/// Developer-oriented generation for one MUT and throw statement. Throws
/// NotFoundError for unresolvable locations, NoTraceError when no path
/// links MUT and throw, BackendError on generation failure.
UserViewResult run_user_view(const RunConfig& config, const UserViewArgs& args);

struct MachineViewResult {
    Report report;
    std::filesystem::path output_dir;
    bool backend_failed = false;  // some target failed in the backend
};

/// One test per public-method throw statement within the time budget.
/// Targets not started before the deadline are reported as skipped.
MachineViewResult run_machine_view(const RunConfig& config);

/// File name used for a target's generated test class, without ".java".
std::string machine_test_class_name(const ThrowTarget& target);

/// Splits `total` samples across `prompts` prompts, earlier prompts first.
std::vector<int> distribute_samples(int total, std::size_t prompts);

}  // namespace ebtforge
