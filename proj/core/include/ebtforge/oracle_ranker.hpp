#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ebtforge/context_assembler.hpp"
#include "ebtforge/generation_backend.hpp"
#include "ebtforge/source_model.hpp"
#include "ebtforge/test_runner.hpp"

namespace ebtforge {

/// Ascending: each level implies every level below it.
enum class VerdictLevel { ParsesOnly = 0, Compiles = 1, Runs = 2, CoversTarget = 3 };
std::string_view to_string(VerdictLevel l);
std::optional<VerdictLevel> verdict_level_from_string(std::string_view s);

struct Verdict {
    VerdictLevel level = VerdictLevel::ParsesOnly;
    std::string diagnostics;
    std::vector<std::string> marker_hits;
};

/// Level implied by a runner outcome. A test that did not pass never counts
/// as covering, and covering needs `target_marker` among the hits.
Verdict verdict_from_outcome(const EvalOutcome& outcome, const std::string& target_marker);

/// Name of the method declared by `test_source`, or empty.
std::string test_method_name(std::string_view test_source);

/// Inserts `method` before the closing brace of the top-level type named
/// `simple_class`, indented one level. Falls back to the last '}' in the
/// file; appends when the file has none.
std::string insert_test_method(std::string_view class_source, std::string_view simple_class, std::string_view method);

struct EvalContext {
    std::filesystem::path repo_root;
    TestRunner* runner = nullptr;
    /// Scratch directories are kept for inspection when set.
    bool keep_scratch = false;
};

/// Runs one candidate in <root>/.ebtforge/scratch/<target-id>/<candidate-id>
/// and removes the directory afterwards. Unextractable candidates stay
/// ParsesOnly without touching the runner. Throws RunnerError on runner
/// infrastructure failure.
Verdict evaluate_candidate(const Candidate& candidate, const ThrowTarget& target, const DestTestFile& dest,
                           const EvalContext& ctx);

struct Selection {
    std::size_t index = 0;     // into the input list
    bool best_effort = false;  // every candidate is ParsesOnly
};

/// Highest level, then lowest candidate id. Throws UsageError when empty.
Selection select_best(const std::vector<std::pair<Candidate, Verdict>>& pairs);

struct TargetResult {
    std::string target_id;
    std::string marker;
    std::string method;  // qualified MUT
    std::string exception_type;
    bool skipped = false;
    std::string skip_reason;
    bool evaluated = false;  // a runner produced the level
    std::optional<int> chosen_candidate;
    VerdictLevel level = VerdictLevel::ParsesOnly;
    bool best_effort = false;
    std::string output_path;
    std::string error;
    double elapsed_ms = 0.0;
};

struct Report {
    static constexpr int kVersion = 1;
    std::vector<TargetResult> rows;
    std::size_t processed = 0;  // rows not skipped
    std::size_t skipped = 0;
    std::size_t compilable = 0;
    std::size_t runnable = 0;
    std::size_t throw_cov = 0;

    /// Percentages over processed targets; 0 when none were processed.
    [[nodiscard]] double compilable_pct() const;
    [[nodiscard]] double runnable_pct() const;
    [[nodiscard]] double throw_cov_pct() const;
};

Report summarize(std::vector<TargetResult> rows);

/// Stable key order. Timings are included only on request so that reports
/// of identical runs compare byte-equal.
std::string report_to_json(const Report& report, bool include_timings = false);
std::string report_to_text(const Report& report, bool include_timings = false);

}  // namespace ebtforge
