#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/source_model.hpp"

namespace ebtforge {

class TestRunner;

inline constexpr int kSchemaVersion = 1;

struct StackFrame {
    std::string class_name;  // qualified, '$' normalized to '.'
    std::string method_name;  // constructors use the simple class name
    std::string file;  // as recorded; often just the basename
    int line = 0;

    /// "method(File.java:line)"
    [[nodiscard]] std::string render() const;
    friend bool operator==(const StackFrame&, const StackFrame&) = default;
};

/// Outermost (entry) frame first, throw-containing frame last.
struct StackTrace {
    std::vector<StackFrame> frames;
    std::string origin_test;
    std::string marker;  // "file:line" of the instrumented throw, when logged

    friend bool operator==(const StackTrace&, const StackTrace&) = default;
};

struct CoverageMap {
    /// test id -> (qualified class, method) pairs invoked during the test
    std::map<std::string, std::set<std::pair<std::string, std::string>>> by_test;

    [[nodiscard]] bool covers(const std::string& test_id, const MethodRef& m) const;
    /// Number of methods of `qualified_class` the test touches.
    [[nodiscard]] std::size_t class_hits(const std::string& test_id, const std::string& qualified_class) const;
    friend bool operator==(const CoverageMap&, const CoverageMap&) = default;
};

struct PreparedDb {
    std::vector<StackTrace> traces;
    CoverageMap coverage;
    std::optional<std::string> created_for_commit;
    int schema_version = kSchemaVersion;
    std::vector<std::string> tests_run;

    friend bool operator==(const PreparedDb&, const PreparedDb&) = default;
};

struct InstrumentPoint {
    std::string file;
    std::string class_name;
    std::string method;
    int throw_line = 0;

    [[nodiscard]] std::string marker() const { return file + ":" + std::to_string(throw_line); }
    friend bool operator==(const InstrumentPoint&, const InstrumentPoint&) = default;
};

/// One point per throw statement in main units, ordered by (file, line).
std::vector<InstrumentPoint> instrumentation_plan(const RepoIndex& index);

/// Executes the index's non-EBTs through `runner`, ingests the emitted
/// traces and coverage, and persists the result under <root>/.ebtforge.
/// Nothing is written when the runner fails.
PreparedDb run_preparation(const RepoIndex& index, TestRunner& runner);

struct TraceLog {
    std::vector<StackTrace> traces;
    std::vector<std::string> warnings;  // one per skipped record
};

/// Reads line-delimited JSON records
///   {"test": id, "frames": [{"class","method","file","line"}], "marker": "file:line"}
/// Throws Error when the file cannot be read.
TraceLog ingest_trace_log(const std::filesystem::path& path);

/// Serializes one trace as a trace-log record (no trailing newline).
std::string trace_log_record(const StackTrace& trace);

/// True when the frame names `m`: same method (constructors may appear as
/// "<init>"), same class (simple name suffices), and, when the frame's file
/// matches, a line inside the method's span.
bool frame_matches(const StackFrame& frame, const MethodRef& m);

/// The shortest recorded trace entering through `mut` and ending in the
/// target's method, sliced to start at the last `mut` frame. Ties go to
/// the lexicographically smallest origin test. When `mut` is the target's
/// method a single frame is synthesized.
std::optional<StackTrace> find_trace(const PreparedDb& db, const MethodRef& mut, const ThrowTarget& target);

/// Name-based call paths from `mut` to the target's method using at most
/// `max_depth` call edges. Frames carry call-site lines, the last carries
/// the throw line. No (class, method) repeats within a path. Sorted by
/// length, then by rendered frames.
std::vector<StackTrace> static_call_paths(const RepoIndex& index, const MethodRef& mut, const ThrowTarget& target,
                                          int max_depth, std::size_t max_paths = 64);

/// Single frame at the target's throw line.
StackTrace single_frame_trace(const ThrowTarget& target);

// ---- persistence -----------------------------------------------------------

std::filesystem::path cache_dir(const std::filesystem::path& repo_root);

std::string db_to_json(const PreparedDb& db);
/// Throws Error on malformed input or an unsupported schema version.
PreparedDb db_from_json(const std::string& text);

/// Writes prepared.json and prepared.meta into `dir`.
void save_db(const PreparedDb& db, const std::filesystem::path& dir);
/// Reads the cache in `dir`; nullopt when absent.
std::optional<PreparedDb> load_db(const std::filesystem::path& dir);

enum class CacheState { Missing, Fresh, Stale };
CacheState cache_state(const std::filesystem::path& dir, const std::optional<std::string>& commit);

}  // namespace ebtforge
