#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ebtforge/source_model.hpp"

namespace ebtforge {

struct ScanConfig {
    std::vector<std::string> main_roots{"src/main/java"};
    std::vector<std::string> test_roots{"src/test/java"};
    std::vector<std::string> exclude;  // fnmatch globs over repo-relative paths
    unsigned threads = 0;              // 0: hardware concurrency
};

/// Key/value settings from <root>/.ebtforge.toml. Values are either a
/// quoted string, a bare word, or a `[...]` list of strings; lists and
/// comma-separated bare values both become several entries.
using ProjectSettings = std::map<std::string, std::vector<std::string>>;

ProjectSettings load_project_settings(const std::filesystem::path& root);

/// `base` with main_roots/test_roots/exclude replaced by any keys present
/// in the project settings.
ScanConfig apply_settings(ScanConfig base, const ProjectSettings& settings);

enum class TestKind { EBT, NonEBT };

struct TestMethod {
    std::string class_name;  // qualified
    std::string method_name;
    TestKind kind = TestKind::NonEBT;
    std::optional<std::string> expected_exception;  // simple name
    std::string body_text;                          // full declaration, annotations included
    SrcLoc loc;
    int end_line = 0;

    /// "pkg.Class#method"
    [[nodiscard]] std::string id() const { return class_name + "#" + method_name; }
};

enum class UnitRole { Main, Test };

struct RepoIndex {
    std::filesystem::path root;  // absolute
    std::optional<std::string> commit;
    std::vector<SourceUnit> units;  // sorted by path
    std::vector<UnitRole> roles;    // parallel to units
    std::vector<TestMethod> tests;  // in unit order, then source order
    std::map<std::string, std::size_t> classes;  // qualified class name -> unit index
    std::vector<std::string> warnings;
    ScanConfig config;

    [[nodiscard]] const SourceUnit* find_unit(std::string_view path) const;
    /// Unit whose path equals `path` or ends with "/<path>"; the shortest
    /// such path wins. Used for frame files and CLI paths given relative
    /// to a source root.
    [[nodiscard]] const SourceUnit* find_unit_by_suffix(std::string_view path) const;
    [[nodiscard]] const SourceUnit* unit_for_class(const std::string& qualified) const;
    [[nodiscard]] bool is_test_unit(const SourceUnit& unit) const;
    [[nodiscard]] const TestMethod* find_test(const std::string& id) const;
    [[nodiscard]] std::vector<const TestMethod*> non_ebts() const;
    /// Source root containing `path`, or empty.
    [[nodiscard]] std::string source_root_of(std::string_view path) const;
};

/// Walks `root`, parsing every .java file under the configured roots.
/// Files failing unit-level parsing become warnings. Throws ConfigError
/// when no source root exists.
RepoIndex scan_repo(const std::filesystem::path& root, const ScanConfig& config);

/// True when the header text carries a @Test-style annotation.
bool is_test_method(const MethodDecl& m);

TestMethod classify_test(const SourceUnit& unit, const MethodDecl& m);

/// Throw statements in public methods of main units, ordered by (path, line).
std::vector<ThrowTarget> enumerate_targets(const RepoIndex& index);

/// Every throw statement in main units regardless of visibility.
std::vector<ThrowTarget> all_throw_targets(const RepoIndex& index);

/// Package implied by a path relative to its source root: "com/acme/A.java"
/// under "src/main/java" gives "com.acme".
std::string package_from_path(std::string_view rel_path, std::string_view source_root);

}  // namespace ebtforge
