#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/source_model.hpp"
#include "ebtforge/trace_store.hpp"

namespace ebtforge {

/// Top-k non-EBTs ranked by: covers the MUT, number of trace methods
/// covered, shorter body, test id. Tests covering nothing on the trace are
/// left out.
std::vector<const TestMethod*> select_relevant_tests(const PreparedDb& db, const RepoIndex& index,
                                                     const MethodRef& mut, const StackTrace& trace, int k);

enum class DestReason { NameMatch, Coverage, Created, Override };
std::string_view to_string(DestReason r);

struct DestTestFile {
    std::string path;        // repo-relative
    std::string class_name;  // qualified
    std::string content;     // existing text, or a skeleton when to_be_created
    bool to_be_created = false;
    DestReason reason = DestReason::Created;
};

/// Destination test class for methods of `mut_class` (qualified):
/// TestX.java, then XTest.java, nearest package first; else the test class
/// whose tests cover `mut` (then `mut_class`) the most; else a new
/// <test_root>/<package>/XTest.java.
DestTestFile resolve_dest_test_file(const RepoIndex& index, const PreparedDb& db, const std::string& mut_class,
                                    const MethodRef* mut = nullptr);

/// Explicitly chosen destination. Paths are tried as given, then as a
/// suffix of an indexed test unit.
DestTestFile dest_from_path(const RepoIndex& index, const std::string& path);

/// Empty JUnit test class.
std::string test_class_skeleton(const std::string& package_name, const std::string& simple_name);

/// Frames as "method(File.java:line)" headers, each followed by the source
/// line it points at between "..." lines.
std::string render_trace(const StackTrace& trace, const RepoIndex& index);

struct PromptBundle {
    std::string mut_source;
    std::string mut_name;
    std::string mut_class;  // qualified
    std::vector<Param> mut_params;
    bool mut_is_static = false;
    bool mut_is_constructor = false;
    std::string throw_stmt;
    SrcLoc throw_loc;
    std::string trace_text;
    std::string guard_text;
    std::optional<TestMethod> exemplar_test;
    std::string dest_path;
    std::string dest_content;
    std::optional<std::string> test_name;
    std::string exception_type;
};

/// Text with ${instruction}, ${mut}, ${stack_trace}, ${guard}, ${exemplar},
/// ${dest_file} and ${task} placeholders. A line holding only the
/// placeholder of an empty section is dropped.
struct PromptTemplate {
    std::string name;
    std::string text;

    static PromptTemplate builtin();
    static PromptTemplate from_file(const std::filesystem::path& path);
};

inline constexpr std::size_t kDefaultPromptBudget = 12000;

struct Prompt {
    std::string text;
    std::size_t length = 0;
    bool dest_truncated = false;
    bool exemplar_truncated = false;
    bool over_budget = false;  // MUT, trace and guard alone exceed the budget
    std::vector<std::string> sections;  // populated section names in template order
};

/// Renders the bundle. Over budget, destination content is cut first and
/// the exemplar second; MUT, trace and guard are never cut.
Prompt build_prompt(const PromptBundle& bundle, const PromptTemplate& tmpl,
                    std::size_t budget = kDefaultPromptBudget);

/// One prompt per exemplar up to k, plus an exemplar-free prompt when
/// fewer than k exemplars exist.
std::vector<Prompt> build_prompt_set(const PromptBundle& bundle, const std::vector<const TestMethod*>& exemplars,
                                     int k, const PromptTemplate& tmpl, std::size_t budget = kDefaultPromptBudget);

}  // namespace ebtforge
