#include "ebtforge/context_assembler.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "ebtforge/errors.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;

namespace {

std::string simple_name(std::string_view qualified) {
    auto dot = qualified.rfind('.');
    return std::string(dot == std::string_view::npos ? qualified : qualified.substr(dot + 1));
}

std::vector<std::string> split_dots(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size() && !s.empty()) {
        auto dot = s.find('.', start);
        if (dot == std::string_view::npos) dot = s.size();
        out.emplace_back(s.substr(start, dot - start));
        start = dot + 1;
    }
    return out;
}

// Segments to walk from one package to the other.
std::size_t package_distance(std::string_view a, std::string_view b) {
    auto pa = split_dots(a);
    auto pb = split_dots(b);
    std::size_t common = 0;
    while (common < pa.size() && common < pb.size() && pa[common] == pb[common]) ++common;
    return pa.size() + pb.size() - 2 * common;
}

// Splits "com.acme.Outer.Inner" into package and top-level type using the
// index; falls back to the last dotted segment as the type.
std::pair<std::string, std::string> split_class(const RepoIndex& index, const std::string& qualified) {
    if (const SourceUnit* u = index.unit_for_class(qualified)) {
        std::string rest = u->package_name.empty() ? qualified : qualified.substr(u->package_name.size() + 1);
        return {u->package_name, rest.substr(0, rest.find('.'))};
    }
    auto dot = qualified.rfind('.');
    if (dot == std::string::npos) return {"", qualified};
    return {qualified.substr(0, dot), qualified.substr(dot + 1)};
}

std::string primary_class(const SourceUnit& unit) {
    std::string stem = fs::path(unit.path).stem().string();
    for (const auto& t : unit.types) {
        if (t.name == stem) return qualified_class_name(unit, t);
    }
    return unit.types.empty() ? stem : qualified_class_name(unit, unit.types.front());
}

DestTestFile from_unit(const SourceUnit& unit, DestReason reason) {
    return {unit.path, primary_class(unit), unit.raw_text, false, reason};
}

}  // namespace

std::vector<const TestMethod*> select_relevant_tests(const PreparedDb& db, const RepoIndex& index,
                                                     const MethodRef& mut, const StackTrace& trace, int k) {
    if (k < 1) throw UsageError("k must be >= 1");
    std::vector<MethodRef> trace_methods;
    for (const auto& f : trace.frames) {
        MethodRef r;
        r.class_name = f.class_name;
        r.name = f.method_name;
        r.is_constructor = f.method_name == simple_name(f.class_name);
        trace_methods.push_back(std::move(r));
    }
    struct Ranked {
        bool covers_mut;
        std::size_t frame_hits;
        std::size_t body_len;
        std::string id;
        const TestMethod* test;
    };
    std::vector<Ranked> ranked;
    for (const auto* t : index.non_ebts()) {
        std::string id = t->id();
        bool covers_mut = db.coverage.covers(id, mut);
        std::size_t hits = static_cast<std::size_t>(std::count_if(
            trace_methods.begin(), trace_methods.end(), [&](const MethodRef& r) { return db.coverage.covers(id, r); }));
        if (!covers_mut && hits == 0) continue;
        ranked.push_back({covers_mut, hits, t->body_text.size(), std::move(id), t});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        return std::forward_as_tuple(!a.covers_mut, b.frame_hits, a.body_len, a.id) <
               std::forward_as_tuple(!b.covers_mut, a.frame_hits, b.body_len, b.id);
    });
    std::vector<const TestMethod*> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < static_cast<std::size_t>(k); ++i) {
        out.push_back(ranked[i].test);
    }
    return out;
}

std::string_view to_string(DestReason r) {
    switch (r) {
        case DestReason::NameMatch: return "name-match";
        case DestReason::Coverage: return "coverage";
        case DestReason::Created: return "created";
        case DestReason::Override: return "override";
    }
    return "created";
}

std::string test_class_skeleton(const std::string& package_name, const std::string& simple) {
    std::string out;
    if (!package_name.empty()) out += "package " + package_name + ";\n\n";
    out += "import org.junit.Test;\n\n";
    out += "public class " + simple + " {\n}\n";
    return out;
}

DestTestFile resolve_dest_test_file(const RepoIndex& index, const PreparedDb& db, const std::string& mut_class,
                                    const MethodRef* mut) {
    auto [pkg, cls] = split_class(index, mut_class);

    // (1) name matching
    const std::string names[2] = {"Test" + cls + ".java", cls + "Test.java"};
    const SourceUnit* best = nullptr;
    std::tuple<int, std::size_t, std::string> best_key;
    for (const auto& u : index.units) {
        if (!index.is_test_unit(u)) continue;
        std::string base = detail::basename_of(u.path);
        for (int n = 0; n < 2; ++n) {
            if (base != names[n]) continue;
            auto key = std::tuple(n, package_distance(u.package_name, pkg), u.path);
            if (!best || key < best_key) {
                best = &u;
                best_key = key;
            }
        }
    }
    if (best) return from_unit(*best, DestReason::NameMatch);

    // (2) coverage dominance, aggregated per test class
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // class -> (mut hits, class hits)
    for (const auto& t : index.tests) {
        std::string id = t.id();
        std::size_t mut_hit = mut && db.coverage.covers(id, *mut) ? 1 : 0;
        std::size_t class_hit = db.coverage.class_hits(id, mut_class);
        if (mut_hit == 0 && class_hit == 0) continue;
        auto& acc = per_class[t.class_name];
        acc.first += mut_hit;
        acc.second += class_hit;
    }
    const SourceUnit* dominant = nullptr;
    std::pair<std::size_t, std::size_t> dominant_score{0, 0};
    for (const auto& [test_class, score] : per_class) {  // map order breaks ties by name
        const SourceUnit* u = index.unit_for_class(test_class);
        if (u && (!dominant || score > dominant_score)) {
            dominant = u;
            dominant_score = score;
        }
    }
    if (dominant) return from_unit(*dominant, DestReason::Coverage);

    // (3) creation path
    std::string root = index.config.test_roots.empty() ? "src/test/java" : index.config.test_roots.front();
    std::string dir = pkg;
    std::replace(dir.begin(), dir.end(), '.', '/');
    fs::path rel = fs::path(root) / dir / (cls + "Test.java");
    std::string q = pkg.empty() ? cls + "Test" : pkg + "." + cls + "Test";
    return {rel.lexically_normal().generic_string(), q, test_class_skeleton(pkg, cls + "Test"), true,
            DestReason::Created};
}

DestTestFile dest_from_path(const RepoIndex& index, const std::string& path) {
    if (const SourceUnit* u = index.find_unit_by_suffix(path)) return from_unit(*u, DestReason::Override);
    fs::path abs = fs::path(path).is_absolute() ? fs::path(path) : index.root / path;
    std::string stem = fs::path(path).stem().string();
    if (fs::is_regular_file(abs)) {
        std::string text = detail::read_file(abs);
        std::string cls = stem;
        try {
            SourceUnit u = parse_compilation_unit(text, path);
            cls = u.package_name.empty() ? stem : u.package_name + "." + stem;
        } catch (const Error&) {
        }
        return {path, cls, std::move(text), false, DestReason::Override};
    }
    return {path, stem, test_class_skeleton("", stem), true, DestReason::Override};
}

std::string render_trace(const StackTrace& trace, const RepoIndex& index) {
    std::string out;
    for (const auto& f : trace.frames) {
        out += f.render() + "\n";
        const SourceUnit* u = f.file.empty() ? nullptr : index.find_unit_by_suffix(f.file);
        if (!u) continue;
        std::string_view line = detail::trim(u->line_text(f.line));
        if (line.empty()) continue;
        out += "    ...\n    ";
        out += line;
        out += "\n    ...\n";
    }
    return out;
}

// ---- prompts ---------------------------------------------------------------

namespace {

constexpr std::string_view kBuiltinTemplate =
    "${instruction}\n"
    "\n"
    "${mut}\n"
    "\n"
    "${stack_trace}\n"
    "\n"
    "${guard}\n"
    "\n"
    "${exemplar}\n"
    "\n"
    "${dest_file}\n"
    "\n"
    "${task}\n";

constexpr const char* kSectionNames[] = {"instruction", "mut", "stack_trace", "guard", "exemplar", "dest_file", "task"};
constexpr std::string_view kTruncated = "\n// ... truncated\n";

std::string fenced(std::string_view label, std::string_view body) {
    return fmt::format("### {}\n```java\n{}\n```", label, detail::trim(body));
}

std::string cut(const std::string& s, std::size_t keep, bool& truncated) {
    if (s.size() <= keep) return s;
    truncated = true;
    return s.substr(0, keep) + std::string(kTruncated);
}

std::map<std::string, std::string> render_sections(const PromptBundle& b, const std::string& dest,
                                                   const std::string& exemplar) {
    std::map<std::string, std::string> s;
    s["instruction"] = fmt::format(
        "Write a test that triggers {} at {}:{}.\nThe target throw statement is:\n    {}", b.exception_type,
        b.throw_loc.file, b.throw_loc.line, detail::trim(b.throw_stmt));
    s["mut"] = fenced("Method under test: " + b.mut_name, detail::dedent_tail(b.mut_source));
    if (!b.trace_text.empty()) {
        s["stack_trace"] = fmt::format("### Stack trace from the method under test to the throw\n```\n{}```",
                                       b.trace_text.back() == '\n' ? b.trace_text : b.trace_text + "\n");
    }
    if (!b.guard_text.empty()) s["guard"] = fmt::format("### Guard expression\n```\n{}\n```", b.guard_text);
    if (b.exemplar_test) s["exemplar"] = fenced("Relevant non-exceptional test", exemplar);
    if (!b.dest_path.empty()) s["dest_file"] = fenced("Destination test file: " + b.dest_path, dest);
    s["task"] = b.test_name
                    ? fmt::format("### Task\nWrite one JUnit test method named {} that expects {}. Reply with the "
                                  "method only.",
                                  *b.test_name, b.exception_type)
                    : fmt::format("### Task\nWrite one JUnit test method that expects {}. Reply with the method only.",
                                  b.exception_type);
    return s;
}

std::string fill(const std::string& tmpl, const std::map<std::string, std::string>& sections) {
    std::string out;
    for (const auto& line : detail::split_lines(tmpl)) {
        std::string_view t = detail::trim(line);
        bool only_placeholder = t.size() > 3 && t.starts_with("${") && t.ends_with("}") &&
                                t.find("${", 2) == std::string_view::npos;
        if (only_placeholder) {
            std::string key(t.substr(2, t.size() - 3));
            auto it = sections.find(key);
            if (it == sections.end() || it->second.empty()) continue;
        }
        std::string l = line;
        for (const auto& [k, v] : sections) {
            std::string ph = "${" + k + "}";
            for (auto pos = l.find(ph); pos != std::string::npos; pos = l.find(ph, pos + v.size())) l.replace(pos, ph.size(), v);
        }
        out += l;
        out += '\n';
    }
    // Dropped sections leave runs of blank lines behind.
    std::string squeezed;
    std::size_t newlines = 0;
    for (char c : out) {
        newlines = c == '\n' ? newlines + 1 : 0;
        if (newlines <= 2) squeezed += c;
    }
    while (squeezed.starts_with("\n")) squeezed.erase(0, 1);
    return squeezed;
}

}  // namespace

PromptTemplate PromptTemplate::builtin() {
    return {"builtin", std::string(kBuiltinTemplate)};
}

PromptTemplate PromptTemplate::from_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("prompt template not found: " + path.string());
    return {path.stem().string(), detail::read_file(path)};
}

Prompt build_prompt(const PromptBundle& bundle, const PromptTemplate& tmpl, std::size_t budget) {
    Prompt p;
    std::string dest = bundle.dest_content;
    std::string exemplar = bundle.exemplar_test ? detail::dedent_tail(bundle.exemplar_test->body_text) : std::string();
    auto render = [&] {
        auto sections = render_sections(bundle, dest, exemplar);
        p.sections.clear();
        for (const char* name : kSectionNames) {
            if (tmpl.text.find(std::string("${") + name + "}") == std::string::npos) continue;
            if (auto it = sections.find(name); it != sections.end() && !it->second.empty()) p.sections.emplace_back(name);
        }
        p.text = fill(tmpl.text, sections);
    };
    render();
    if (p.text.size() > budget && !dest.empty()) {
        std::size_t over = p.text.size() - budget + kTruncated.size();
        dest = cut(dest, dest.size() > over ? dest.size() - over : 0, p.dest_truncated);
        render();
    }
    if (p.text.size() > budget && !exemplar.empty()) {
        std::size_t over = p.text.size() - budget + kTruncated.size();
        exemplar = cut(exemplar, exemplar.size() > over ? exemplar.size() - over : 0, p.exemplar_truncated);
        render();
    }
    p.over_budget = p.text.size() > budget;
    p.length = p.text.size();
    return p;
}

std::vector<Prompt> build_prompt_set(const PromptBundle& bundle, const std::vector<const TestMethod*>& exemplars,
                                     int k, const PromptTemplate& tmpl, std::size_t budget) {
    if (k < 1) throw UsageError("k must be >= 1");
    std::vector<Prompt> out;
    auto n = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i < exemplars.size() && i < n; ++i) {
        PromptBundle b = bundle;
        b.exemplar_test = *exemplars[i];
        out.push_back(build_prompt(b, tmpl, budget));
    }
    if (exemplars.size() < n) {
        PromptBundle b = bundle;
        b.exemplar_test.reset();
        out.push_back(build_prompt(b, tmpl, budget));
    }
    return out;
}

}  // namespace ebtforge
