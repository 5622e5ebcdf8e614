#include "ebtforge/repo_scanner.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <atomic>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "subprocess.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using detail::trim;

// ---- project settings ------------------------------------------------------

namespace {

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
    }
    return std::string(line);
}

std::string unquote(std::string_view v) {
    v = trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return std::string(v.substr(1, v.size() - 2));
    }
    return std::string(v);
}

// Splits on commas that are not inside quotes.
std::vector<std::string> split_values(std::string_view v) {
    std::vector<std::string> out;
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= v.size(); ++i) {
        if (i < v.size() && v[i] == '"') quoted = !quoted;
        if (i == v.size() || (v[i] == ',' && !quoted)) {
            std::string item = unquote(v.substr(start, i - start));
            if (!item.empty()) out.push_back(std::move(item));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

ProjectSettings load_project_settings(const fs::path& root) {
    ProjectSettings settings;
    fs::path file = root / ".ebtforge.toml";
    if (!fs::is_regular_file(file)) return settings;
    auto lines = detail::split_lines(detail::read_file(file));
    std::string section;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line(trim(strip_comment(lines[i])));
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = std::string(trim(std::string_view(line).substr(1, line.size() - 2)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", file.string(), i + 1));
        std::string key(trim(std::string_view(line).substr(0, eq)));
        std::string value(trim(std::string_view(line).substr(eq + 1)));
        if (!value.empty() && value.front() == '[') {
            while (value.find(']') == std::string::npos && i + 1 < lines.size()) {
                value += " " + std::string(trim(strip_comment(lines[++i])));
            }
            auto close = value.rfind(']');
            if (close == std::string::npos) throw ConfigError(file.string() + ": unterminated list for " + key);
            value = value.substr(1, close - 1);
        }
        if (!section.empty()) key = section + "." + key;
        settings[key] = split_values(value);
    }
    return settings;
}

ScanConfig apply_settings(ScanConfig base, const ProjectSettings& settings) {
    if (auto it = settings.find("main_roots"); it != settings.end()) base.main_roots = it->second;
    if (auto it = settings.find("test_roots"); it != settings.end()) base.test_roots = it->second;
    if (auto it = settings.find("exclude"); it != settings.end()) base.exclude = it->second;
    return base;
}

// ---- index queries ---------------------------------------------------------

const SourceUnit* RepoIndex::find_unit(std::string_view path) const {
    auto it = std::lower_bound(units.begin(), units.end(), path,
                               [](const SourceUnit& u, std::string_view p) { return u.path < p; });
    return it != units.end() && it->path == path ? &*it : nullptr;
}

const SourceUnit* RepoIndex::find_unit_by_suffix(std::string_view path) const {
    if (const auto* exact = find_unit(path)) return exact;
    const SourceUnit* best = nullptr;
    for (const auto& u : units) {
        if (detail::path_has_suffix(u.path, path) && (!best || u.path.size() < best->path.size())) best = &u;
    }
    return best;
}

const SourceUnit* RepoIndex::unit_for_class(const std::string& qualified) const {
    auto it = classes.find(qualified);
    return it == classes.end() ? nullptr : &units[it->second];
}

bool RepoIndex::is_test_unit(const SourceUnit& unit) const {
    auto i = static_cast<std::size_t>(&unit - units.data());
    return i < roles.size() && roles[i] == UnitRole::Test;
}

const TestMethod* RepoIndex::find_test(const std::string& id) const {
    for (const auto& t : tests) {
        if (t.id() == id) return &t;
    }
    return nullptr;
}

std::vector<const TestMethod*> RepoIndex::non_ebts() const {
    std::vector<const TestMethod*> out;
    for (const auto& t : tests) {
        if (t.kind == TestKind::NonEBT) out.push_back(&t);
    }
    return out;
}

std::string RepoIndex::source_root_of(std::string_view path) const {
    std::string best;
    for (const auto* roots : {&config.main_roots, &config.test_roots}) {
        for (const auto& r : *roots) {
            std::string norm = fs::path(r).lexically_normal().generic_string();
            if (norm == ".") norm.clear();
            bool under = norm.empty() || (path.size() > norm.size() && path.starts_with(norm) && path[norm.size()] == '/');
            if (under && (best.empty() || norm.size() > best.size())) best = norm;
        }
    }
    return best;
}

std::string package_from_path(std::string_view rel_path, std::string_view source_root) {
    std::string_view rest = rel_path;
    if (!source_root.empty() && rest.starts_with(source_root)) rest.remove_prefix(source_root.size());
    while (!rest.empty() && rest.front() == '/') rest.remove_prefix(1);
    auto slash = rest.rfind('/');
    if (slash == std::string_view::npos) return {};
    std::string pkg(rest.substr(0, slash));
    std::replace(pkg.begin(), pkg.end(), '/', '.');
    return pkg;
}

// ---- test classification ---------------------------------------------------

bool is_test_method(const MethodDecl& m) {
    static const std::regex kTestAnnotation(R"(@(?:[A-Za-z_$][\w$]*\.)*(?:Test|ParameterizedTest|RepeatedTest)(?![\w$]))");
    return std::regex_search(m.signature_text, kTestAnnotation);
}

namespace {

std::string simple_type(std::string_view qualified) {
    auto dot = qualified.rfind('.');
    return std::string(dot == std::string_view::npos ? qualified : qualified.substr(dot + 1));
}

std::optional<std::string> expected_attribute(const std::string& header) {
    static const std::regex kTestArgs(R"(@(?:[\w$]+\.)*Test\s*\(([^)]*)\))");
    static const std::regex kExpected(R"(expected\s*=\s*([\w$.]+?)\s*\.\s*class)");
    std::smatch args;
    if (!std::regex_search(header, args, kTestArgs)) return std::nullopt;
    std::string inner = args[1].str();
    std::smatch ex;
    if (!std::regex_search(inner, ex, kExpected)) return std::nullopt;
    return simple_type(ex[1].str());
}

struct AssertThrows {
    bool found = false;
    std::optional<std::string> type;
};

AssertThrows find_assert_throws(const Block& body) {
    AssertThrows out;
    for_each_stmt(body, [&](const Stmt& s) {
        for (const auto& e : stmt_exprs(s)) {
            walk_expr(e, [&](const Expr& x) {
                const auto* call = x.as<expr::MethodCall>();
                if (out.found || !call || (call->name != "assertThrows" && call->name != "expectThrows")) return;
                out.found = true;
                if (call->args.empty()) return;
                if (const auto* f = call->args.front()->as<expr::FieldAccess>(); f && f->field == "class") {
                    out.type = simple_type(render_expr(f->base));
                }
            });
        }
    });
    return out;
}

bool is_fail_call(const Stmt& s) {
    const auto* es = s.as<stmt::ExprStmt>();
    if (!es) return false;
    const auto* call = es->expr->as<expr::MethodCall>();
    return call && call->name.starts_with("fail");
}

bool has_try_fail(const Block& body) {
    bool found = false;
    for_each_stmt(body, [&](const Stmt& s) {
        const auto* t = s.as<stmt::Try>();
        if (found || !t || t->catches.empty() || t->body.stmts.empty()) return;
        found = is_fail_call(t->body.stmts.back());
    });
    return found;
}

}  // namespace

TestMethod classify_test(const SourceUnit& unit, const MethodDecl& m) {
    TestMethod t;
    t.class_name = unit.package_name.empty() ? m.class_name : unit.package_name + "." + m.class_name;
    t.method_name = m.name;
    t.body_text = std::string(unit.method_text(m));
    t.loc = m.loc;
    t.end_line = m.end_line;
    if (auto expected = expected_attribute(m.signature_text)) {
        t.kind = TestKind::EBT;
        t.expected_exception = std::move(expected);
        return t;
    }
    if (auto at = find_assert_throws(m.body); at.found) {
        t.kind = TestKind::EBT;
        t.expected_exception = at.type;
        return t;
    }
    if (has_try_fail(m.body)) t.kind = TestKind::EBT;
    return t;
}

// ---- scanning --------------------------------------------------------------

namespace {

std::optional<std::string> detect_commit(const fs::path& root) {
    if (!fs::exists(root / ".git")) return std::nullopt;
    try {
        auto r = detail::run_process({"git", "-C", root.string(), "rev-parse", "HEAD"}, root, {},
                                     std::chrono::seconds(30));
        if (r.exit_code != 0) return std::nullopt;
        std::string sha(trim(r.out));
        return sha.empty() ? std::nullopt : std::optional<std::string>(sha);
    } catch (const Error&) {
        return std::nullopt;
    }
}

bool excluded(const std::string& rel, const std::vector<std::string>& globs) {
    return std::any_of(globs.begin(), globs.end(),
                       [&](const std::string& g) { return ::fnmatch(g.c_str(), rel.c_str(), 0) == 0; });
}

struct Candidate {
    std::string rel;
    UnitRole role;
};

// Role by the longest root containing the file, so nested test roots win.
std::vector<Candidate> collect_files(const fs::path& root, const ScanConfig& config) {
    std::map<std::string, std::pair<std::size_t, UnitRole>> found;
    bool any_root = false;
    auto visit = [&](const std::string& r, UnitRole role) {
        fs::path dir = (root / r).lexically_normal();
        if (!fs::is_directory(dir)) return;
        any_root = true;
        std::size_t depth = fs::path(r).lexically_normal().generic_string().size();
        for (auto it = fs::recursive_directory_iterator(dir, fs::directory_options::skip_permission_denied);
             it != fs::recursive_directory_iterator(); ++it) {
            std::string name = it->path().filename().string();
            if (it->is_directory() && (name == ".ebtforge" || name == ".git")) {
                it.disable_recursion_pending();
                continue;
            }
            if (!it->is_regular_file() || it->path().extension() != ".java") continue;
            std::string rel = detail::rel_path(it->path(), root);
            if (excluded(rel, config.exclude)) continue;
            auto [pos, inserted] = found.try_emplace(rel, depth, role);
            if (!inserted && depth > pos->second.first) pos->second = {depth, role};
        }
    };
    for (const auto& r : config.main_roots) visit(r, UnitRole::Main);
    for (const auto& r : config.test_roots) visit(r, UnitRole::Test);
    if (!any_root) throw ConfigError("no source roots found under " + root.string());
    std::vector<Candidate> out;
    out.reserve(found.size());
    for (auto& [rel, v] : found) out.push_back({rel, v.second});
    return out;
}

}  // namespace

RepoIndex scan_repo(const fs::path& root_in, const ScanConfig& config) {
    if (!fs::is_directory(root_in)) throw ConfigError("repository not found: " + root_in.string());
    RepoIndex index;
    index.root = fs::absolute(root_in).lexically_normal();
    if (index.root.filename().empty()) index.root = index.root.parent_path();
    index.config = config;
    index.commit = detect_commit(index.root);

    std::vector<Candidate> files = collect_files(index.root, config);
    std::vector<std::optional<SourceUnit>> parsed(files.size());
    std::vector<std::string> errors(files.size());
    {
        unsigned n = config.threads ? config.threads : std::max(1U, std::thread::hardware_concurrency());
        n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(files.size(), 1)));
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < files.size(); i = next++) {
                try {
                    parsed[i] = parse_compilation_unit(detail::read_file(index.root / files[i].rel), files[i].rel);
                } catch (const Error& e) {
                    errors[i] = e.what();
                }
            }
        };
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
        work();
    }

    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!parsed[i]) {
            index.warnings.push_back("skipped unparseable file " + errors[i]);
            continue;
        }
        SourceUnit& unit = *parsed[i];
        std::string inferred = package_from_path(unit.path, index.source_root_of(unit.path));
        if (unit.package_name.empty()) {
            unit.package_name = inferred;
        } else if (unit.package_name != inferred) {
            index.warnings.push_back(fmt::format("{}: declared package {} does not match directory ({})", unit.path,
                                                 unit.package_name, inferred.empty() ? "<default>" : inferred));
        }
        index.units.push_back(std::move(unit));
        index.roles.push_back(files[i].role);
    }

    for (std::size_t u = 0; u < index.units.size(); ++u) {
        const SourceUnit& unit = index.units[u];
        for (const auto& type : unit.types) {
            std::string q = qualified_class_name(unit, type);
            auto [pos, inserted] = index.classes.emplace(q, u);
            if (!inserted) {
                index.warnings.push_back(fmt::format("duplicate class {} in {} (first seen in {})", q, unit.path,
                                                     index.units[pos->second].path));
            }
            if (index.roles[u] != UnitRole::Test) continue;
            for (const auto& m : type.methods) {
                if (is_test_method(m)) index.tests.push_back(classify_test(unit, m));
            }
        }
    }
    for (const auto& w : index.warnings) spdlog::warn("scan: {}", w);
    return index;
}

// ---- targets ---------------------------------------------------------------

namespace {

std::vector<ThrowTarget> collect_targets(const RepoIndex& index, bool public_only) {
    std::vector<ThrowTarget> out;
    for (std::size_t u = 0; u < index.units.size(); ++u) {
        if (index.roles[u] != UnitRole::Main) continue;
        const SourceUnit& unit = index.units[u];
        std::vector<ThrowTarget> local;
        for (const auto& type : unit.types) {
            for (const auto& m : type.methods) {
                bool is_public = m.visibility == Visibility::Public;
                if (public_only && !is_public) continue;
                for_each_stmt(m.body, [&](const Stmt& s) {
                    const auto* th = s.as<stmt::Throw>();
                    if (!th) return;
                    ThrowTarget t;
                    t.throw_loc = s.loc;
                    t.exception_type = th->exception_type;
                    t.enclosing_method = make_method_ref(unit, m);
                    t.enclosing_class = qualified_class_name(unit, type);
                    t.public_entry = is_public;
                    local.push_back(std::move(t));
                });
            }
        }
        std::stable_sort(local.begin(), local.end(), [](const ThrowTarget& a, const ThrowTarget& b) {
            return a.throw_loc.line < b.throw_loc.line;
        });
        out.insert(out.end(), local.begin(), local.end());
    }
    return out;
}

}  // namespace

std::vector<ThrowTarget> enumerate_targets(const RepoIndex& index) {
    return collect_targets(index, true);
}

std::vector<ThrowTarget> all_throw_targets(const RepoIndex& index) {
    return collect_targets(index, false);
}

}  // namespace ebtforge
