#include "ebtforge/trace_store.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "ebtforge/test_runner.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string simple_name(std::string_view qualified) {
    auto dot = qualified.rfind('.');
    return std::string(dot == std::string_view::npos ? qualified : qualified.substr(dot + 1));
}

// a == b, or one is a dotted suffix of the other ("Scheduler" vs "com.x.Scheduler").
bool class_names_match(std::string_view a, std::string_view b) {
    if (a == b) return true;
    auto dotted_suffix = [](std::string_view lng, std::string_view shrt) {
        return lng.size() > shrt.size() && lng.ends_with(shrt) && lng[lng.size() - shrt.size() - 1] == '.';
    };
    return dotted_suffix(a, b) || dotted_suffix(b, a);
}

StackFrame normalize_frame(StackFrame f) {
    std::replace(f.class_name.begin(), f.class_name.end(), '$', '.');
    if (f.method_name == "<init>") f.method_name = simple_name(f.class_name);
    return f;
}

json frame_to_json(const StackFrame& f) {
    return json{{"class", f.class_name}, {"method", f.method_name}, {"file", f.file}, {"line", f.line}};
}

StackFrame frame_from_json(const json& j) {
    StackFrame f;
    f.class_name = j.at("class").get<std::string>();
    f.method_name = j.at("method").get<std::string>();
    f.file = j.value("file", std::string());
    f.line = j.at("line").get<int>();
    if (f.class_name.empty() || f.method_name.empty()) throw Error("empty class or method");
    if (f.line < 1) throw Error("line must be >= 1");
    return normalize_frame(std::move(f));
}

json trace_to_json(const StackTrace& t) {
    json frames = json::array();
    for (const auto& f : t.frames) frames.push_back(frame_to_json(f));
    return json{{"test", t.origin_test}, {"frames", std::move(frames)}, {"marker", t.marker}};
}

StackTrace trace_from_json(const json& j) {
    StackTrace t;
    t.origin_test = j.value("test", std::string());
    t.marker = j.value("marker", std::string());
    for (const auto& f : j.at("frames")) t.frames.push_back(frame_from_json(f));
    if (t.frames.empty()) throw Error("trace has no frames");
    return t;
}

}  // namespace

// ---- value types -----------------------------------------------------------

std::string StackFrame::render() const {
    return fmt::format("{}({}:{})", method_name, detail::basename_of(file), line);
}

bool CoverageMap::covers(const std::string& test_id, const MethodRef& m) const {
    auto it = by_test.find(test_id);
    if (it == by_test.end()) return false;
    std::string method = m.is_constructor ? simple_name(m.class_name) : m.name;
    return std::any_of(it->second.begin(), it->second.end(), [&](const auto& p) {
        return class_names_match(p.first, m.class_name) && p.second == method;
    });
}

std::size_t CoverageMap::class_hits(const std::string& test_id, const std::string& qualified_class) const {
    auto it = by_test.find(test_id);
    if (it == by_test.end()) return 0;
    return static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(), [&](const auto& p) {
        return class_names_match(p.first, qualified_class);
    }));
}

// ---- preparation -----------------------------------------------------------

std::vector<InstrumentPoint> instrumentation_plan(const RepoIndex& index) {
    std::vector<InstrumentPoint> plan;
    for (const auto& t : all_throw_targets(index)) {
        plan.push_back({t.throw_loc.file, t.enclosing_class, t.enclosing_method.name, t.throw_loc.line});
    }
    return plan;
}

namespace {

CoverageMap read_coverage(const fs::path& file) {
    CoverageMap cov;
    if (!fs::exists(file)) return cov;
    json j = json::parse(detail::read_file(file));
    for (const auto& [test, methods] : j.items()) {
        auto& set = cov.by_test[test];
        for (const auto& pair : methods) {
            std::string cls = pair.at(0).get<std::string>();
            std::replace(cls.begin(), cls.end(), '$', '.');
            std::string method = pair.at(1).get<std::string>();
            if (method == "<init>") method = simple_name(cls);
            set.emplace(std::move(cls), std::move(method));
        }
    }
    return cov;
}

}  // namespace

PreparedDb run_preparation(const RepoIndex& index, TestRunner& runner) {
    const fs::path dir = cache_dir(index.root);
    detail::DirLock lock(dir);

    PreparedDb db;
    db.created_for_commit = index.commit;
    std::unordered_set<std::string> non_ebt_ids;
    for (const auto* t : index.non_ebts()) {
        db.tests_run.push_back(t->id());
        non_ebt_ids.insert(t->id());
    }

    if (!db.tests_run.empty()) {
        const fs::path work = dir / "tmp" / "prepare";
        fs::remove_all(work);
        fs::create_directories(work);
        struct Cleanup {
            fs::path p;
            ~Cleanup() {
                std::error_code ec;
                fs::remove_all(p, ec);
            }
        } cleanup{dir / "tmp"};

        PrepareRequest req;
        req.repo_root = index.root;
        req.plan = instrumentation_plan(index);
        req.tests = db.tests_run;
        req.trace_log = work / "traces.jsonl";
        req.coverage_file = work / "coverage.json";
        if (runner.capabilities().needs_checkout) {
            req.repo_root = work / "checkout";
            detail::copy_tree(index.root, req.repo_root);
        }

        PrepareOutcome outcome;
        try {
            outcome = runner.prepare(req);
        } catch (const RunnerError& e) {
            throw PreparationError(std::string("runner failed: ") + e.what());
        }
        if (outcome.exit_code != 0) {
            throw PreparationError(fmt::format("runner exited with status {}: {}", outcome.exit_code,
                                               outcome.diagnostics));
        }

        try {
            if (fs::exists(req.trace_log)) {
                TraceLog log = ingest_trace_log(req.trace_log);
                for (const auto& w : log.warnings) spdlog::warn("prepare: {}", w);
                for (auto& t : log.traces) {
                    if (!t.origin_test.empty() && !non_ebt_ids.count(t.origin_test)) {
                        spdlog::warn("prepare: dropping trace from unknown or EBT test {}", t.origin_test);
                        continue;
                    }
                    db.traces.push_back(std::move(t));
                }
            }
            CoverageMap cov = read_coverage(req.coverage_file);
            for (auto& [test, methods] : cov.by_test) {
                if (!non_ebt_ids.count(test)) {
                    spdlog::warn("prepare: dropping coverage for unknown or EBT test {}", test);
                    continue;
                }
                db.coverage.by_test[test] = std::move(methods);
            }
        } catch (const json::exception& e) {
            throw PreparationError(std::string("malformed runner output: ") + e.what());
        }
    }

    save_db(db, dir);
    return db;
}

TraceLog ingest_trace_log(const fs::path& path) {
    TraceLog log;
    auto lines = detail::split_lines(detail::read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = detail::trim(lines[i]);
        if (line.empty()) continue;
        try {
            log.traces.push_back(trace_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            log.warnings.push_back(fmt::format("{}:{}: skipped malformed record ({})", path.string(), i + 1, e.what()));
        }
    }
    return log;
}

std::string trace_log_record(const StackTrace& trace) {
    return trace_to_json(trace).dump();
}

// ---- queries ---------------------------------------------------------------

bool frame_matches(const StackFrame& frame, const MethodRef& m) {
    if (!class_names_match(frame.class_name, m.class_name)) return false;
    bool name_ok = m.is_constructor
                       ? (frame.method_name == "<init>" || frame.method_name == simple_name(m.class_name))
                       : frame.method_name == m.name;
    if (!name_ok) return false;
    if (frame.file.empty()) return true;
    if (!detail::path_has_suffix(m.file, frame.file) && !detail::path_has_suffix(frame.file, m.file)) return false;
    return m.end_line == 0 || m.spans(frame.line);
}

StackTrace single_frame_trace(const ThrowTarget& target) {
    StackTrace t;
    t.frames.push_back({target.enclosing_class, target.enclosing_method.name, target.throw_loc.file,
                        target.throw_loc.line});
    t.origin_test = "<synthesized>";
    t.marker = target.marker();
    return t;
}

std::optional<StackTrace> find_trace(const PreparedDb& db, const MethodRef& mut, const ThrowTarget& target) {
    if (mut == target.enclosing_method) return single_frame_trace(target);
    std::optional<StackTrace> best;
    for (const auto& t : db.traces) {
        if (t.frames.size() < 2 || !frame_matches(t.frames.back(), target.enclosing_method)) continue;
        std::optional<std::size_t> start;
        for (std::size_t i = 0; i + 1 < t.frames.size(); ++i) {
            if (frame_matches(t.frames[i], mut)) start = i;
        }
        if (!start) continue;
        StackTrace sliced{{t.frames.begin() + static_cast<std::ptrdiff_t>(*start), t.frames.end()}, t.origin_test,
                          t.marker};
        if (!best || sliced.frames.size() < best->frames.size() ||
            (sliced.frames.size() == best->frames.size() && sliced.origin_test < best->origin_test)) {
            best = std::move(sliced);
        }
    }
    return best;
}

namespace {

struct Node {
    MethodRef ref;
    const MethodDecl* decl = nullptr;
    std::string key;  // class#method, for the no-revisit rule
};

struct Edge {
    std::size_t callee;
    int line;
};

std::string strip_type_args(std::string_view type) {
    auto lt = type.find('<');
    return simple_name(type.substr(0, lt));
}

class CallGraph {
public:
    explicit CallGraph(const RepoIndex& index) {
        for (std::size_t u = 0; u < index.units.size(); ++u) {
            if (index.roles[u] != UnitRole::Main) continue;
            const SourceUnit& unit = index.units[u];
            for (const auto& type : unit.types) {
                for (const auto& m : type.methods) {
                    Node n;
                    n.ref = make_method_ref(unit, m);
                    n.decl = &m;
                    n.key = n.ref.class_name + "#" + n.ref.name;
                    std::size_t id = nodes_.size();
                    if (m.is_constructor) ctors_[type.simple_name()].push_back(id);
                    else methods_[m.name].push_back(id);
                    nodes_.push_back(std::move(n));
                }
            }
        }
        edges_.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) build_edges(i);
    }

    [[nodiscard]] std::optional<std::size_t> find(const MethodRef& ref) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].ref == ref) return i;
        }
        return std::nullopt;
    }

    [[nodiscard]] const Node& node(std::size_t i) const { return nodes_[i]; }
    [[nodiscard]] const std::vector<Edge>& edges(std::size_t i) const { return edges_[i]; }

private:
    void build_edges(std::size_t caller) {
        std::map<std::size_t, int> first_site;  // callee -> smallest call-site line
        auto add = [&](const std::vector<std::size_t>* callees, int line) {
            if (!callees) return;
            for (auto c : *callees) {
                auto [it, inserted] = first_site.emplace(c, line);
                if (!inserted) it->second = std::min(it->second, line);
            }
        };
        const Node& n = nodes_[caller];
        for_each_stmt(n.decl->body, [&](const Stmt& s) {
            for (const auto& e : stmt_exprs(s)) {
                walk_expr(e, [&](const Expr& x) {
                    if (const auto* call = x.as<expr::MethodCall>()) {
                        if (call->name == "this" && !call->base) add(lookup(ctors_, simple_name(n.ref.class_name)), s.loc.line);
                        else if (call->name != "super") add(lookup(methods_, call->name), s.loc.line);
                    } else if (const auto* nw = x.as<expr::New>()) {
                        add(lookup(ctors_, strip_type_args(nw->type)), s.loc.line);
                    }
                });
            }
        });
        for (auto [callee, line] : first_site) edges_[caller].push_back({callee, line});
    }

    static const std::vector<std::size_t>* lookup(const std::map<std::string, std::vector<std::size_t>>& m,
                                                  const std::string& key) {
        auto it = m.find(key);
        return it == m.end() ? nullptr : &it->second;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<Edge>> edges_;
    std::map<std::string, std::vector<std::size_t>> methods_;
    std::map<std::string, std::vector<std::size_t>> ctors_;
};

StackFrame frame_for(const MethodRef& ref, int line) {
    std::string method = ref.is_constructor ? simple_name(ref.class_name) : ref.name;
    return {ref.class_name, method, ref.file, line};
}

std::string path_key(const StackTrace& t) {
    std::string out;
    for (const auto& f : t.frames) out += fmt::format("{}.{}:{}|", f.class_name, f.method_name, f.line);
    return out;
}

}  // namespace

std::vector<StackTrace> static_call_paths(const RepoIndex& index, const MethodRef& mut, const ThrowTarget& target,
                                          int max_depth, std::size_t max_paths) {
    if (max_depth < 1) throw UsageError("max_depth must be >= 1");
    if (mut == target.enclosing_method) return {single_frame_trace(target)};
    CallGraph graph(index);
    auto start = graph.find(mut);
    auto goal = graph.find(target.enclosing_method);
    if (!start || !goal) return {};

    std::vector<StackTrace> out;
    std::vector<std::pair<std::size_t, int>> stack;  // (node, call-site line in that node)
    std::unordered_set<std::string> on_path;

    // Paths with exactly `depth` edges, so shorter paths are found first.
    std::function<void(std::size_t, int, int)> dfs = [&](std::size_t node, int depth, int remaining) {
        if (out.size() >= max_paths) return;
        if (remaining == 0) {
            if (node != *goal) return;
            StackTrace t;
            for (auto [n, line] : stack) t.frames.push_back(frame_for(graph.node(n).ref, line));
            t.frames.push_back(frame_for(graph.node(node).ref, target.throw_loc.line));
            t.origin_test = "<static>";
            t.marker = target.marker();
            out.push_back(std::move(t));
            return;
        }
        if (node == *goal) return;
        for (const Edge& e : graph.edges(node)) {
            const std::string& key = graph.node(e.callee).key;
            if (on_path.count(key)) continue;
            stack.emplace_back(node, e.line);
            on_path.insert(key);
            dfs(e.callee, depth + 1, remaining - 1);
            on_path.erase(key);
            stack.pop_back();
        }
    };

    for (int d = 1; d <= max_depth && out.size() < max_paths; ++d) {
        std::size_t level_begin = out.size();
        on_path = {graph.node(*start).key};
        dfs(*start, 0, d);
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(level_begin), out.end(),
                  [](const StackTrace& a, const StackTrace& b) { return path_key(a) < path_key(b); });
    }
    return out;
}

// ---- persistence -----------------------------------------------------------

fs::path cache_dir(const fs::path& repo_root) {
    return repo_root / ".ebtforge";
}

std::string db_to_json(const PreparedDb& db) {
    json traces = json::array();
    for (const auto& t : db.traces) traces.push_back(trace_to_json(t));
    json coverage = json::object();
    for (const auto& [test, methods] : db.coverage.by_test) {
        json list = json::array();
        for (const auto& [cls, m] : methods) list.push_back(json::array({cls, m}));
        coverage[test] = std::move(list);
    }
    json j{{"schema_version", db.schema_version},
           {"created_for_commit", db.created_for_commit ? json(*db.created_for_commit) : json(nullptr)},
           {"tests_run", db.tests_run},
           {"traces", std::move(traces)},
           {"coverage", std::move(coverage)}};
    return j.dump(2) + "\n";
}

PreparedDb db_from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        PreparedDb db;
        db.schema_version = j.at("schema_version").get<int>();
        if (db.schema_version != kSchemaVersion) {
            throw Error(fmt::format("unsupported cache schema version {}", db.schema_version));
        }
        if (!j.at("created_for_commit").is_null()) db.created_for_commit = j["created_for_commit"].get<std::string>();
        db.tests_run = j.value("tests_run", std::vector<std::string>{});
        for (const auto& t : j.at("traces")) db.traces.push_back(trace_from_json(t));
        for (const auto& [test, methods] : j.at("coverage").items()) {
            auto& set = db.coverage.by_test[test];
            for (const auto& p : methods) set.emplace(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        }
        return db;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed prepared database: ") + e.what());
    }
}

void save_db(const PreparedDb& db, const fs::path& dir) {
    json meta{{"commit", db.created_for_commit ? json(*db.created_for_commit) : json(nullptr)},
              {"schema_version", db.schema_version}};
    detail::write_file_atomic(dir / "prepared.json", db_to_json(db));
    detail::write_file_atomic(dir / "prepared.meta", meta.dump(2) + "\n");
}

std::optional<PreparedDb> load_db(const fs::path& dir) {
    fs::path file = dir / "prepared.json";
    if (!fs::exists(file)) return std::nullopt;
    return db_from_json(detail::read_file(file));
}

CacheState cache_state(const fs::path& dir, const std::optional<std::string>& commit) {
    if (!fs::exists(dir / "prepared.json") || !fs::exists(dir / "prepared.meta")) return CacheState::Missing;
    try {
        json meta = json::parse(detail::read_file(dir / "prepared.meta"));
        if (meta.value("schema_version", 0) != kSchemaVersion) return CacheState::Stale;
        std::optional<std::string> recorded;
        if (meta.contains("commit") && !meta["commit"].is_null()) recorded = meta["commit"].get<std::string>();
        return recorded == commit ? CacheState::Fresh : CacheState::Stale;
    } catch (const std::exception&) {
        return CacheState::Stale;
    }
}

}  // namespace ebtforge
