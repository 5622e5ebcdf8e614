#include "ebtforge/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "ebtforge/guard_engine.hpp"
#include "subprocess.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view to_string(RunnerKind k) {
    switch (k) {
        case RunnerKind::None: return "none";
        case RunnerKind::Simulated: return "simulated";
        case RunnerKind::Command: return "command";
    }
    return "?";
}

RunnerKind runner_kind_from_string(std::string_view name) {
    if (name == "none") return RunnerKind::None;
    if (name == "simulated") return RunnerKind::Simulated;
    if (name == "command") return RunnerKind::Command;
    throw UsageError(fmt::format("unknown runner '{}' (expected none, simulated or command)", name));
}

std::string_view to_string(TraceSource s) {
    switch (s) {
        case TraceSource::Recorded: return "recorded";
        case TraceSource::Synthesized: return "synthesized";
        case TraceSource::Static: return "static";
    }
    return "?";
}

void RunConfig::validate() const {
    if (repo_path.has_value() == repo_link.has_value()) {
        throw ConfigError("exactly one of --repo_path and --repo_link is required");
    }
    if (timeout_s && !(*timeout_s > 0)) throw ConfigError("timeout must be positive");
    if (runner == RunnerKind::Simulated && runner_manifest.empty()) {
        throw ConfigError("the simulated runner needs --runner_manifest");
    }
    generator.validate();
}

// ---- repository ------------------------------------------------------------

namespace {

fs::path default_clone_root() {
    if (const char* x = std::getenv("XDG_CACHE_HOME"); x && *x) return fs::path(x) / "ebtforge" / "repos";
    if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".cache" / "ebtforge" / "repos";
    return fs::temp_directory_path() / "ebtforge-repos";
}

void git(const std::vector<std::string>& args, const fs::path& cwd) {
    std::vector<std::string> argv{"git"};
    argv.insert(argv.end(), args.begin(), args.end());
    auto r = detail::run_process(argv, cwd, {}, std::chrono::minutes(10));
    if (r.timed_out || r.exit_code != 0) {
        throw ConfigError(fmt::format("git {} failed: {}", args.front(), detail::trim(r.err)));
    }
}

std::optional<std::string> git_head(const fs::path& root) {
    if (!fs::exists(root / ".git")) return std::nullopt;
    try {
        auto r = detail::run_process({"git", "rev-parse", "HEAD"}, root);
        if (r.exit_code == 0) return std::string(detail::trim(r.out));
    } catch (const Error&) {
    }
    return std::nullopt;
}

}  // namespace

fs::path resolve_repo(const RunConfig& config) {
    if (config.repo_path) {
        std::error_code ec;
        if (!fs::is_directory(*config.repo_path, ec)) {
            throw ConfigError("repository path is not a directory: " + config.repo_path->string());
        }
        fs::path root = fs::weakly_canonical(fs::absolute(*config.repo_path));
        if (config.sha) {
            auto head = git_head(root);
            if (!head) {
                spdlog::warn("stage=resolve sha {} ignored: {} is not a git checkout", *config.sha, root.string());
            } else if (!head->starts_with(*config.sha) && !config.sha->starts_with(*head)) {
                spdlog::warn("stage=resolve analyzing the working tree at {}, not the requested {}", *head,
                             *config.sha);
            }
        }
        return root;
    }
    if (!config.repo_link || config.repo_link->empty()) throw ConfigError("no repository given");
    const std::string& link = *config.repo_link;
    std::string key = detail::hex16(detail::fnv1a64(link + "@" + config.sha.value_or("HEAD")));
    fs::path dir = config.clone_dir.value_or(default_clone_root() / key);
    if (fs::exists(dir / ".git")) {
        spdlog::info("stage=resolve reusing clone {}", dir.string());
        return fs::weakly_canonical(dir);
    }
    fs::create_directories(dir.parent_path());
    fs::path tmp = dir.parent_path() / (dir.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    try {
        if (config.sha) {
            fs::create_directories(tmp);
            git({"init", "-q"}, tmp);
            git({"fetch", "-q", "--depth", "1", link, *config.sha}, tmp);
            git({"checkout", "-q", "--detach", "FETCH_HEAD"}, tmp);
        } else {
            git({"clone", "-q", "--depth", "1", link, tmp.string()}, tmp.parent_path());
        }
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }
    fs::rename(tmp, dir);
    return fs::weakly_canonical(dir);
}

std::unique_ptr<TestRunner> make_runner(const RunConfig& config, const fs::path& repo_root) {
    switch (config.runner) {
        case RunnerKind::None: return nullptr;
        case RunnerKind::Simulated: return SimulatedRunner::from_file(config.runner_manifest);
        case RunnerKind::Command:
            return std::make_unique<CommandRunner>(commands_from_settings(load_project_settings(repo_root)));
    }
    return nullptr;
}

RepoIndex scan_with_settings(const fs::path& root) {
    RepoIndex index = scan_repo(root, apply_settings(ScanConfig{}, load_project_settings(root)));
    for (const auto& w : index.warnings) spdlog::warn("stage=scan {}", w);
    return index;
}

PrepareResult run_prepare(const RunConfig& config) {
    config.validate();
    fs::path root = resolve_repo(config);
    auto runner = make_runner(config, root);
    if (!runner) throw ConfigError("preparation needs a runner (--runner=simulated or --runner=command)");
    RepoIndex index = scan_with_settings(root);
    auto t0 = Clock::now();
    PreparedDb db = run_preparation(index, *runner);
    spdlog::info("stage=prepare tests={} traces={} ms={}", db.tests_run.size(), db.traces.size(),
                 std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count());
    return {root, std::move(db)};
}

// ---- shared generation -----------------------------------------------------

std::vector<int> distribute_samples(int total, std::size_t prompts) {
    if (prompts == 0) return {};
    std::vector<int> out(prompts, total / static_cast<int>(prompts));
    for (int i = 0; i < total % static_cast<int>(prompts); ++i) ++out[static_cast<std::size_t>(i)];
    return out;
}

std::string machine_test_class_name(const ThrowTarget& target) { return target.id() + "_Test"; }

namespace {

/// Cached preparation, auto-preparing when a runner is available.
std::optional<PreparedDb> ensure_db(const RunConfig& config, const RepoIndex& index, TestRunner* runner,
                                    std::vector<std::string>& warnings) {
    auto warn = [&](std::string msg) {
        spdlog::warn("stage=prepare {}", msg);
        warnings.push_back(std::move(msg));
    };
    const fs::path dir = cache_dir(index.root);
    switch (cache_state(dir, index.commit)) {
        case CacheState::Fresh: return load_db(dir);
        case CacheState::Stale:
            if (config.force) {
                warn("prepared cache was recorded for another commit; using it because of --force");
                return load_db(dir);
            }
            if (runner) {
                warn("prepared cache is stale; re-running preparation");
                return run_preparation(index, *runner);
            }
            warn("prepared cache is stale and no runner is available; ignoring it (use --force to accept it)");
            return std::nullopt;
        case CacheState::Missing:
            if (runner) return run_preparation(index, *runner);
            warn("no prepared cache and no runner; falling back to static call paths");
            return std::nullopt;
    }
    return std::nullopt;
}

const SourceUnit& resolve_unit(const RepoIndex& index, const std::string& given, const char* what) {
    fs::path p(given);
    std::error_code ec;
    if (p.is_absolute() || fs::exists(p, ec)) {
        std::string rel = detail::rel_path(fs::weakly_canonical(fs::absolute(p)), index.root);
        if (!rel.starts_with("..")) {
            if (const SourceUnit* u = index.find_unit(rel)) return *u;
        }
    }
    if (const SourceUnit* u = index.find_unit_by_suffix(p.lexically_normal().generic_string())) return *u;
    throw NotFoundError(fmt::format("{} file {} is not a Java source in the repository", what, given));
}

struct Generated {
    std::vector<Candidate> candidates;
    std::vector<Verdict> verdicts;  // empty when not evaluated
    std::size_t chosen = 0;
    bool best_effort = false;
    std::size_t prompts = 0;
};

struct TargetJob {
    const RepoIndex* index = nullptr;
    const PreparedDb* db = nullptr;
    const SourceUnit* mut_unit = nullptr;
    const MethodDecl* mut_decl = nullptr;
    MethodRef mut;
    ThrowTarget target;
    StackTrace trace;
    DestTestFile dest;
    std::optional<std::string> test_name;
};

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::mutex err_mu;
    std::exception_ptr first_error;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

std::string guard_text_for(const TargetJob& job) {
    try {
        return render_guard(build_guard(job.trace, *job.index, job.target));
    } catch (const AnalysisError& e) {
        spdlog::warn("stage=guard target={} {}", job.target.id(), e.what());
        return {};
    }
}

Generated generate_for(const RunConfig& config, const TargetJob& job, GenerationBackend& backend,
                       TestRunner* runner, unsigned eval_workers) {
    const RepoIndex& index = *job.index;
    ThrowSite site = locate_throw_site(*index.find_unit(job.target.throw_loc.file), job.target.throw_loc.line);

    PromptBundle bundle;
    bundle.mut_source = std::string(job.mut_unit->method_text(*job.mut_decl));
    bundle.mut_name = job.mut_decl->name;
    bundle.mut_class = job.mut.class_name;
    bundle.mut_params = job.mut_decl->params;
    bundle.mut_is_static = job.mut_decl->is_static;
    bundle.mut_is_constructor = job.mut_decl->is_constructor;
    bundle.throw_stmt = std::string(index.find_unit(job.target.throw_loc.file)->stmt_text(*site.node));
    bundle.throw_loc = job.target.throw_loc;
    bundle.trace_text = render_trace(job.trace, index);
    bundle.guard_text = guard_text_for(job);
    bundle.dest_path = job.dest.path;
    bundle.dest_content = job.dest.content;
    bundle.test_name = job.test_name;
    bundle.exception_type = job.target.exception_type;

    const int k = config.pick_best ? config.generator.n : 1;
    const int total = config.pick_best ? config.generator.n : 1;
    std::vector<const TestMethod*> exemplars;
    if (job.db) exemplars = select_relevant_tests(*job.db, index, job.mut, job.trace, k);

    PromptTemplate tmpl =
        config.prompt_template ? PromptTemplate::from_file(*config.prompt_template) : PromptTemplate::builtin();
    std::vector<Prompt> prompts = build_prompt_set(bundle, exemplars, k, tmpl, config.prompt_budget);

    Generated g;
    g.prompts = prompts.size();
    if (config.dump_prompts) {
        for (const auto& p : prompts) {
            detail::write_file_atomic(*config.dump_prompts / (prompt_hash(p.text) + ".prompt.txt"), p.text);
        }
    }
    auto counts = distribute_samples(total, prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (prompts[i].over_budget) {
            spdlog::warn("stage=context target={} prompt {} exceeds the budget", job.target.id(), i);
        }
        if (counts[i] == 0) continue;
        for (auto& c : backend.generate(prompts[i].text, bundle, counts[i], static_cast<int>(i))) {
            c.id = static_cast<int>(g.candidates.size());
            g.candidates.push_back(std::move(c));
        }
    }
    if (g.candidates.empty()) throw BackendError("backend returned no candidates");

    if (runner) {
        g.verdicts.resize(g.candidates.size());
        EvalContext ctx{index.root, runner, false};
        parallel_for(g.candidates.size(), eval_workers, [&](std::size_t i) {
            g.verdicts[i] = evaluate_candidate(g.candidates[i], job.target, job.dest, ctx);
        });
        std::vector<std::pair<Candidate, Verdict>> pairs;
        for (std::size_t i = 0; i < g.candidates.size(); ++i) pairs.emplace_back(g.candidates[i], g.verdicts[i]);
        Selection sel = select_best(pairs);
        g.chosen = sel.index;
        g.best_effort = sel.best_effort;
        return g;
    }
    auto it = std::find_if(g.candidates.begin(), g.candidates.end(), [](const Candidate& c) { return c.extractable; });
    if (it == g.candidates.end()) {
        g.best_effort = true;
        spdlog::warn("stage=select target={} no extractable candidate; emitting candidate 0 as a best-effort draft",
                     job.target.id());
    } else {
        g.chosen = static_cast<std::size_t>(it - g.candidates.begin());
    }
    return g;
}

std::string output_text(const Candidate& c) {
    std::string text = c.extractable ? c.test_source : c.raw_output;
    if (!text.ends_with('\n')) text += '\n';
    return text;
}

/// Standalone class around one generated method, carrying the imports of
/// the destination test file.
std::string wrapper_class(const std::string& package_name, const std::string& name,
                          const std::vector<std::string>& imports, const std::string& method) {
    std::set<std::string> lines(imports.begin(), imports.end());
    lines.insert("import org.junit.Test;");
    std::string out;
    if (!package_name.empty()) out += "package " + package_name + ";\n\n";
    for (const auto& l : lines) out += l + "\n";
    out += "\npublic class " + name + " {\n}\n";
    return insert_test_method(out, name, method);
}

long long ms_since(Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count();
}

}  // namespace

// ---- user view -------------------------------------------------------------

UserViewResult run_user_view(const RunConfig& config, const UserViewArgs& args) {
    config.validate();
    auto t0 = Clock::now();
    fs::path root = resolve_repo(config);
    auto runner = make_runner(config, root);
    RepoIndex index = scan_with_settings(root);
    UserViewResult result;

    const SourceUnit& mut_unit = resolve_unit(index, args.mut_file_path, "MUT");
    const MethodDecl& mut_decl = locate_method(mut_unit, args.mut_line);
    const SourceUnit& throw_unit = resolve_unit(index, args.throw_file_path, "throw");
    ThrowTarget target = locate_throw(throw_unit, args.throw_line);

    std::optional<PreparedDb> db = ensure_db(config, index, runner.get(), result.warnings);

    TargetJob job;
    job.index = &index;
    job.db = db ? &*db : nullptr;
    job.mut_unit = &mut_unit;
    job.mut_decl = &mut_decl;
    job.mut = make_method_ref(mut_unit, mut_decl);
    job.target = target;
    job.test_name = config.test_name;

    std::optional<StackTrace> trace = db ? find_trace(*db, job.mut, target) : std::nullopt;
    if (trace) {
        result.trace_source = trace->origin_test == "<synthesized>" ? TraceSource::Synthesized : TraceSource::Recorded;
    } else if (job.mut == target.enclosing_method) {
        trace = single_frame_trace(target);
        result.trace_source = TraceSource::Synthesized;
    } else {
        auto paths = static_call_paths(index, job.mut, target, 8);
        if (paths.empty()) {
            throw NoTraceError(fmt::format("no recorded trace and no static call path from {} to {}", job.mut.name,
                                           target.marker()));
        }
        std::string msg = "no recorded trace; using a static call path";
        spdlog::warn("stage=trace {}", msg);
        result.warnings.push_back(msg);
        trace = std::move(paths.front());
        result.trace_source = TraceSource::Static;
    }
    job.trace = *trace;
    result.trace = *trace;
    result.guard = guard_text_for(job);

    static const PreparedDb kEmpty;
    job.dest = args.test_context_path ? dest_from_path(index, *args.test_context_path)
                                      : resolve_dest_test_file(index, db ? *db : kEmpty, job.mut.class_name, &job.mut);
    result.dest = job.dest;

    auto backend = make_backend(config.generator);
    TestRunner* eval_runner = config.pick_best ? runner.get() : nullptr;
    Generated g = generate_for(config, job, *backend, eval_runner,
                               static_cast<unsigned>(config.generator.max_concurrency));
    result.prompts = g.prompts;
    result.chosen = g.candidates[g.chosen];
    result.best_effort = g.best_effort;
    if (!g.verdicts.empty()) result.verdict = g.verdicts[g.chosen];
    if (g.best_effort) result.warnings.emplace_back("best-effort output: no candidate reached Compiles");

    result.output = config.output_file.value_or(fs::path("output.java"));
    detail::write_file_atomic(result.output, output_text(result.chosen));
    spdlog::info("stage=user_view target={} ms={}", target.id(), ms_since(t0));
    return result;
}

// ---- machine view ----------------------------------------------------------

MachineViewResult run_machine_view(const RunConfig& config) {
    config.validate();
    const auto t0 = Clock::now();
    std::optional<Clock::time_point> deadline;
    if (config.timeout_s) {
        deadline = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*config.timeout_s));
    }

    fs::path root = resolve_repo(config);
    auto runner = make_runner(config, root);
    RepoIndex index = scan_with_settings(root);
    std::vector<std::string> warnings;
    std::optional<PreparedDb> db = ensure_db(config, index, runner.get(), warnings);
    static const PreparedDb kEmpty;
    const PreparedDb& db_ref = db ? *db : kEmpty;

    std::vector<ThrowTarget> targets = enumerate_targets(index);
    MachineViewResult result;
    result.output_dir = config.output_dir.value_or(fs::path("ebtforge-out"));

    // Collision-free class names: repeated ids get a numeric suffix.
    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (const auto& t : targets) {
        std::string name = machine_test_class_name(t);
        int n = ++seen[name];
        names.push_back(n == 1 ? name : fmt::format("{}{}", name, n));
    }

    auto backend = make_backend(config.generator);
    std::vector<TargetResult> rows(targets.size());
    std::atomic<bool> backend_failed{false};
    unsigned workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());

    parallel_for(targets.size(), workers, [&](std::size_t i) {
        const ThrowTarget& target = targets[i];
        TargetResult& row = rows[i];
        row.target_id = target.id();
        row.marker = target.marker();
        row.method = target.enclosing_method.class_name + "." + target.enclosing_method.name;
        row.exception_type = target.exception_type;
        if (deadline && Clock::now() >= *deadline) {
            row.skipped = true;
            row.skip_reason = "time budget exhausted";
            return;
        }
        auto started = Clock::now();
        try {
            const SourceUnit* unit = index.find_unit(target.enclosing_method.file);
            TargetJob job;
            job.index = &index;
            job.db = db ? &*db : nullptr;
            job.mut_unit = unit;
            job.mut_decl = &locate_method(*unit, target.enclosing_method.line);
            job.mut = target.enclosing_method;
            job.target = target;
            job.trace = single_frame_trace(target);
            job.dest = resolve_dest_test_file(index, db_ref, job.mut.class_name, &job.mut);

            Generated g = generate_for(config, job, *backend, runner.get(), 1);
            const Candidate& chosen = g.candidates[g.chosen];
            row.chosen_candidate = chosen.id;
            row.best_effort = g.best_effort;
            if (!g.verdicts.empty()) {
                row.evaluated = true;
                row.level = g.verdicts[g.chosen].level;
            }

            std::vector<std::string> imports;
            if (!job.dest.to_be_created) {
                if (const SourceUnit* du = index.find_unit(job.dest.path)) imports = du->imports;
            }
            fs::path out = result.output_dir / (names[i] + ".java");
            detail::write_file_atomic(out, wrapper_class(unit->package_name, names[i], imports, output_text(chosen)));
            row.output_path = names[i] + ".java";  // relative to the output directory
        } catch (const BackendError& e) {
            backend_failed = true;
            row.error = e.what();
            spdlog::error("stage=generate target={} {}", target.id(), e.what());
        } catch (const Error& e) {
            row.error = e.what();
            spdlog::error("stage=target target={} {}", target.id(), e.what());
        }
        row.elapsed_ms = static_cast<double>(ms_since(started));
        spdlog::info("stage=target target={} level={} ms={}", target.id(), to_string(row.level), row.elapsed_ms);
    });

    result.report = summarize(std::move(rows));
    result.backend_failed = backend_failed;
    std::string json = report_to_json(result.report, config.report_timings);
    detail::write_file_atomic(result.output_dir / "report.json", json);
    if (config.report_file) detail::write_file_atomic(*config.report_file, json);
    spdlog::info("stage=machine_view targets={} processed={} ms={}", targets.size(), result.report.processed,
                 ms_since(t0));
    return result;
}

}  // namespace ebtforge
