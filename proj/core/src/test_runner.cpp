#include "ebtforge/test_runner.hpp"

#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ebtforge/errors.hpp"
#include "subprocess.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- simulated -------------------------------------------------------------

struct SimulatedRunner::Manifest {
    struct Test {
        std::vector<StackTrace> traces;
        std::vector<std::pair<std::string, std::string>> covers;
    };
    struct Verdict {
        bool compiles = false;
        bool runs = false;
        std::vector<std::string> markers;
        std::string diagnostics;
    };
    int exit_code = 0;
    std::string diagnostics;
    std::map<std::string, Test> tests;
    std::map<std::string, Verdict> candidates;
};

SimulatedRunner::SimulatedRunner(const std::string& manifest_json) : manifest_(std::make_unique<Manifest>()) {
    try {
        json j = json::parse(manifest_json);
        if (j.contains("prepare")) {
            const json& p = j["prepare"];
            manifest_->exit_code = p.value("exit_code", 0);
            manifest_->diagnostics = p.value("diagnostics", std::string());
            const json tests = p.value("tests", json::object());
            for (const auto& [id, t] : tests.items()) {
                Manifest::Test test;
                const json traces = t.value("traces", json::array());
                for (const auto& tr : traces) {
                    StackTrace trace;
                    trace.origin_test = id;
                    trace.marker = tr.value("marker", std::string());
                    for (const auto& f : tr.at("frames")) {
                        trace.frames.push_back({f.at("class").get<std::string>(), f.at("method").get<std::string>(),
                                                f.value("file", std::string()), f.at("line").get<int>()});
                    }
                    test.traces.push_back(std::move(trace));
                }
                const json covers = t.value("covers", json::array());
                for (const auto& c : covers) {
                    test.covers.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
                }
                manifest_->tests.emplace(id, std::move(test));
            }
        }
        const json candidates = j.value("candidates", json::object());
        for (const auto& [hash, v] : candidates.items()) {
            Manifest::Verdict verdict;
            verdict.compiles = v.value("compiles", false);
            verdict.runs = v.value("runs", false);
            verdict.markers = v.value("markers", std::vector<std::string>{});
            verdict.diagnostics = v.value("diagnostics", std::string());
            manifest_->candidates.emplace(hash, std::move(verdict));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed runner manifest: ") + e.what());
    }
}

SimulatedRunner::~SimulatedRunner() = default;

std::unique_ptr<SimulatedRunner> SimulatedRunner::from_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("runner manifest not found: " + path.string());
    return std::make_unique<SimulatedRunner>(detail::read_file(path));
}

PrepareOutcome SimulatedRunner::prepare(const PrepareRequest& request) {
    if (manifest_->exit_code != 0) return {manifest_->exit_code, manifest_->diagnostics};
    std::string log;
    json coverage = json::object();
    for (const auto& id : request.tests) {
        {
            std::lock_guard lock(mu_);
            call_log_.push_back(id);
        }
        auto it = manifest_->tests.find(id);
        if (it == manifest_->tests.end()) continue;
        for (const auto& t : it->second.traces) log += trace_log_record(t) + "\n";
        json covers = json::array();
        for (const auto& [cls, m] : it->second.covers) covers.push_back(json::array({cls, m}));
        coverage[id] = std::move(covers);
    }
    detail::write_file_atomic(request.trace_log, log);
    detail::write_file_atomic(request.coverage_file, coverage.dump(2));
    return {0, manifest_->diagnostics};
}

EvalOutcome SimulatedRunner::evaluate(const EvalRequest& request) {
    EvalOutcome out;
    std::string hash = detail::hex16(detail::fnv1a64(request.candidate_source));
    auto it = manifest_->candidates.find(hash);
    if (it == manifest_->candidates.end()) {
        out.diagnostics = "simulated runner: no manifest entry for candidate " + hash;
        return out;
    }
    const auto& v = it->second;
    out.compiled = v.compiles;
    out.passed = v.compiles && v.runs;
    if (out.passed) out.markers = v.markers;
    out.diagnostics = v.diagnostics;
    return out;
}

std::vector<std::string> SimulatedRunner::call_log() const {
    std::lock_guard lock(mu_);
    return call_log_;
}

// ---- command ---------------------------------------------------------------

RunnerCommands commands_from_settings(const ProjectSettings& settings) {
    RunnerCommands c;
    auto get = [&](const char* key, std::string& dst) {
        auto it = settings.find(key);
        if (it != settings.end() && !it->second.empty()) dst = it->second.front();
    };
    get("prepare_command", c.prepare);
    get("compile_command", c.compile);
    get("test_command", c.test);
    if (auto it = settings.find("command_timeout_ms"); it != settings.end() && !it->second.empty()) {
        try {
            c.timeout = std::chrono::milliseconds(std::stoll(it->second.front()));
        } catch (const std::exception&) {
            throw ConfigError("command_timeout_ms must be an integer");
        }
    }
    return c;
}

std::vector<std::string> parse_markers(std::string_view output) {
    std::vector<std::string> out;
    for (const auto& line : detail::split_lines(output)) {
        std::string_view l = detail::trim(line);
        if (l.starts_with(kMarkerPrefix)) out.emplace_back(detail::trim(l.substr(kMarkerPrefix.size())));
    }
    return out;
}

namespace {

std::string expand(std::string tmpl, const std::map<std::string, std::string>& vars) {
    for (const auto& [k, v] : vars) {
        std::string key = "{" + k + "}";
        for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + v.size())) {
            tmpl.replace(pos, key.size(), v);
        }
    }
    return tmpl;
}

std::string tail(const std::string& s, std::size_t n = 4000) {
    return s.size() <= n ? s : s.substr(s.size() - n);
}

}  // namespace

PrepareOutcome CommandRunner::prepare(const PrepareRequest& request) {
    json plan = json::array();
    for (const auto& p : request.plan) {
        plan.push_back({{"file", p.file}, {"class", p.class_name}, {"method", p.method}, {"line", p.throw_line},
                        {"marker", p.marker()}});
    }
    fs::path plan_file = request.trace_log.parent_path() / "plan.json";
    detail::write_file_atomic(plan_file, plan.dump(2));

    std::string tests;
    for (const auto& t : request.tests) {
        if (!tests.empty()) tests += ",";
        tests += t;
    }
    std::string cmd = expand(commands_.prepare, {{"tests", tests}});
    auto r = detail::run_shell(cmd, request.repo_root,
                               {{"EBTFORGE_PLAN", plan_file.string()},
                                {"EBTFORGE_TRACE_LOG", request.trace_log.string()},
                                {"EBTFORGE_COVERAGE", request.coverage_file.string()}},
                               commands_.timeout);
    if (r.timed_out) return {124, "preparation timed out: " + cmd};
    return {r.exit_code, tail(r.err.empty() ? r.out : r.err)};
}

EvalOutcome CommandRunner::evaluate(const EvalRequest& request) {
    EvalOutcome out;
    auto compile = detail::run_shell(commands_.compile, request.workdir, {}, commands_.timeout);
    if (compile.timed_out || compile.exit_code != 0) {
        out.diagnostics = compile.timed_out ? "compile timed out" : tail(compile.out + compile.err);
        return out;
    }
    out.compiled = true;
    std::string cmd = expand(commands_.test, {{"class", request.test_class}, {"method", request.test_method}});
    auto run = detail::run_shell(cmd, request.workdir, {}, commands_.timeout);
    out.passed = !run.timed_out && run.exit_code == 0;
    out.markers = parse_markers(run.out);
    if (!out.passed) out.diagnostics = run.timed_out ? "test timed out" : tail(run.out + run.err);
    return out;
}

}  // namespace ebtforge
