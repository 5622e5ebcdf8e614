#include "ebtforge/oracle_ranker.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "java_lexer.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using detail::Tok;
using detail::Token;

std::string_view to_string(VerdictLevel l) {
    switch (l) {
        case VerdictLevel::ParsesOnly: return "ParsesOnly";
        case VerdictLevel::Compiles: return "Compiles";
        case VerdictLevel::Runs: return "Runs";
        case VerdictLevel::CoversTarget: return "CoversTarget";
    }
    return "?";
}

std::optional<VerdictLevel> verdict_level_from_string(std::string_view s) {
    for (auto l : {VerdictLevel::ParsesOnly, VerdictLevel::Compiles, VerdictLevel::Runs, VerdictLevel::CoversTarget}) {
        if (to_string(l) == s) return l;
    }
    return std::nullopt;
}

Verdict verdict_from_outcome(const EvalOutcome& outcome, const std::string& target_marker) {
    Verdict v;
    v.diagnostics = outcome.diagnostics;
    v.marker_hits = outcome.markers;
    if (!outcome.compiled) return v;
    v.level = VerdictLevel::Compiles;
    if (!outcome.passed) return v;
    v.level = VerdictLevel::Runs;
    if (std::find(v.marker_hits.begin(), v.marker_hits.end(), target_marker) != v.marker_hits.end()) {
        v.level = VerdictLevel::CoversTarget;
    }
    return v;
}

std::string test_method_name(std::string_view test_source) {
    auto t = detail::lex_java(test_source);
    int parens = 0;
    for (std::size_t i = 0; t[i].kind != Tok::End; ++i) {
        if (t[i].is_op("@")) {
            // Skip the annotation name and its argument list.
            ++i;
            while (t[i].kind == Tok::Ident && t[i + 1].is_op(".")) i += 2;
            if (t[i + 1].is_op("(")) {
                ++i;
                for (parens = 0; t[i].kind != Tok::End; ++i) {
                    if (t[i].is_op("(")) ++parens;
                    if (t[i].is_op(")") && --parens == 0) break;
                }
            }
            continue;
        }
        if (t[i].is_op("{")) break;
        if (t[i].is_op("(") && i > 0 && t[i - 1].kind == Tok::Ident && !detail::is_java_keyword(t[i - 1].text)) {
            return std::string(t[i - 1].text);
        }
    }
    return {};
}

namespace {

std::string indent(std::string_view text, std::string_view by) {
    std::string out;
    auto lines = detail::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += '\n';
        if (!detail::trim(lines[i]).empty()) out.append(by).append(lines[i]);
    }
    return out;
}

/// Byte offset of the '}' closing the top-level type `simple`, or npos.
std::size_t closing_brace_of(std::string_view src, std::string_view simple) {
    auto t = detail::lex_java(src);
    int depth = 0;
    for (std::size_t i = 0; t[i].kind != Tok::End; ++i) {
        if (t[i].is_op("{")) ++depth;
        if (t[i].is_op("}")) --depth;
        bool type_kw = t[i].is("class") || t[i].is("interface") || t[i].is("enum") || t[i].is("record");
        if (depth != 0 || !type_kw || t[i + 1].text != simple) continue;
        std::size_t j = i + 2;
        while (t[j].kind != Tok::End && !t[j].is_op("{")) ++j;
        int d = 0;
        for (; t[j].kind != Tok::End; ++j) {
            if (t[j].is_op("{")) ++d;
            if (t[j].is_op("}") && --d == 0) return t[j].begin;
        }
        return std::string_view::npos;
    }
    return std::string_view::npos;
}

}  // namespace

std::string insert_test_method(std::string_view class_source, std::string_view simple_class, std::string_view method) {
    std::string body = indent(method, "    ");
    std::size_t close = closing_brace_of(class_source, simple_class);
    if (close == std::string_view::npos) close = class_source.rfind('}');
    if (close == std::string_view::npos) return std::string(class_source) + "\n" + std::string(method) + "\n";

    std::size_t line_start = class_source.rfind('\n', close);
    line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
    bool brace_alone = detail::trim(class_source.substr(line_start, close - line_start)).empty();

    std::string out(class_source.substr(0, brace_alone ? line_start : close));
    if (!brace_alone) out += '\n';
    std::string_view before = detail::trim(out);
    if (!before.empty() && before.back() != '{' && !out.ends_with("\n\n")) out += '\n';
    out += body;
    out += '\n';
    out.append(class_source.substr(brace_alone ? line_start : close));
    return out;
}

Verdict evaluate_candidate(const Candidate& candidate, const ThrowTarget& target, const DestTestFile& dest,
                           const EvalContext& ctx) {
    if (!candidate.extractable) {
        Verdict v;
        v.diagnostics = candidate.error.empty() ? "no test method could be extracted" : candidate.error;
        return v;
    }
    if (ctx.runner == nullptr) throw UsageError("evaluate_candidate needs a runner");

    fs::path scratch = ctx.repo_root / ".ebtforge" / "scratch" / target.id() / std::to_string(candidate.id);
    std::error_code ec;
    fs::remove_all(scratch, ec);
    fs::create_directories(scratch);
    struct Cleanup {
        const fs::path& dir;
        bool keep;
        ~Cleanup() {
            if (keep) return;
            std::error_code e;
            fs::remove_all(dir, e);
        }
    } cleanup{scratch, ctx.keep_scratch};

    if (ctx.runner->capabilities().needs_checkout) detail::copy_tree(ctx.repo_root, scratch);

    std::string simple = dest.class_name.substr(dest.class_name.rfind('.') + 1);
    fs::path test_file = scratch / dest.path;
    detail::write_file_atomic(test_file, insert_test_method(dest.content, simple, candidate.test_source));

    EvalRequest req;
    req.workdir = scratch;
    req.test_file = test_file;
    req.test_class = dest.class_name;
    req.test_method = test_method_name(candidate.test_source);
    req.candidate_source = candidate.test_source;

    EvalOutcome outcome;
    try {
        outcome = ctx.runner->evaluate(req);
    } catch (const RunnerError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunnerError(fmt::format("runner {} failed on {}#{}: {}", ctx.runner->name(), target.id(), candidate.id,
                                      e.what()));
    }
    return verdict_from_outcome(outcome, target.marker());
}

Selection select_best(const std::vector<std::pair<Candidate, Verdict>>& pairs) {
    if (pairs.empty()) throw UsageError("select_best needs at least one candidate");
    Selection sel;
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        const auto& [c, v] = pairs[i];
        const auto& [bc, bv] = pairs[sel.index];
        if (v.level > bv.level || (v.level == bv.level && c.id < bc.id)) sel.index = i;
    }
    if (pairs[sel.index].second.level == VerdictLevel::ParsesOnly) {
        sel.best_effort = true;
        spdlog::warn("no candidate compiled; emitting candidate {} as a best-effort draft", pairs[sel.index].first.id);
    }
    return sel;
}

// ---- report ----------------------------------------------------------------

namespace {

double pct(std::size_t n, std::size_t d) { return d == 0 ? 0.0 : 100.0 * static_cast<double>(n) / static_cast<double>(d); }

}  // namespace

double Report::compilable_pct() const { return pct(compilable, processed); }
double Report::runnable_pct() const { return pct(runnable, processed); }
double Report::throw_cov_pct() const { return pct(throw_cov, processed); }

Report summarize(std::vector<TargetResult> rows) {
    Report r;
    for (const auto& row : rows) {
        if (row.skipped) {
            ++r.skipped;
            continue;
        }
        ++r.processed;
        if (row.level >= VerdictLevel::Compiles) ++r.compilable;
        if (row.level >= VerdictLevel::Runs) ++r.runnable;
        if (row.level >= VerdictLevel::CoversTarget) ++r.throw_cov;
    }
    r.rows = std::move(rows);
    return r;
}

namespace {

/// One decimal, so that JSON and text agree and stay byte-stable.
double round1(double v) { return static_cast<double>(static_cast<long long>(v * 10.0 + 0.5)) / 10.0; }

}  // namespace

std::string report_to_json(const Report& report, bool include_timings) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["report_version"] = Report::kVersion;
    j["throw_cov_rule"] = "target marker observed in a passing run";
    j["targets"] = report.rows.size();
    j["processed"] = report.processed;
    j["skipped"] = report.skipped;
    j["compilable"] = report.compilable;
    j["runnable"] = report.runnable;
    j["throw_cov"] = report.throw_cov;
    j["compilable_pct"] = round1(report.compilable_pct());
    j["runnable_pct"] = round1(report.runnable_pct());
    j["throw_cov_pct"] = round1(report.throw_cov_pct());
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json o;
        o["target"] = row.target_id;
        o["marker"] = row.marker;
        o["method"] = row.method;
        o["exception"] = row.exception_type;
        o["status"] = row.skipped ? "skipped" : "processed";
        if (row.skipped) o["skip_reason"] = row.skip_reason;
        o["evaluated"] = row.evaluated;
        o["candidate"] = row.chosen_candidate ? ordered_json(*row.chosen_candidate) : ordered_json(nullptr);
        o["level"] = row.skipped ? ordered_json(nullptr) : ordered_json(std::string(to_string(row.level)));
        o["best_effort"] = row.best_effort;
        o["output"] = row.output_path;
        if (!row.error.empty()) o["error"] = row.error;
        if (include_timings) o["ms"] = row.elapsed_ms;
        rows.push_back(std::move(o));
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

std::string report_to_text(const Report& report, bool include_timings) {
    std::string out = fmt::format("{:<32} {:<12} {:>9} {:<13}", "target", "status", "candidate", "level");
    if (include_timings) out += fmt::format(" {:>10}", "ms");
    out += '\n';
    for (const auto& row : report.rows) {
        std::string cand = row.chosen_candidate ? std::to_string(*row.chosen_candidate) : "-";
        std::string level = row.skipped ? "-" : std::string(to_string(row.level));
        if (row.best_effort) level += "*";
        out += fmt::format("{:<32} {:<12} {:>9} {:<13}", row.target_id, row.skipped ? "skipped" : "processed", cand,
                           level);
        if (include_timings) out += fmt::format(" {:>10.1f}", row.elapsed_ms);
        out += '\n';
    }
    out += fmt::format("Compilable% {:5.1f} ({}/{})\n", round1(report.compilable_pct()), report.compilable,
                       report.processed);
    out += fmt::format("Runnable%   {:5.1f} ({}/{})\n", round1(report.runnable_pct()), report.runnable,
                       report.processed);
    out += fmt::format("ThrowCov%   {:5.1f} ({}/{})\n", round1(report.throw_cov_pct()), report.throw_cov,
                       report.processed);
    if (report.skipped > 0) out += fmt::format("skipped: {}\n", report.skipped);
    return out;
}

}  // namespace ebtforge
