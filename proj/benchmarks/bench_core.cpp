#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ebtforge/context_assembler.hpp"
#include "ebtforge/generation_backend.hpp"
#include "ebtforge/guard_engine.hpp"
#include "ebtforge/repo_scanner.hpp"
#include "ebtforge/trace_store.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ebtforge;

const fs::path kFixtures = EBTFORGE_FIXTURES_DIR;
constexpr const char* kScheduler = "src/main/java/com/coreoz/wisp/Scheduler.java";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void BM_ParseCompilationUnit(benchmark::State& state) {
    std::string text = slurp(kFixtures / "wisp" / kScheduler);
    for (auto _ : state) benchmark::DoNotOptimize(parse_compilation_unit(text, kScheduler));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseCompilationUnit);

void BM_ScanRepo(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(scan_repo(kFixtures / "wisp", ScanConfig{}));
}
BENCHMARK(BM_ScanRepo);

struct GuardSetup {
    RepoIndex index = scan_repo(kFixtures / "wisp", ScanConfig{});
    const SourceUnit* unit = index.find_unit(kScheduler);
    ThrowTarget target = locate_throw(*unit, 340);
    StackTrace trace;

    GuardSetup() {
        PreparedDb db;
        db.traces = ingest_trace_log(kFixtures / "wisp_support/fig4a.jsonl").traces;
        trace = *find_trace(db, make_method_ref(*unit, locate_method(*unit, 180)), target);
    }
};

void BM_BuildGuard(benchmark::State& state) {
    GuardSetup s;
    for (auto _ : state) benchmark::DoNotOptimize(render_guard(build_guard(s.trace, s.index, s.target)));
}
BENCHMARK(BM_BuildGuard);

void BM_BuildPrompt(benchmark::State& state) {
    GuardSetup s;
    PromptBundle b;
    const auto& m = locate_method(*s.unit, 180);
    b.mut_source = std::string(s.unit->method_text(m));
    b.mut_name = m.name;
    b.mut_class = "com.coreoz.wisp.Scheduler";
    b.throw_stmt = std::string(s.unit->line_text(340));
    b.throw_loc = s.target.throw_loc;
    b.trace_text = render_trace(s.trace, s.index);
    b.guard_text = render_guard(build_guard(s.trace, s.index, s.target));
    b.exception_type = s.target.exception_type;
    auto dest = resolve_dest_test_file(s.index, PreparedDb{}, b.mut_class);
    b.dest_path = dest.path;
    b.dest_content = dest.content;
    auto tmpl = PromptTemplate::builtin();
    for (auto _ : state) benchmark::DoNotOptimize(build_prompt(b, tmpl));
}
BENCHMARK(BM_BuildPrompt);

void BM_ExtractTestMethod(benchmark::State& state) {
    std::string raw = "Sure, here is the test.\n```java\n" + slurp(kFixtures / "wisp_support/fig1b.txt") + "```\n";
    for (auto _ : state) benchmark::DoNotOptimize(extract_test_method(raw));
}
BENCHMARK(BM_ExtractTestMethod);

}  // namespace

BENCHMARK_MAIN();
