#include <gtest/gtest.h>

#include "ebtforge/errors.hpp"
#include "ebtforge/test_runner.hpp"
#include "ebtforge/trace_store.hpp"
#include "test_support.hpp"

namespace ebtforge {
namespace {

using testing::fixture;

constexpr const char* kScheduler = "src/main/java/com/coreoz/wisp/Scheduler.java";

class WispTraces : public ::testing::Test {
protected:
    void SetUp() override {
        index = scan_repo(fixture("wisp"), ScanConfig{});
        unit = index.find_unit(kScheduler);
        ASSERT_NE(unit, nullptr);
    }
    MethodRef method_at(int line) { return make_method_ref(*unit, locate_method(*unit, line)); }

    RepoIndex index;
    const SourceUnit* unit = nullptr;
};

TEST(IngestTraceLog, ReadsFig4aRecord) {
    auto log = ingest_trace_log(fixture("wisp_support/fig4a.jsonl"));
    ASSERT_EQ(log.traces.size(), 1u);
    EXPECT_TRUE(log.warnings.empty());
    const auto& t = log.traces[0];
    ASSERT_EQ(t.frames.size(), 3u);
    EXPECT_EQ(t.frames[1].render(), "schedule(Scheduler.java:186)");
    EXPECT_EQ(t.frames[2].render(), "prepareJob(Scheduler.java:340)");
    EXPECT_EQ(t.origin_test, "com.coreoz.wisp.SchedulerTest#should_run_a_single_job");
}

TEST(IngestTraceLog, SkipsMalformedRecords) {
    auto log = ingest_trace_log(fixture("wisp_support/fig4a_malformed.jsonl"));
    EXPECT_EQ(log.traces.size(), 1u);
    EXPECT_EQ(log.warnings.size(), 2u);
}

TEST(IngestTraceLog, MissingFileThrows) {
    EXPECT_THROW(ingest_trace_log(fixture("wisp_support/none.jsonl")), Error);
}

TEST(TraceLogRecord, RoundTrips) {
    auto log = ingest_trace_log(fixture("wisp_support/fig4a.jsonl"));
    testing::TempDir tmp;
    testing::write_text(tmp / "t.jsonl", trace_log_record(log.traces[0]) + "\n");
    EXPECT_EQ(ingest_trace_log(tmp / "t.jsonl").traces[0], log.traces[0]);
}

TEST_F(WispTraces, FindTraceSlicesAtMut) {
    PreparedDb db;
    db.traces = ingest_trace_log(fixture("wisp_support/fig4a.jsonl")).traces;
    auto target = locate_throw(*unit, 340);
    auto trace = find_trace(db, method_at(180), target);
    ASSERT_TRUE(trace);
    ASSERT_EQ(trace->frames.size(), 2u);
    EXPECT_EQ(trace->frames[0].method_name, "schedule");

    // A throw in another method matches nothing recorded.
    EXPECT_FALSE(find_trace(db, method_at(180), locate_throw(*unit, 56)));
}

TEST_F(WispTraces, FrameMatchesConstructorsAsInit) {
    StackFrame f{"com.coreoz.wisp.Scheduler", "<init>", "Scheduler.java", 56};
    EXPECT_TRUE(frame_matches(f, method_at(54)));
    f.line = 186;
    EXPECT_FALSE(frame_matches(f, method_at(54)));
}

TEST_F(WispTraces, StaticPathsFindTheCallChain) {
    auto target = locate_throw(*unit, 340);
    auto paths = static_call_paths(index, method_at(180), target, 8);
    ASSERT_FALSE(paths.empty());
    const auto& p = paths.front();
    ASSERT_EQ(p.frames.size(), 2u);
    EXPECT_EQ(p.frames[0].render(), "schedule(Scheduler.java:186)");
    EXPECT_EQ(p.frames[1].render(), "prepareJob(Scheduler.java:340)");
    EXPECT_TRUE(static_call_paths(index, method_at(54), target, 8).empty());
    EXPECT_THROW(static_call_paths(index, method_at(180), target, 0), Error);
}

TEST(PreparedDbJson, RoundTrips) {
    PreparedDb db;
    db.traces = ingest_trace_log(fixture("wisp_support/fig4a.jsonl")).traces;
    db.coverage.by_test["a.T#t"] = {{"a.C", "m"}, {"a.C", "n"}};
    db.created_for_commit = "abc123";
    db.tests_run = {"a.T#t"};
    EXPECT_EQ(db_from_json(db_to_json(db)), db);
    EXPECT_THROW(db_from_json("{\"schema_version\": 99}"), Error);
    EXPECT_THROW(db_from_json("not json"), Error);
}

TEST(CacheState, TracksCommit) {
    testing::TempDir tmp;
    EXPECT_EQ(cache_state(tmp.path(), std::string("c1")), CacheState::Missing);
    PreparedDb db;
    db.created_for_commit = "c1";
    save_db(db, tmp.path());
    EXPECT_EQ(cache_state(tmp.path(), std::string("c1")), CacheState::Fresh);
    EXPECT_EQ(cache_state(tmp.path(), std::string("c2")), CacheState::Stale);
    EXPECT_EQ(load_db(tmp.path()), db);
}

TEST(RunPreparation, ExecutesOnlyNonEbtsAndDropsEbtTraces) {
    testing::TempDir tmp;
    auto repo = testing::copy_fixture("wisp", tmp.path());
    auto index = scan_repo(repo, ScanConfig{});
    auto runner = SimulatedRunner::from_file(fixture("wisp_support/manifest.json"));
    PreparedDb db = run_preparation(index, *runner);

    auto log = runner->call_log();
    EXPECT_EQ(log.size(), index.non_ebts().size());
    for (const auto& id : log) EXPECT_NE(id, "com.coreoz.wisp.SchedulerTest#should_reject_negative_shutdown_timeout");
    for (const auto& t : db.traces)
        EXPECT_NE(t.origin_test, "com.coreoz.wisp.SchedulerTest#should_reject_negative_shutdown_timeout");
    EXPECT_FALSE(db.traces.empty());
    EXPECT_TRUE(load_db(cache_dir(repo)).has_value());
}

TEST(InstrumentationPlan, CoversEveryMainThrow) {
    auto index = scan_repo(fixture("minibank"), ScanConfig{});
    auto plan = instrumentation_plan(index);
    ASSERT_EQ(plan.size(), 6u);
    EXPECT_EQ(plan.front().marker(), "src/main/java/com/example/bank/Account.java:10");
}

}  // namespace
}  // namespace ebtforge
