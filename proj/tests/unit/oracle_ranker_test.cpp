#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "ebtforge/errors.hpp"
#include "ebtforge/oracle_ranker.hpp"
#include "test_support.hpp"

namespace ebtforge {
namespace {

using testing::fixture;

std::pair<Candidate, Verdict> pair_of(int id, VerdictLevel level) {
    Candidate c;
    c.id = id;
    Verdict v;
    v.level = level;
    return {c, v};
}

TEST(VerdictFromOutcome, FollowsTheLattice) {
    const std::string marker = "src/A.java:3";
    EXPECT_EQ(verdict_from_outcome({false, false, {}, ""}, marker).level, VerdictLevel::ParsesOnly);
    EXPECT_EQ(verdict_from_outcome({true, false, {marker}, ""}, marker).level, VerdictLevel::Compiles);
    EXPECT_EQ(verdict_from_outcome({true, true, {}, ""}, marker).level, VerdictLevel::Runs);
    EXPECT_EQ(verdict_from_outcome({true, true, {"src/A.java:9"}, ""}, marker).level, VerdictLevel::Runs);
    EXPECT_EQ(verdict_from_outcome({true, true, {marker}, ""}, marker).level, VerdictLevel::CoversTarget);
}

TEST(SelectBest, HighestLevelThenLowestId) {
    std::vector<std::pair<Candidate, Verdict>> ps = {pair_of(2, VerdictLevel::Runs), pair_of(1, VerdictLevel::Compiles),
                                                     pair_of(3, VerdictLevel::Runs)};
    auto s = select_best(ps);
    EXPECT_EQ(s.index, 0u);
    EXPECT_FALSE(s.best_effort);
    ps.push_back(pair_of(0, VerdictLevel::Runs));
    EXPECT_EQ(select_best(ps).index, 3u);
}

TEST(SelectBest, AllParsesOnlyIsBestEffort) {
    std::vector<std::pair<Candidate, Verdict>> ps = {pair_of(1, VerdictLevel::ParsesOnly),
                                                     pair_of(0, VerdictLevel::ParsesOnly)};
    auto s = select_best(ps);
    EXPECT_EQ(s.index, 1u);
    EXPECT_TRUE(s.best_effort);
    EXPECT_THROW(select_best({}), UsageError);
}

TEST(Summarize, CountsCumulativeLevels) {
    std::vector<TargetResult> rows(6);
    rows[0].level = VerdictLevel::CoversTarget;
    rows[1].level = VerdictLevel::Runs;
    rows[2].level = VerdictLevel::Compiles;
    rows[3].level = VerdictLevel::ParsesOnly;
    rows[4].level = VerdictLevel::CoversTarget;
    rows[5].skipped = true;
    auto r = summarize(rows);
    EXPECT_EQ(r.processed, 5u);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_EQ(r.compilable, 4u);
    EXPECT_EQ(r.runnable, 3u);
    EXPECT_EQ(r.throw_cov, 2u);
    EXPECT_DOUBLE_EQ(r.throw_cov_pct(), 40.0);
    EXPECT_DOUBLE_EQ(summarize({}).compilable_pct(), 0.0);
}

TEST(ReportJson, StableAndTimingFree) {
    std::vector<TargetResult> rows(1);
    rows[0].target_id = "A_L3";
    rows[0].elapsed_ms = 12.5;
    auto r = summarize(rows);
    auto j = nlohmann::json::parse(report_to_json(r));
    EXPECT_EQ(j.at("report_version"), Report::kVersion);
    EXPECT_FALSE(j.at("rows")[0].contains("ms"));
    EXPECT_TRUE(nlohmann::json::parse(report_to_json(r, true)).at("rows")[0].contains("ms"));
    EXPECT_EQ(report_to_json(r), report_to_json(summarize(rows)));
}

TEST(InsertTestMethod, IndentsBeforeClosingBrace) {
    std::string cls = "package a;\n\npublic class CTest {\n\n    @Test\n    public void old() {\n    }\n}\n";
    std::string out = insert_test_method(cls, "CTest", "@Test\npublic void added() {\n    go();\n}");
    EXPECT_EQ(out,
              "package a;\n\npublic class CTest {\n\n    @Test\n    public void old() {\n    }\n\n    @Test\n    public "
              "void added() {\n        go();\n    }\n}\n");
    EXPECT_EQ(test_method_name("@Test\npublic void added() {\n}"), "added");
}

class MinibankEval : public ::testing::Test {
protected:
    void SetUp() override {
        repo = testing::copy_fixture("minibank", tmp.path());
        index = scan_repo(repo, ScanConfig{});
        unit = index.find_unit("src/main/java/com/example/bank/Account.java");
        target = locate_throw(*unit, 25);
        dest = resolve_dest_test_file(index, PreparedDb{}, "com.example.bank.Account");
    }

    SimulatedRunner runner_for(const std::string& source, bool compiles, bool runs, std::vector<std::string> markers) {
        nlohmann::json m;
        m["candidates"][prompt_hash(source)] = {{"compiles", compiles}, {"runs", runs}, {"markers", markers}};
        return SimulatedRunner(m.dump());
    }

    testing::TempDir tmp;
    std::filesystem::path repo;
    RepoIndex index;
    const SourceUnit* unit = nullptr;
    ThrowTarget target;
    DestTestFile dest;
    const std::string src = "@Test(expected = IllegalArgumentException.class)\npublic void t() {\n    new Account(\"a\").deposit(0);\n}";
};

TEST_F(MinibankEval, CoveringCandidateLeavesTreeUntouched) {
    std::string before = testing::repo_tree_hash(repo);
    auto runner = runner_for(src, true, true, {target.marker()});
    auto v = evaluate_candidate(make_candidate(0, 0, src), target, dest, {repo, &runner, false});
    EXPECT_EQ(v.level, VerdictLevel::CoversTarget);
    EXPECT_EQ(testing::repo_tree_hash(repo), before);
    EXPECT_FALSE(std::filesystem::exists(repo / ".ebtforge/scratch" / target.id() / "0"));
}

TEST_F(MinibankEval, OtherThrowOnlyRuns) {
    auto runner = runner_for(src, true, true, {"src/main/java/com/example/bank/Account.java:10"});
    EXPECT_EQ(evaluate_candidate(make_candidate(0, 0, src), target, dest, {repo, &runner, false}).level,
              VerdictLevel::Runs);
}

TEST_F(MinibankEval, UnknownCandidateDoesNotCompile) {
    auto runner = runner_for("something else", true, true, {});
    EXPECT_EQ(evaluate_candidate(make_candidate(0, 0, src), target, dest, {repo, &runner, false}).level,
              VerdictLevel::ParsesOnly);
}

TEST_F(MinibankEval, UnextractableSkipsTheRunner) {
    auto runner = runner_for(src, true, true, {target.marker()});
    auto v = evaluate_candidate(make_candidate(0, 0, "sorry"), target, dest, {repo, &runner, false});
    EXPECT_EQ(v.level, VerdictLevel::ParsesOnly);
}

}  // namespace
}  // namespace ebtforge
