#include <gtest/gtest.h>

#include <algorithm>

#include "ebtforge/errors.hpp"
#include "ebtforge/repo_scanner.hpp"
#include "test_support.hpp"

namespace ebtforge {
namespace {

using testing::fixture;

std::vector<std::string> markers(const std::vector<ThrowTarget>& ts) {
    std::vector<std::string> out;
    for (const auto& t : ts) out.push_back(t.marker());
    return out;
}

TEST(ScanRepo, ClassifiesMinibankTests) {
    auto index = scan_repo(fixture("minibank"), ScanConfig{});
    EXPECT_EQ(index.units.size(), 5u);
    ASSERT_EQ(index.tests.size(), 4u);
    EXPECT_EQ(index.non_ebts().size(), 3u);
    const auto* ebt = index.find_test("com.example.bank.LedgerTest#rejects_missing_account");
    ASSERT_NE(ebt, nullptr);
    EXPECT_EQ(ebt->kind, TestKind::EBT);
    EXPECT_TRUE(index.warnings.empty());
}

TEST(ScanRepo, EnumeratesPublicThrowsOnly) {
    auto index = scan_repo(fixture("minibank"), ScanConfig{});
    const std::string base = "src/main/java/com/example/bank/";
    std::vector<std::string> expected = {base + "Account.java:10", base + "Account.java:25",
                                         base + "Account.java:33", base + "Ledger.java:12",
                                         base + "RateTable.java:17"};
    EXPECT_EQ(markers(enumerate_targets(index)), expected);
    auto all = markers(all_throw_targets(index));
    EXPECT_EQ(all.size(), 6u);
    EXPECT_NE(std::find(all.begin(), all.end(), base + "Account.java:41"), all.end());
}

TEST(ScanRepo, MissingRootsIsConfigError) {
    testing::TempDir tmp;
    EXPECT_THROW(scan_repo(tmp.path(), ScanConfig{}), ConfigError);
}

TEST(ScanRepo, ExcludeGlobsSkipFiles) {
    ScanConfig cfg;
    cfg.exclude = {"*/RateTable.java"};
    auto index = scan_repo(fixture("minibank"), cfg);
    EXPECT_EQ(enumerate_targets(index).size(), 4u);
}

TEST(ProjectSettings, OverrideRoots) {
    testing::TempDir tmp;
    testing::write_text(tmp / ".ebtforge.toml",
                        "# layout\nmain_roots = [\"lib\"]\ntest_roots = \"spec\"\nexclude = a/*, b/*\n");
    auto settings = load_project_settings(tmp.path());
    auto cfg = apply_settings(ScanConfig{}, settings);
    EXPECT_EQ(cfg.main_roots, std::vector<std::string>{"lib"});
    EXPECT_EQ(cfg.test_roots, std::vector<std::string>{"spec"});
    EXPECT_EQ(cfg.exclude, (std::vector<std::string>{"a/*", "b/*"}));
}

TEST(PackageFromPath, StripsRootAndFile) {
    EXPECT_EQ(package_from_path("src/main/java/com/acme/A.java", "src/main/java"), "com.acme");
    EXPECT_EQ(package_from_path("src/main/java/A.java", "src/main/java"), "");
}

}  // namespace
}  // namespace ebtforge
