#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ebtforge/errors.hpp"
#include "ebtforge/generation_backend.hpp"
#include "test_support.hpp"
#include "util.hpp"

namespace ebtforge {
namespace {

TEST(Fnv1a64, KnownVectors) {
    EXPECT_EQ(prompt_hash(""), "cbf29ce484222325");
    EXPECT_EQ(prompt_hash("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(prompt_hash("foobar"), "85944171f73967e8");
}

TEST(ExtractTestMethod, StripsFencesAndProse) {
    std::string raw =
        "Here is a test:\n```java\n@Test(expected = IllegalStateException.class)\npublic void t() {\n"
        "    new C().m();\n}\n```\nIt triggers the throw.";
    auto m = extract_test_method(raw);
    ASSERT_TRUE(m);
    EXPECT_EQ(*m, "@Test(expected = IllegalStateException.class)\npublic void t() {\n    new C().m();\n}");
}

TEST(ExtractTestMethod, FirstAnnotatedMethodWins) {
    std::string raw =
        "class X {\n    @Test\n    public void first() {\n        a();\n    }\n\n    @Test\n    public void second() "
        "{\n        b();\n    }\n}\n";
    auto m = extract_test_method(raw);
    ASSERT_TRUE(m);
    EXPECT_EQ(*m, "@Test\npublic void first() {\n    a();\n}");
}

TEST(ExtractTestMethod, BareMethodKeepsSignature) {
    auto m = extract_test_method("public void t() throws Exception {\n    if (x) { y(); }\n}\n");
    ASSERT_TRUE(m);
    EXPECT_EQ(*m, "public void t() throws Exception {\n    if (x) { y(); }\n}");
}

TEST(ExtractTestMethod, ProseIsUnextractable) {
    EXPECT_FALSE(extract_test_method("I cannot write this test."));
    EXPECT_FALSE(extract_test_method(""));
    auto c = make_candidate(3, 1, "no code here");
    EXPECT_FALSE(c.extractable);
    EXPECT_TRUE(c.test_source.empty());
    EXPECT_EQ(c.id, 3);
}

// Any extracted text is brace-balanced, whatever surrounds it.
TEST(ExtractTestMethod, ResultIsBraceBalanced) {
    std::mt19937 rng(11);
    const std::string alphabet = "{}(); \n@Test void x";
    for (int i = 0; i < 2000; ++i) {
        std::string raw;
        int len = std::uniform_int_distribution<int>(0, 60)(rng);
        for (int j = 0; j < len; ++j)
            raw += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
        auto m = extract_test_method(raw);
        if (!m) continue;
        int depth = 0;
        bool negative = false;
        for (char ch : *m) {
            depth += ch == '{' ? 1 : ch == '}' ? -1 : 0;
            negative = negative || depth < 0;
        }
        ASSERT_FALSE(negative) << raw;
        ASSERT_EQ(depth, 0) << raw;
    }
}

TEST(ReplayBackend, ReadsPerSampleFilesWithFallback) {
    testing::TempDir tmp;
    std::string prompt = "the prompt";
    std::string h = prompt_hash(prompt);
    testing::write_text(tmp / (h + ".txt"), "@Test\npublic void zero() {\n}\n");
    testing::write_text(tmp / (h + ".1.txt"), "@Test\npublic void one() {\n}\n");
    ReplayBackend backend(tmp.path());
    auto cands = backend.generate(prompt, PromptBundle{}, 3, 0);
    ASSERT_EQ(cands.size(), 3u);
    EXPECT_NE(cands[0].test_source.find("zero"), std::string::npos);
    EXPECT_NE(cands[1].test_source.find("one"), std::string::npos);
    EXPECT_NE(cands[2].test_source.find("zero"), std::string::npos);
    EXPECT_EQ(cands[2].id, 2);
}

TEST(ReplayBackend, MissingFixtureIsBackendError) {
    testing::TempDir tmp;
    ReplayBackend backend(tmp.path());
    EXPECT_THROW(backend.generate("unseen", PromptBundle{}, 1, 0), BackendError);
}

TEST(TemplateBackend, ConstructorTargetUsesNew) {
    PromptBundle b;
    b.mut_class = "com.coreoz.wisp.Scheduler";
    b.mut_name = "Scheduler";
    b.mut_is_constructor = true;
    b.mut_params = {{"config", "SchedulerConfig"}};
    b.exception_type = "NullPointerException";
    std::string t = template_test(b);
    EXPECT_NE(t.find("@Test(expected = NullPointerException.class)"), std::string::npos);
    EXPECT_NE(t.find("new Scheduler(null);"), std::string::npos);
    EXPECT_NE(t.find("testSchedulerThrowsNullPointerException"), std::string::npos);
}

TEST(TemplateBackend, StaticAndInstanceCalls) {
    PromptBundle b;
    b.mut_class = "a.Util";
    b.mut_name = "f";
    b.mut_is_static = true;
    b.mut_params = {{"n", "int"}, {"s", "String"}, {"ok", "boolean"}};
    b.exception_type = "IllegalArgumentException";
    b.test_name = "custom";
    std::string t = template_test(b);
    EXPECT_NE(t.find("Util.f(0, null, false);"), std::string::npos);
    EXPECT_NE(t.find("public void custom()"), std::string::npos);
    b.mut_is_static = false;
    EXPECT_NE(template_test(b).find("receiver.f(0, null, false);"), std::string::npos);
    EXPECT_TRUE(make_candidate(0, 0, template_test(b)).extractable);
}

TEST(PlaceholderFor, PrimitiveDefaults) {
    EXPECT_EQ(placeholder_for("long"), "0L");
    EXPECT_EQ(placeholder_for("double"), "0.0");
    EXPECT_EQ(placeholder_for("char"), "'\\0'");
    EXPECT_EQ(placeholder_for("List<String>"), "null");
}

TEST(GeneratorConfig, Validation) {
    GeneratorConfig c;
    c.backend = BackendKind::Remote;
    EXPECT_THROW(c.validate(), ConfigError);
    c.endpoint = "http://localhost:1";
    c.model = "m";
    EXPECT_NO_THROW(c.validate());
    c.n = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.n = 1;
    c.quantized_alias = "m-q4";
    EXPECT_EQ(c.effective_model(), "m-q4");
    c.quant = false;
    EXPECT_EQ(c.effective_model(), "m");
    EXPECT_THROW(backend_kind_from_string("gpt"), UsageError);
}

// Minimal chat-completions stub on a loopback port.
class StubServer {
public:
    explicit StubServer(std::function<void(const nlohmann::json&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            handler(nlohmann::json::parse(req.body), res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    [[nodiscard]] std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    std::atomic<int> requests{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

GeneratorConfig remote_config(const std::string& endpoint) {
    GeneratorConfig c;
    c.backend = BackendKind::Remote;
    c.endpoint = endpoint;
    c.model = "stub";
    c.timeout = std::chrono::seconds(5);
    return c;
}

std::string choice(const std::string& name) { return "@Test\npublic void " + name + "() {\n}\n"; }

TEST(RemoteBackend, ReturnsOneCandidatePerChoice) {
    StubServer server([](const nlohmann::json& req, httplib::Response& res) {
        nlohmann::json choices = nlohmann::json::array();
        for (int i = 0; i < req.value("n", 1); ++i)
            choices.push_back({{"message", {{"role", "assistant"}, {"content", choice("t" + std::to_string(i))}}}});
        res.set_content(nlohmann::json{{"choices", choices}}.dump(), "application/json");
    });
    RemoteBackend backend(remote_config(server.endpoint()));
    auto cands = backend.generate("p", PromptBundle{}, 3, 0);
    ASSERT_EQ(cands.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(cands[static_cast<std::size_t>(i)].id, i);
        EXPECT_NE(cands[static_cast<std::size_t>(i)].test_source.find("t" + std::to_string(i)), std::string::npos);
    }
    EXPECT_EQ(server.requests, 1);
}

TEST(RemoteBackend, FallsBackToSequentialRequests) {
    StubServer server([](const nlohmann::json& req, httplib::Response& res) {
        if (req.contains("n")) {
            res.status = 400;
            res.set_content("{\"error\": \"n not supported\"}", "application/json");
            return;
        }
        std::string name = "s" + std::to_string(req.value("seed", -1));
        res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", choice(name)}}}}}}}.dump(),
                        "application/json");
    });
    auto cfg = remote_config(server.endpoint());
    cfg.seed = 10;
    RemoteBackend backend(cfg);
    auto cands = backend.generate("p", PromptBundle{}, 3, 0);
    ASSERT_EQ(cands.size(), 3u);
    EXPECT_NE(cands[0].test_source.find("s10"), std::string::npos);
    EXPECT_NE(cands[2].test_source.find("s12"), std::string::npos);
    EXPECT_EQ(server.requests, 4);
}

TEST(RemoteBackend, ServerErrorCarriesBodySnippet) {
    StubServer server([](const nlohmann::json&, httplib::Response& res) {
        res.status = 503;
        res.set_content("model overloaded", "text/plain");
    });
    RemoteBackend backend(remote_config(server.endpoint()));
    try {
        backend.generate("p", PromptBundle{}, 1, 0);
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("model overloaded"), std::string::npos);
    }
}

TEST(RemoteBackend, UnreachableEndpointIsBackendError) {
    auto cfg = remote_config("http://127.0.0.1:1");
    cfg.timeout = std::chrono::milliseconds(500);
    RemoteBackend backend(cfg);
    EXPECT_THROW(backend.generate("p", PromptBundle{}, 1, 0), BackendError);
}

}  // namespace
}  // namespace ebtforge
