#include "ebtforge/generation_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <semaphore>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "java_lexer.hpp"
#include "util.hpp"

namespace ebtforge {

namespace fs = std::filesystem;
using detail::Tok;
using detail::Token;

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Remote: return "remote";
        case BackendKind::Replay: return "replay";
        case BackendKind::Template: return "template";
    }
    return "?";
}

BackendKind backend_kind_from_string(std::string_view name) {
    if (name == "remote") return BackendKind::Remote;
    if (name == "replay") return BackendKind::Replay;
    if (name == "template") return BackendKind::Template;
    throw UsageError(fmt::format("unknown backend '{}' (expected remote, replay or template)", name));
}

void GeneratorConfig::validate() const {
    if (n < 1) throw ConfigError("samples must be at least 1");
    if (max_concurrency < 1) throw ConfigError("backend concurrency limit must be at least 1");
    if (backend == BackendKind::Remote && (endpoint.empty() || effective_model().empty())) {
        throw ConfigError("remote backend needs an endpoint and a model (EBTFORGE_ENDPOINT, EBTFORGE_MODEL)");
    }
    if (backend == BackendKind::Replay && fixtures_dir.empty()) {
        throw ConfigError("replay backend needs a fixtures directory");
    }
}

std::string GeneratorConfig::effective_model() const {
    if (quant && quantized_alias && !quantized_alias->empty()) return *quantized_alias;
    return model;
}

void GeneratorConfig::apply_env() {
    auto fill = [](std::string& dst, const char* var) {
        if (!dst.empty()) return;
        if (const char* v = std::getenv(var)) dst = v;
    };
    fill(endpoint, "EBTFORGE_ENDPOINT");
    fill(model, "EBTFORGE_MODEL");
    fill(api_key, "EBTFORGE_API_KEY");
}

std::string prompt_hash(std::string_view prompt) { return detail::hex16(detail::fnv1a64(prompt)); }

// ---- extraction -------------------------------------------------------------

namespace {

/// Contents of all fenced blocks, or the input when it has no fence.
std::string strip_fences(std::string_view raw) {
    constexpr std::string_view fence = "```";
    auto pos = raw.find(fence);
    if (pos == std::string_view::npos) return std::string(raw);
    std::string out;
    while (pos != std::string_view::npos) {
        auto body = raw.find('\n', pos);
        if (body == std::string_view::npos) break;
        ++body;
        auto close = raw.find(fence, body);
        out.append(raw.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body));
        out += '\n';
        if (close == std::string_view::npos) break;
        pos = raw.find(fence, close + fence.size());
    }
    return out;
}

/// Index past one annotation starting at tokens[i] == '@'.
std::size_t skip_annotation(const std::vector<Token>& t, std::size_t i, std::string* last_name) {
    ++i;
    while (t[i].kind == Tok::Ident) {
        if (last_name) *last_name = std::string(t[i].text);
        ++i;
        if (t[i].is_op(".") && t[i + 1].kind == Tok::Ident) {
            ++i;
        } else {
            break;
        }
    }
    if (t[i].is_op("(")) {
        int depth = 0;
        for (; t[i].kind != Tok::End; ++i) {
            if (t[i].is_op("(")) ++depth;
            if (t[i].is_op(")") && --depth == 0) return i + 1;
        }
    }
    return i;
}

/// Matching '}' for the '{' at i, or npos.
std::size_t match_brace(const std::vector<Token>& t, std::size_t i) {
    int depth = 0;
    for (; t[i].kind != Tok::End; ++i) {
        if (t[i].is_op("{")) ++depth;
        if (t[i].is_op("}") && --depth == 0) return i;
    }
    return std::string::npos;
}

/// Removes the first line's indentation from the following lines.
std::string dedent(std::string_view text, int first_column) {
    auto lines = detail::split_lines(text);
    std::string out;
    std::size_t strip = first_column > 0 ? static_cast<std::size_t>(first_column - 1) : 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l = lines[i];
        if (i > 0) {
            std::size_t n = 0;
            while (n < strip && n < l.size() && (l[n] == ' ' || l[n] == '\t')) ++n;
            l.remove_prefix(n);
            out += '\n';
        }
        out.append(l);
    }
    return out;
}

bool is_test_annotation(std::string_view name) {
    return name == "Test" || name == "ParameterizedTest" || name == "RepeatedTest";
}

std::optional<std::string> first_test_method(std::string_view code, const std::vector<Token>& t) {
    for (std::size_t i = 0; t[i].kind != Tok::End;) {
        if (!t[i].is_op("@") || t[i + 1].is("interface")) {
            ++i;
            continue;
        }
        std::size_t start = i;
        bool has_test = false;
        while (t[i].is_op("@") && !t[i + 1].is("interface")) {
            std::string name;
            i = skip_annotation(t, i, &name);
            has_test = has_test || is_test_annotation(name);
        }
        if (!has_test) continue;
        std::size_t j = i;
        int parens = 0;
        for (; t[j].kind != Tok::End; ++j) {
            if (t[j].is_op("(")) ++parens;
            if (t[j].is_op(")")) --parens;
            if (parens == 0 && (t[j].is_op("{") || t[j].is_op(";"))) break;
        }
        if (!t[j].is_op("{")) continue;
        std::size_t close = match_brace(t, j);
        if (close == std::string::npos) continue;
        return dedent(code.substr(t[start].begin, t[close].end - t[start].begin), t[start].column);
    }
    return std::nullopt;
}

bool has_blank_line_between(std::string_view code, std::size_t from, std::size_t to) {
    std::size_t nl = code.find('\n', from);
    while (nl != std::string_view::npos && nl < to) {
        std::size_t k = nl + 1;
        while (k < to && (code[k] == ' ' || code[k] == '\t' || code[k] == '\r')) ++k;
        if (k < to && code[k] == '\n') return true;
        nl = code.find('\n', nl + 1);
    }
    return false;
}

std::optional<std::string> longest_block(std::string_view code, const std::vector<Token>& t) {
    std::optional<std::pair<std::size_t, std::size_t>> best;  // token range
    std::size_t head = 0;  // first token after the last top-level delimiter
    for (std::size_t i = 0; t[i].kind != Tok::End; ++i) {
        if (t[i].is_op(";") || t[i].is_op("}")) {
            head = i + 1;
            continue;
        }
        if (!t[i].is_op("{")) continue;
        std::size_t close = match_brace(t, i);
        if (close == std::string::npos) break;  // nothing balanced from here on
        std::size_t start = head;
        while (start < i && has_blank_line_between(code, t[start].end, t[i].begin)) ++start;
        std::size_t len = t[close].end - t[start].begin;
        if (!best || len > t[best->second].end - t[best->first].begin) best = {start, close};
        i = close;
        head = close + 1;
    }
    if (!best) return std::nullopt;
    auto [s, e] = *best;
    return dedent(code.substr(t[s].begin, t[e].end - t[s].begin), t[s].column);
}

}  // namespace

std::optional<std::string> extract_test_method(std::string_view raw) {
    std::string code = strip_fences(raw);
    auto tokens = detail::lex_java(code);
    if (auto m = first_test_method(code, tokens)) return m;
    return longest_block(code, tokens);
}

Candidate make_candidate(int id, int prompt_id, std::string raw) {
    Candidate c;
    c.id = id;
    c.prompt_id = prompt_id;
    if (auto m = extract_test_method(raw)) {
        c.test_source = std::move(*m);
        c.extractable = !c.test_source.empty();
    }
    c.raw_output = std::move(raw);
    return c;
}

// ---- replay ----------------------------------------------------------------

std::vector<Candidate> ReplayBackend::generate(const std::string& prompt, const PromptBundle&, int samples,
                                               int prompt_id) {
    std::string hash = prompt_hash(prompt);
    fs::path primary = dir_ / (hash + ".txt");
    if (!fs::is_regular_file(primary)) throw FixtureMissError(hash);
    std::vector<Candidate> out;
    for (int i = 0; i < samples; ++i) {
        fs::path p = i == 0 ? primary : dir_ / fmt::format("{}.{}.txt", hash, i);
        if (!fs::is_regular_file(p)) p = primary;
        out.push_back(make_candidate(i, prompt_id, detail::read_file(p)));
    }
    return out;
}

// ---- template --------------------------------------------------------------

std::string placeholder_for(std::string_view type) {
    if (type == "int" || type == "short" || type == "byte") return "0";
    if (type == "long") return "0L";
    if (type == "float") return "0.0f";
    if (type == "double") return "0.0";
    if (type == "boolean") return "false";
    if (type == "char") return "'\\0'";
    return "null";
}

namespace {

/// Drops leading lowercase (package) segments: "a.b.Outer.Inner" -> "Outer.Inner".
std::string type_name_in_file(std::string_view qualified) {
    std::size_t start = 0;
    while (start < qualified.size() && std::islower(static_cast<unsigned char>(qualified[start]))) {
        auto dot = qualified.find('.', start);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return std::string(qualified.substr(start));
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

std::string template_test(const PromptBundle& b) {
    std::string cls = type_name_in_file(b.mut_class);
    std::string exception = b.exception_type.empty() ? "Exception" : b.exception_type;
    std::string simple_exc = exception.substr(exception.rfind('.') + 1);
    std::string name = b.test_name ? *b.test_name : fmt::format("test{}Throws{}", capitalize(b.mut_name), simple_exc);

    std::string args;
    for (const auto& p : b.mut_params) {
        if (!args.empty()) args += ", ";
        args += placeholder_for(p.type);
    }
    std::string body;
    if (b.mut_is_constructor) {
        body = fmt::format("    new {}({});\n", cls, args);
    } else if (b.mut_is_static) {
        body = fmt::format("    {}.{}({});\n", cls, b.mut_name, args);
    } else {
        body = fmt::format("    {} receiver = new {}();\n    receiver.{}({});\n", cls, cls, b.mut_name, args);
    }
    return fmt::format("@Test(expected = {}.class)\npublic void {}() throws Exception {{\n{}}}", exception, name,
                       body);
}

std::vector<Candidate> TemplateBackend::generate(const std::string&, const PromptBundle& bundle, int samples,
                                                 int prompt_id) {
    std::string text = template_test(bundle);
    std::vector<Candidate> out;
    for (int i = 0; i < samples; ++i) out.push_back(make_candidate(i, prompt_id, text));
    return out;
}

// ---- remote ----------------------------------------------------------------

struct RemoteBackend::Impl {
    GeneratorConfig config;
    std::string scheme_host_port;
    std::string path;
    std::counting_semaphore<> slots;

    explicit Impl(GeneratorConfig c) : config(std::move(c)), slots(config.max_concurrency) {
        std::string_view url = config.endpoint;
        auto scheme_end = url.find("://");
        auto path_start = url.find('/', scheme_end == std::string_view::npos ? 0 : scheme_end + 3);
        scheme_host_port = std::string(url.substr(0, path_start));
        std::string base = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
        while (!base.empty() && base.back() == '/') base.pop_back();
        path = base + "/chat/completions";
    }

    struct Reply {
        int status = 0;  // 0 on transport failure
        std::vector<std::string> texts;
        std::string error;
    };

    Reply post(const std::string& prompt, int n, std::optional<std::int64_t> seed) {
        nlohmann::json req = {{"model", config.effective_model()},
                              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                              {"temperature", config.temperature}};
        if (n > 1) req["n"] = n;
        if (seed) req["seed"] = *seed;

        httplib::Headers headers;
        if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

        Reply reply;
        slots.acquire();
        httplib::Result res = [&] {
            httplib::Client cli(scheme_host_port);
            auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout).count();
            auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout).count() % 1000000;
            cli.set_connection_timeout(secs, usecs);
            cli.set_read_timeout(secs, usecs);
            cli.set_write_timeout(secs, usecs);
            return cli.Post(path, headers, req.dump(), "application/json");
        }();
        slots.release();

        if (!res) {
            reply.error = fmt::format("request to {}{} failed: {}", scheme_host_port, path, httplib::to_string(res.error()));
            return reply;
        }
        reply.status = res->status;
        if (res->status < 200 || res->status >= 300) {
            reply.error = fmt::format("HTTP {} from {}{}: {}", res->status, scheme_host_port, path,
                                      res->body.substr(0, 200));
            return reply;
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            for (const auto& choice : j.at("choices")) {
                reply.texts.push_back(choice.at("message").at("content").get<std::string>());
            }
        } catch (const nlohmann::json::exception& e) {
            reply.status = 0;
            reply.error = fmt::format("unreadable completion response ({}): {}", e.what(), res->body.substr(0, 200));
        }
        return reply;
    }
};

RemoteBackend::RemoteBackend(GeneratorConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
RemoteBackend::~RemoteBackend() = default;

std::vector<Candidate> RemoteBackend::generate(const std::string& prompt, const PromptBundle&, int samples,
                                               int prompt_id) {
    auto first = impl_->post(prompt, samples, impl_->config.seed);
    bool rejected_n = samples > 1 && first.status >= 400 && first.status < 500;
    if (!first.error.empty() && !rejected_n) throw BackendError(first.error);

    std::vector<Candidate> out;
    for (auto& text : first.texts) {
        if (static_cast<int>(out.size()) == samples) break;
        out.push_back(make_candidate(static_cast<int>(out.size()), prompt_id, std::move(text)));
    }
    // Servers without `n` support answer once (or reject); fill up one request at a time.
    while (static_cast<int>(out.size()) < samples) {
        int id = static_cast<int>(out.size());
        auto seed = impl_->config.seed ? std::optional<std::int64_t>(*impl_->config.seed + id) : std::nullopt;
        auto r = impl_->post(prompt, 1, seed);
        if (!r.error.empty() || r.texts.empty()) {
            if (out.empty() && id == 0 && r.texts.empty()) throw BackendError(r.error.empty() ? "empty completion" : r.error);
            Candidate c;
            c.id = id;
            c.prompt_id = prompt_id;
            c.error = r.error.empty() ? "empty completion" : r.error;
            spdlog::warn("remote backend: sample {} failed: {}", id, c.error);
            out.push_back(std::move(c));
            continue;
        }
        out.push_back(make_candidate(id, prompt_id, std::move(r.texts.front())));
    }
    return out;
}

std::unique_ptr<GenerationBackend> make_backend(const GeneratorConfig& config) {
    config.validate();
    switch (config.backend) {
        case BackendKind::Remote: return std::make_unique<RemoteBackend>(config);
        case BackendKind::Replay: return std::make_unique<ReplayBackend>(config.fixtures_dir);
        case BackendKind::Template: return std::make_unique<TemplateBackend>();
    }
    throw UsageError("unknown backend");
}

}  // namespace ebtforge
