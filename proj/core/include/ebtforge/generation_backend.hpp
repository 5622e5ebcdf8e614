#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebtforge/context_assembler.hpp"

namespace ebtforge {

enum class BackendKind { Remote, Replay, Template };
std::string_view to_string(BackendKind k);
/// Throws UsageError on an unknown name.
BackendKind backend_kind_from_string(std::string_view name);

struct GeneratorConfig {
    BackendKind backend = BackendKind::Template;
    std::string endpoint;  // base URL; requests go to <endpoint>/chat/completions
    std::string model;
    std::optional<std::string> quantized_alias;
    bool quant = true;  // use quantized_alias as the model name when set
    int n = 5;
    double temperature = 0.8;
    std::optional<std::int64_t> seed;
    std::chrono::milliseconds timeout{std::chrono::seconds(120)};
    std::string api_key;
    int max_concurrency = 4;
    std::filesystem::path fixtures_dir;  // replay only

    /// Throws ConfigError: n < 1, remote without endpoint or model, replay
    /// without a fixtures directory.
    void validate() const;
    [[nodiscard]] std::string effective_model() const;
    /// Fills endpoint, model and api_key from EBTFORGE_ENDPOINT,
    /// EBTFORGE_MODEL and EBTFORGE_API_KEY where still empty.
    void apply_env();
};

struct Candidate {
    int id = 0;
    std::string test_source;  // empty iff !extractable
    std::string raw_output;
    int prompt_id = 0;
    bool extractable = false;
    std::string error;  // set when the backend failed for this sample
};

/// FNV-1a 64 of the prompt bytes as 16 lowercase hex digits.
std::string prompt_hash(std::string_view prompt);

/// The first @Test-annotated method with its annotations; else the longest
/// brace-balanced block together with its declaration head; else nullopt.
/// Code fences are stripped first.
std::optional<std::string> extract_test_method(std::string_view raw);

/// Wraps raw backend text as candidate `id`.
Candidate make_candidate(int id, int prompt_id, std::string raw);

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    /// Up to `samples` candidates with ids 0..samples-1. Safe to call from
    /// several threads.
    virtual std::vector<Candidate> generate(const std::string& prompt, const PromptBundle& bundle, int samples,
                                            int prompt_id) = 0;
};

/// Fixture file <hash>.txt answers sample 0; sample i reads <hash>.<i>.txt
/// when present and falls back to <hash>.txt.
class ReplayBackend final : public GenerationBackend {
public:
    explicit ReplayBackend(std::filesystem::path fixtures_dir) : dir_(std::move(fixtures_dir)) {}
    std::vector<Candidate> generate(const std::string& prompt, const PromptBundle& bundle, int samples,
                                    int prompt_id) override;

private:
    std::filesystem::path dir_;
};

/// Expected-exception test calling the MUT with placeholder arguments.
class TemplateBackend final : public GenerationBackend {
public:
    std::vector<Candidate> generate(const std::string& prompt, const PromptBundle& bundle, int samples,
                                    int prompt_id) override;
};

std::string template_test(const PromptBundle& bundle);

/// Placeholder literal for a parameter type: 0, 0L, 0.0, false, '\0' or null.
std::string placeholder_for(std::string_view type);

class RemoteBackend final : public GenerationBackend {
public:
    explicit RemoteBackend(GeneratorConfig config);
    ~RemoteBackend() override;
    std::vector<Candidate> generate(const std::string& prompt, const PromptBundle& bundle, int samples,
                                    int prompt_id) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<GenerationBackend> make_backend(const GeneratorConfig& config);

}  // namespace ebtforge
