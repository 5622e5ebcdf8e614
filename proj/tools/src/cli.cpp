#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "ebtforge/errors.hpp"
#include "ebtforge/generation_backend.hpp"
#include "ebtforge/pipeline.hpp"
#include "ebtforge/version.hpp"

namespace ebtforge::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string repo_path, repo_link, sha;
    std::string mut_file_path, throw_file_path, test_context_path, test_name;
    int mut_line = 0, throw_line = 0;
    bool quant = true, pick_best = false, force = false, report_timings = false;
    double timeout = 0;
    std::string output_file, output_dir, report_file;
    int samples = 5;
    std::string backend, runner = "none", runner_manifest, fixtures_dir;
    std::string endpoint, model, quantized_model;
    double temperature = 0.8;
    std::optional<std::int64_t> seed;
    double request_timeout = 120;
    std::string prompt_template, dump_prompts;
    unsigned workers = 0;
    std::string log_level = "info";
};

void add_repo_options(CLI::App* app, Options& o) {
    app->add_option("--repo_path", o.repo_path, "Local repository to analyze");
    app->add_option("--repo_link", o.repo_link, "Repository URL to clone");
    app->add_option("--sha", o.sha, "Revision to analyze");
    app->add_option("--runner", o.runner, "Test runner: none, simulated or command")
        ->check(CLI::IsMember({"none", "simulated", "command"}));
    app->add_option("--runner_manifest", o.runner_manifest, "Manifest for the simulated runner");
    app->add_flag("--force", o.force, "Accept a prepared cache recorded for another commit");
    app->add_option("--log_level", o.log_level, "trace, debug, info, warn, error or off");
}

void add_generation_options(CLI::App* app, Options& o) {
    app->add_flag("--quant", o.quant, "Use the quantized model alias (default true)");
    app->add_flag("--pick_best", o.pick_best, "Sample several candidates and keep the best");
    app->add_option("--samples", o.samples, "Candidates sampled when picking the best")->check(CLI::PositiveNumber);
    app->add_option("--backend", o.backend, "Generation backend: remote, replay or template")
        ->check(CLI::IsMember({"remote", "replay", "template"}));
    app->add_option("--fixtures_dir", o.fixtures_dir, "Replay fixtures directory");
    app->add_option("--endpoint", o.endpoint, "Chat-completion base URL (EBTFORGE_ENDPOINT)");
    app->add_option("--model", o.model, "Model name (EBTFORGE_MODEL)");
    app->add_option("--quantized_model", o.quantized_model, "Model name used when --quant is on");
    app->add_option("--temperature", o.temperature, "Sampling temperature");
    app->add_option("--seed", o.seed, "Sampling seed");
    app->add_option("--request_timeout", o.request_timeout, "Seconds per backend request")
        ->check(CLI::PositiveNumber);
    app->add_option("--prompt_template", o.prompt_template, "Prompt template file");
    app->add_option("--dump_prompts", o.dump_prompts, "Directory receiving <hash>.prompt.txt per prompt");
}

RunConfig to_run_config(const Options& o, const CLI::App* app) {
    RunConfig c;
    if (!o.repo_path.empty()) c.repo_path = o.repo_path;
    if (!o.repo_link.empty()) c.repo_link = o.repo_link;
    if (!o.sha.empty()) c.sha = o.sha;
    c.pick_best = o.pick_best;
    if (const auto* t = app->get_option_no_throw("--timeout"); t && t->count() > 0) c.timeout_s = o.timeout;
    if (!o.output_file.empty()) c.output_file = o.output_file;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (!o.test_name.empty()) c.test_name = o.test_name;
    if (!o.report_file.empty()) c.report_file = o.report_file;
    c.report_timings = o.report_timings;
    c.force = o.force;
    c.runner = runner_kind_from_string(o.runner);
    c.runner_manifest = o.runner_manifest;
    if (!o.prompt_template.empty()) c.prompt_template = o.prompt_template;
    if (!o.dump_prompts.empty()) c.dump_prompts = o.dump_prompts;
    c.workers = o.workers;

    GeneratorConfig& g = c.generator;
    g.endpoint = o.endpoint;
    g.model = o.model;
    g.apply_env();
    if (!o.quantized_model.empty()) g.quantized_alias = o.quantized_model;
    g.quant = o.quant;
    g.n = o.samples;
    g.temperature = o.temperature;
    g.seed = o.seed;
    g.timeout = std::chrono::milliseconds(static_cast<long long>(o.request_timeout * 1000));
    g.fixtures_dir = o.fixtures_dir;
    if (!o.backend.empty()) {
        g.backend = backend_kind_from_string(o.backend);
    } else if (!o.fixtures_dir.empty()) {
        g.backend = BackendKind::Replay;
    } else if (!g.endpoint.empty()) {
        g.backend = BackendKind::Remote;
    } else {
        g.backend = BackendKind::Template;
        spdlog::warn("stage=config no --backend and no EBTFORGE_ENDPOINT; using the template backend");
    }
    return c;
}

int cmd_hash(const std::string& file, bool extracted, std::ostream& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + file);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (extracted) {
        auto m = extract_test_method(text);
        if (!m) throw UsageError("no test method could be extracted from " + file);
        text = *m;
    }
    out << prompt_hash(text) << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("ebtforge", sink);
    logger->set_pattern("level=%l %v");
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> p;
        ~Restore() { spdlog::set_default_logger(p); }
    } restore{previous};

    CLI::App app{"Generates exceptional-behavior tests for Java projects", "ebtforge"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Options o;

    auto* prepare = app.add_subcommand("prepare", "Run existing tests once to record traces and coverage");
    add_repo_options(prepare, o);

    auto* user = app.add_subcommand("user_view", "Generate one test for a chosen method and throw statement");
    add_repo_options(user, o);
    add_generation_options(user, o);
    user->add_option("--mut_file_path", o.mut_file_path, "File declaring the method under test")->required();
    user->add_option("--mut_line", o.mut_line, "Line of the method under test")->required();
    user->add_option("--throw_file_path", o.throw_file_path, "File containing the target throw")->required();
    user->add_option("--throw_line", o.throw_line, "Line of the target throw statement")->required();
    user->add_option("--test_context_path", o.test_context_path, "Destination test file");
    user->add_option("--test_name", o.test_name, "Name of the generated test method");
    user->add_option("--output_file", o.output_file, "Where to write the test (default ./output.java)");

    auto* machine = app.add_subcommand("machine_view", "Generate tests for every throw in public methods");
    add_repo_options(machine, o);
    add_generation_options(machine, o);
    machine->add_option("--timeout", o.timeout, "Time budget in seconds");
    machine->add_option("--output_dir", o.output_dir, "Directory for generated tests (default ./ebtforge-out)");
    machine->add_option("--report_file", o.report_file, "Also write the JSON report here");
    machine->add_flag("--report_timings", o.report_timings, "Include per-target timings in the report");
    machine->add_option("--workers", o.workers, "Targets processed in parallel (default: processors)");

    std::string hash_file;
    bool hash_extracted = false;
    auto* hash = app.add_subcommand("hash", "Print the replay/manifest hash of a file's bytes");
    hash->add_option("file", hash_file, "Input file")->required();
    hash->add_flag("--extracted", hash_extracted, "Hash the extracted test method instead of the raw text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        if (e.get_exit_code() != 0) err << app.help();
        return kExitConfig;
    }

    try {
        auto level = spdlog::level::from_str(o.log_level);
        if (level == spdlog::level::off && o.log_level != "off") throw UsageError("unknown log level " + o.log_level);
        logger->set_level(level);

        if (hash->parsed()) return cmd_hash(hash_file, hash_extracted, out);

        CLI::App* sub = app.get_subcommands().front();
        RunConfig config = to_run_config(o, sub);

        if (prepare->parsed()) {
            PrepareResult r = run_prepare(config);
            out << fmt::format("prepared {}: tests run {}, traces captured {}, cache {}\n", r.repo_root.string(),
                               r.db.tests_run.size(), r.db.traces.size(), cache_dir(r.repo_root).string());
            return kExitOk;
        }
        if (user->parsed()) {
            UserViewArgs args{o.mut_file_path, o.mut_line, o.throw_file_path, o.throw_line, std::nullopt};
            if (!o.test_context_path.empty()) args.test_context_path = o.test_context_path;
            UserViewResult r = run_user_view(config, args);
            for (const auto& w : r.warnings) err << "warning: " << w << "\n";
            std::string verdict = r.verdict ? std::string(to_string(r.verdict->level)) : "unevaluated";
            out << fmt::format("verdict: {}{} candidate={} trace={} dest={} output={}\n", verdict,
                               r.best_effort ? " (best effort)" : "", r.chosen.id, to_string(r.trace_source),
                               r.dest.path, r.output.string());
            return kExitOk;
        }
        MachineViewResult r = run_machine_view(config);
        out << report_to_text(r.report, config.report_timings);
        return r.backend_failed ? kExitBackend : kExitOk;
    } catch (const PreparationError& e) {
        err << "error: preparation failed: " << e.what() << "\n";
        return kExitPreparation;
    } catch (const RunnerError& e) {
        err << "error: test runner failed: " << e.what() << "\n";
        return kExitPreparation;
    } catch (const NoTraceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNoTrace;
    } catch (const AnalysisError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNoTrace;
    } catch (const BackendError& e) {
        err << "error: generation failed: " << e.what() << "\n";
        return kExitBackend;
    } catch (const NotFoundError& e) {
        err << "error: not found: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ebtforge::cli
