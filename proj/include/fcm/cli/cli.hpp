/*
 * Copyright 2026 The FCM Workbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fcm/agentic/loop.hpp"
#include "fcm/core/basins.hpp"
#include "fcm/core/dynamics.hpp"
#include "fcm/extraction/http_provider.hpp"
#include "fcm/extraction/pipeline.hpp"
#include "fcm/io/files.hpp"
#include "fcm/mixer/mixer.hpp"
#include "fcm/service/api.hpp"

#ifndef FCM_TEMPLATE_DIR
#define FCM_TEMPLATE_DIR "templates"
#endif

namespace fcm::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Raised for semantically invalid arguments that parse fine (exit 2).
class UsageError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

namespace detail
{

inline std::vector<double> parse_csv_numbers(const std::string& csv, const char* what)
{
    std::vector<double> out;
    for (const auto& raw : text::split(csv, ','))
    {
        auto field = text::trim(raw);
        try
        {
            std::size_t used = 0;
            double v = std::stod(field, &used);
            if (used != field.size())
                throw std::invalid_argument(field);
            out.push_back(v);
        }
        catch (const std::exception&)
        {
            throw UsageError(std::string(what) + ": '" + field + "' is not a number");
        }
    }
    return out;
}

inline std::string describe(const EquilibriumClassification& c)
{
    switch (c.kind)
    {
    case EquilibriumKind::fixed_point:
        return "fixed point";
    case EquilibriumKind::limit_cycle:
        return "limit cycle, period " + std::to_string(c.period);
    case EquilibriumKind::unresolved:
        return "unresolved";
    }
    return "unknown";
}

inline std::string format_state(const std::vector<double>& v, bool binary)
{
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        if (i)
            out += binary ? "" : " ";
        out += binary ? (v[i] > 0.5 ? "1" : "0") : text::format_fixed(v[i]);
    }
    return out + "]";
}

struct SquasherOptions
{
    std::string phi = "hard";
    double threshold = 0.0;
    double steepness = 5.0;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--phi", phi, "Squashing function")
            ->check(CLI::IsMember({"hard", "logistic", "clamped-linear"}))
            ->capture_default_str();
        cmd->add_option("--threshold", threshold, "Hard-threshold firing level")->capture_default_str();
        cmd->add_option("--steepness", steepness, "Logistic steepness")->capture_default_str();
    }

    Squasher build() const
    {
        if (phi == "logistic")
            return Squasher::logistic(steepness);
        if (phi == "clamped-linear")
            return Squasher::clamped_linear();
        return Squasher::hard(threshold);
    }
};

struct ProviderOptions
{
    std::string model;
    std::string replay_dir;
    std::string record_dir;
    std::string template_dir;
    std::string created_at;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--model", model, "Model name (default: $LLM_MODEL)");
        cmd->add_option("--replay", replay_dir, "Serve LLM responses from recorded transcripts");
        cmd->add_option("--record", record_dir, "Record LLM exchanges as replay transcripts");
        cmd->add_option("--templates", template_dir, "Prompt template directory");
        cmd->add_option("--created-at", created_at, "Provenance timestamp (default: now)");
    }

    std::unique_ptr<llm::Provider> build_base() const
    {
        auto config = replay_dir.empty() ? llm::ProviderConfig::from_env() : llm::ProviderConfig::replay(replay_dir);
        if (!model.empty())
            config.http.model = model;
        return llm::make_provider(config);
    }

    extraction::ExtractionConfig extraction_config() const
    {
        extraction::ExtractionConfig c;
        std::string dir = template_dir;
        if (dir.empty())
            if (const char* env = std::getenv("FCM_TEMPLATES"))
                dir = env;
        c.templates = extraction::PromptTemplates::load(dir.empty() ? FCM_TEMPLATE_DIR : dir);
        c.model = model.empty() ? llm::ProviderConfig::from_env().http.model : model;
        c.created_at = created_at;
        return c;
    }
};

/// Owns the provider chain (base, optionally wrapped by a recorder).
struct ProviderChain
{
    std::unique_ptr<llm::Provider> base;
    std::unique_ptr<llm::RecordingProvider> recorder;

    llm::Provider& get() { return recorder ? *recorder : *base; }

    static ProviderChain make(const ProviderOptions& o)
    {
        ProviderChain c;
        c.base = o.build_base();
        if (!o.record_dir.empty())
            c.recorder = std::make_unique<llm::RecordingProvider>(*c.base, o.record_dir);
        return c;
    }
};

inline std::atomic<httplib::Server*> g_server{nullptr};

inline void stop_server(int)
{
    if (auto* s = g_server.load())
        s->stop();
}

} // namespace detail

/// Runs the `fcmw` command line. `args` excludes the program name.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Fuzzy cognitive map workbench", "fcmw"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    // extract
    auto* extract = app.add_subcommand("extract", "Extract an FCM from a text file");
    std::string extract_file, extract_out, extract_artifacts;
    detail::ProviderOptions extract_provider;
    extract->add_option("file", extract_file, "Text document")->required()->check(CLI::ExistingFile);
    extract->add_option("--out", extract_out, "Write the FCM here (default: stdout)");
    extract->add_option("--artifacts", extract_artifacts, "Write extraction artifacts (JSON) here");
    extract_provider.add_to(extract);

    // run
    auto* run = app.add_subcommand("run", "Run a trajectory and classify its equilibrium");
    std::string run_file, run_init, run_export;
    std::size_t run_max_steps = 0;
    double run_tolerance = kDefaultTolerance;
    detail::SquasherOptions run_phi;
    run->add_option("fcm", run_file, "FCM JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--init", run_init, "Initial state as comma-separated activations, or 'ones'")->required();
    run->add_option("--max-steps", run_max_steps, "Step budget (default: 2^n+1 for binary squashers)");
    run->add_option("--tolerance", run_tolerance, "Recurrence tolerance for continuous squashers")
        ->capture_default_str();
    run->add_option("--export", run_export, "Write the trajectory CSV (plus .meta.json) here");
    run_phi.add_to(run);

    // equilibria
    auto* eq = app.add_subcommand("equilibria", "Report equilibria and basins of attraction");
    std::string eq_file, eq_out;
    bool eq_enumerate = false;
    std::size_t eq_guard = kDefaultBasinNodeGuard;
    detail::SquasherOptions eq_phi;
    eq->add_option("fcm", eq_file, "FCM JSON file")->required()->check(CLI::ExistingFile);
    eq->add_flag("--enumerate-binary", eq_enumerate, "Run every binary initial state");
    eq->add_option("--max-nodes", eq_guard, "Refuse enumeration above this node count")->capture_default_str();
    eq->add_option("--out", eq_out, "Write the attractor report (JSON) here");
    eq_phi.add_to(eq);

    // mix
    auto* mixcmd = app.add_subcommand("mix", "Mix FCMs by convex combination");
    std::vector<std::string> mix_files;
    std::string mix_weights, mix_alias, mix_out;
    mixcmd->add_option("fcms", mix_files, "Component FCM files")->required()->check(CLI::ExistingFile);
    mixcmd->add_option("--weights", mix_weights, "Comma-separated mixing weights summing to 1")->required();
    mixcmd->add_option("--alias", mix_alias, "JSON object mapping labels to canonical labels")
        ->check(CLI::ExistingFile);
    mixcmd->add_option("--out", mix_out, "Write the mixture here (default: stdout)");

    // agentic
    auto* agent = app.add_subcommand("agentic", "Run the equilibrium-driven fetch/extract/mix loop");
    std::string agent_corpus, agent_seed, agent_out, agent_schedule = "constant";
    std::size_t agent_iterations = 5, agent_k = 3;
    detail::ProviderOptions agent_provider;
    agent->add_option("--corpus", agent_corpus, "Directory of plain-text documents")
        ->required()
        ->check(CLI::ExistingDirectory);
    agent->add_option("--iterations", agent_iterations, "Maximum iterations")->capture_default_str();
    agent->add_option("--seed", agent_seed, "Initial FCM (default: empty)")->check(CLI::ExistingFile);
    agent->add_option("--out", agent_out, "Artifact directory (journal, components, current FCM)");
    agent->add_option("--k", agent_k, "Documents considered per query")->capture_default_str();
    agent->add_option("--schedule", agent_schedule, "Mix weight schedule")
        ->check(CLI::IsMember({"constant", "decay"}))
        ->capture_default_str();
    agent_provider.add_to(agent);

    // journal
    auto* journal = app.add_subcommand("replay-journal", "Rebuild the final FCM of a recorded loop");
    std::string journal_dir, journal_out;
    journal->add_option("dir", journal_dir, "Loop artifact directory")->required()->check(CLI::ExistingDirectory);
    journal->add_option("--out", journal_out, "Write the rebuilt FCM here (default: stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    int serve_port = 8080;
    std::string serve_host = "127.0.0.1", serve_static;
    std::vector<std::string> serve_fcms;
    detail::ProviderOptions serve_provider;
    serve->add_option("--port", serve_port, "TCP port")->capture_default_str()->check(CLI::Range(0, 65535));
    serve->add_option("--host", serve_host, "Bind address")->capture_default_str();
    serve->add_option("--static", serve_static, "Serve UI assets from this directory")->check(CLI::ExistingDirectory);
    serve->add_option("--fcm", serve_fcms, "Preload FCM files as snapshots")->check(CLI::ExistingFile);
    serve_provider.add_to(serve);

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError& e)
    {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try
    {
        if (*extract)
        {
            auto doc = extraction::SourceDocument::from_text(read_file(extract_file), extract_file);
            auto config = extract_provider.extraction_config();
            auto chain = detail::ProviderChain::make(extract_provider);
            auto result = extraction::extract_fcm(doc, chain.get(), config);
            for (const auto& line : result.artifacts.log)
                err << "note: " << line << "\n";
            out << "extracted " << result.fcm.size() << " nodes and " << result.fcm.edges().nonzero_count()
                << " edges (" << result.artifacts.rejected.size() << " rejected as unsupported by the text)\n";
            if (!extract_artifacts.empty())
                write_file_atomic(extract_artifacts, extraction::artifacts_to_json(result.artifacts).dump(2) + "\n");
            if (extract_out.empty())
                out << serialize_fcm(result.fcm);
            else
            {
                save_fcm(result.fcm, extract_out);
                out << "wrote " << extract_out << "\n";
            }
            return kExitOk;
        }

        if (*run)
        {
            auto fcm = load_fcm(run_file);
            auto phi = run_phi.build();
            std::vector<double> init = run_init == "ones" ? all_active(fcm.size()).values()
                                                          : detail::parse_csv_numbers(run_init, "--init");
            if (init.size() != fcm.size())
                throw UsageError("--init has " + std::to_string(init.size()) + " values but the FCM has " +
                                 std::to_string(fcm.size()) + " nodes");
            const auto steps = run_max_steps ? run_max_steps : default_max_steps(fcm.size(), phi);
            auto t = run_trajectory(fcm, StateVector(init), phi, steps, run_tolerance);
            for (const auto& s : t.states)
                out << "t=" << s.t() << " " << detail::format_state(s.values(), phi.is_binary()) << "\n";
            out << detail::describe(t.equilibrium);
            if (t.equilibrium.kind != EquilibriumKind::unresolved)
                out << " (transient " << t.equilibrium.transient_length << ")";
            out << "\n";
            if (!run_export.empty())
            {
                export_trajectory(t.states, t.equilibrium, fcm.labels(), run_export);
                out << "wrote " << run_export << "\n";
            }
            return kExitOk;
        }

        if (*eq)
        {
            auto fcm = load_fcm(eq_file);
            auto phi = eq_phi.build();
            json report;
            if (eq_enumerate)
            {
                auto basins = enumerate_basins(fcm, phi, eq_guard);
                // Fixed points first, then cycles by period; lexicographic within a period.
                std::vector<BasinMap::const_iterator> order;
                for (auto it = basins.begin(); it != basins.end(); ++it)
                    order.push_back(it);
                std::stable_sort(order.begin(), order.end(),
                                 [](auto a, auto b) { return a->first.size() < b->first.size(); });
                std::string sizes;
                json list = json::array();
                for (auto it : order)
                    sizes += (sizes.empty() ? "" : ",") + std::to_string(it->second.size());
                out << basins.size() << " attractors, basin sizes " << sizes << "\n";
                for (auto it : order)
                {
                    const auto& [attractor, members] = *it;
                    std::string cycle;
                    for (const auto& s : attractor)
                        cycle += (cycle.empty() ? "" : " -> ") + detail::format_state(s, true);
                    out << "  period " << attractor.size() << ": " << cycle << "  basin " << members.size() << "\n";
                    json inits = json::array();
                    for (const auto& m : members)
                        inits.push_back(m.values());
                    list.push_back({{"period", attractor.size()}, {"attractor", attractor}, {"basin", inits}});
                }
                report = {{"labels", fcm.labels()}, {"attractors", list}};
            }
            else
            {
                auto t = run_trajectory(fcm, all_active(fcm.size()), phi);
                out << "from all-active state: " << detail::describe(t.equilibrium) << "\n";
                for (const auto& s : t.equilibrium.canonical_cycle())
                    out << "  " << detail::format_state(s, phi.is_binary()) << "\n";
                report = {{"labels", fcm.labels()}, {"probe", classification_to_json(t.equilibrium)}};
            }
            if (!eq_out.empty())
            {
                write_file_atomic(eq_out, canonical_dump(report));
                out << "wrote " << eq_out << "\n";
            }
            return kExitOk;
        }

        if (*mixcmd)
        {
            MixSpec spec;
            for (const auto& f : mix_files)
                spec.components.push_back(load_fcm(f));
            spec.weights = detail::parse_csv_numbers(mix_weights, "--weights");
            if (!mix_alias.empty())
                spec.aliases = json::parse(read_file(mix_alias)).get<AliasMap>();
            try
            {
                validate_mix_weights(spec.weights, spec.components.size());
            }
            catch (const Error& e)
            {
                throw UsageError(e.what());
            }
            auto mixed = mix(spec);
            err << "mixed " << spec.components.size() << " FCMs into " << mixed.size() << " nodes and "
                << mixed.edges().nonzero_count() << " edges\n";
            if (mix_out.empty())
                out << serialize_fcm(mixed);
            else
            {
                save_fcm(mixed, mix_out);
                out << "wrote " << mix_out << "\n";
            }
            return kExitOk;
        }

        if (*agent)
        {
            agentic::LoopConfig config;
            config.extraction = agent_provider.extraction_config();
            config.k = agent_k;
            config.max_iterations = agent_iterations;
            config.schedule =
                agent_schedule == "decay" ? agentic::LoopConfig::Schedule::decay : agentic::LoopConfig::Schedule::constant;
            if (!agent_out.empty())
                config.artifact_dir = agent_out;
            agentic::LoopState state;
            if (!agent_seed.empty())
                state.current_fcm = load_fcm(agent_seed);
            auto chain = detail::ProviderChain::make(agent_provider);
            state = agentic::run_agentic_loop(std::move(state), agentic::CorpusSource::local(agent_corpus), chain.get(),
                                              config);
            for (const auto& r : state.history)
            {
                out << "iteration " << r.iteration << ": " << agentic::to_string(r.status);
                if (r.status == agentic::IterationStatus::ok)
                    out << ", mixed " << r.component_fcm_id.substr(0, 12) << " at weight " << r.mix_weight
                        << (r.adopted ? " (adopted)" : "");
                out << "; query \"" << r.query << "\"" << (r.fallback_query ? " (fallback)" : "");
                if (!r.detail.empty())
                    out << "; " << r.detail;
                out << "\n";
            }
            out << "final FCM: " << state.current_fcm.size() << " nodes, "
                << state.current_fcm.edges().nonzero_count() << " edges\n";
            if (!agent_out.empty())
                out << "wrote " << agent_out << "\n";
            return kExitOk;
        }

        if (*journal)
        {
            auto fcm = agentic::replay_journal(journal_dir);
            auto recorded = fs::path(journal_dir) / "current.json";
            if (fs::exists(recorded))
                err << (read_file(recorded) == serialize_fcm(fcm) ? "matches" : "DIFFERS FROM") << " "
                    << recorded.string() << "\n";
            if (journal_out.empty())
                out << serialize_fcm(fcm);
            else
                save_fcm(fcm, journal_out);
            return kExitOk;
        }

        if (*serve)
        {
            service::ApiOptions options;
            const bool can_extract = !serve_provider.replay_dir.empty() || std::getenv("LLM_BASE_URL") != nullptr;
            if (can_extract)
            {
                options.extraction = serve_provider.extraction_config();
                options.provider_factory = [serve_provider] { return serve_provider.build_base(); };
            }
            service::Api api(std::move(options));
            for (const auto& f : serve_fcms)
                out << "loaded " << f << " as " << api.store().add(load_fcm(f)) << "\n";
            httplib::Server server;
            std::optional<fs::path> static_dir;
            if (!serve_static.empty())
                static_dir = serve_static;
            service::mount(server, api, static_dir);
            detail::g_server = &server;
            std::signal(SIGINT, detail::stop_server);
            std::signal(SIGTERM, detail::stop_server);
            out << "listening on http://" << serve_host << ":" << serve_port << std::endl;
            bool ok = server.listen(serve_host, serve_port);
            detail::g_server = nullptr;
            if (!ok)
            {
                err << "error: could not listen on " << serve_host << ":" << serve_port << "\n";
                return kExitFailure;
            }
            return kExitOk;
        }
    }
    catch (const UsageError& e)
    {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    catch (const Error& e)
    {
        err << to_string(e.kind());
        if (!e.stage().empty())
            err << " [" << e.stage() << "]";
        err << ": " << e.what() << "\n";
        return kExitFailure;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace fcm::cli
