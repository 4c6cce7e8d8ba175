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

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fcm/core/dynamics.hpp"
#include "fcm/extraction/pipeline.hpp"
#include "fcm/io/files.hpp"
#include "fcm/mixer/mixer.hpp"

namespace fcm::agentic
{

using extraction::SourceDocument;

/// The attractor reached from the probe state, in canonical rotation.
struct EquilibriumSummary
{
    EquilibriumKind kind = EquilibriumKind::unresolved;
    std::size_t period = 0;
    Attractor attractor;

    friend bool operator==(const EquilibriumSummary&, const EquilibriumSummary&) = default;
};

inline EquilibriumSummary summarize(const EquilibriumClassification& c)
{
    return {c.kind, c.period, c.canonical_cycle()};
}

enum class IterationStatus
{
    ok,
    failed,
    skipped,
};

inline std::string_view to_string(IterationStatus s)
{
    switch (s)
    {
    case IterationStatus::ok: return "ok";
    case IterationStatus::failed: return "failed";
    case IterationStatus::skipped: return "skipped";
    }
    return "unknown";
}

struct LoopRecord
{
    std::size_t iteration = 0; // 1-based
    IterationStatus status = IterationStatus::ok;
    std::string query;
    bool fallback_query = false;
    std::string doc_id;
    /// Digest of the extracted component; empty unless status is ok.
    std::string component_fcm_id;
    double mix_weight = 0.0;
    /// True when the component replaced an empty FCM instead of being mixed.
    bool adopted = false;
    EquilibriumSummary equilibrium_before;
    EquilibriumSummary equilibrium_after;
    std::string detail;
};

struct LoopState
{
    Fcm current_fcm;
    std::size_t iteration = 0;
    std::vector<LoopRecord> history; // size() == iteration
};

/// Where the loop gets new text: a directory of plain-text files or a
/// caller-supplied fetcher returning ranked documents.
struct CorpusSource
{
    enum class Kind
    {
        local_directory,
        fetcher,
    };
    using Fetcher = std::function<std::vector<SourceDocument>(const std::string& query, std::size_t k)>;

    Kind kind = Kind::local_directory;
    fs::path directory;
    Fetcher fetch;

    static CorpusSource local(fs::path dir) { return {Kind::local_directory, std::move(dir), {}}; }
    static CorpusSource custom(Fetcher f) { return {Kind::fetcher, {}, std::move(f)}; }
};

struct Query
{
    std::string text;
    bool fallback = false;
};

/// Labels active (> 0.5) in any attractor state, in node order. An attractor
/// with nothing active queries every label instead.
inline Query equilibrium_to_query(const EquilibriumClassification& classification, std::span<const ConceptNode> nodes)
{
    std::vector<bool> active(nodes.size(), false);
    for (const auto& s : classification.cycle_states)
        for (std::size_t i = 0; i < std::min(s.size(), nodes.size()); ++i)
            active[i] = active[i] || s[i] > 0.5;
    Query q;
    q.fallback = std::find(active.begin(), active.end(), true) == active.end();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (active[i] || q.fallback)
            q.text += (q.text.empty() ? "" : " ") + nodes[i].label;
    return q;
}

/// Top-k documents for `query`. Local directories rank files by the number of
/// shared case-folded tokens, ties by filename.
inline std::vector<SourceDocument> fetch_documents(const std::string& query, const CorpusSource& source, std::size_t k)
{
    if (source.kind == CorpusSource::Kind::fetcher)
    {
        if (!source.fetch)
            fail(ErrorKind::input, "corpus fetcher is not set");
        auto docs = source.fetch(query, k);
        if (docs.size() > k)
            docs.resize(k);
        return docs;
    }
    if (!fs::is_directory(source.directory))
        fail(ErrorKind::io, "corpus directory " + source.directory.string() + " does not exist");

    const auto wanted = text::token_set(query);
    struct Scored
    {
        std::size_t score;
        std::string name;
        SourceDocument doc;
    };
    std::vector<Scored> ranked;
    for (const auto& entry : fs::directory_iterator(source.directory))
    {
        auto name = entry.path().filename().string();
        if (!entry.is_regular_file() || name.empty() || name[0] == '.')
            continue;
        auto body = read_file(entry.path());
        if (text::trim(body).empty())
            continue;
        std::size_t score = 0;
        for (const auto& t : text::token_set(body))
            score += wanted.count(t);
        ranked.push_back({score, name, SourceDocument::from_text(std::move(body), name)});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Scored& a, const Scored& b) {
        return a.score != b.score ? a.score > b.score : a.name < b.name;
    });
    std::vector<SourceDocument> out;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
        out.push_back(std::move(ranked[i].doc));
    return out;
}

struct LoopConfig
{
    enum class Schedule
    {
        constant, // v_new = 0.5
        decay,    // v_new = 0.5 / iteration
    };

    extraction::ExtractionConfig extraction;
    Squasher phi = Squasher::hard();
    std::size_t k = 3;
    std::size_t max_iterations = 5;
    Schedule schedule = Schedule::constant;
    /// When set, components, the journal and the current FCM are written here.
    std::optional<fs::path> artifact_dir;
};

inline double mix_weight_for(const LoopConfig& config, std::size_t iteration)
{
    return config.schedule == LoopConfig::Schedule::constant ? 0.5 : 0.5 / static_cast<double>(iteration);
}

inline json summary_to_json(const EquilibriumSummary& s)
{
    return {{"kind", std::string(to_string(s.kind))}, {"period", s.period}, {"attractor", s.attractor}};
}

inline EquilibriumSummary summary_from_json(const json& j)
{
    EquilibriumSummary s;
    const auto kind = j.at("kind").get<std::string>();
    for (auto k : {EquilibriumKind::fixed_point, EquilibriumKind::limit_cycle, EquilibriumKind::unresolved})
        if (to_string(k) == kind)
            s.kind = k;
    s.period = j.at("period").get<std::size_t>();
    s.attractor = j.at("attractor").get<Attractor>();
    return s;
}

/// One journal line. Uses the shortest round-trip number format so the
/// recorded mix weight is exact.
inline json record_to_json(const LoopRecord& r)
{
    return {{"iteration", r.iteration},
            {"status", std::string(to_string(r.status))},
            {"query", r.query},
            {"fallback_query", r.fallback_query},
            {"doc_id", r.doc_id},
            {"component_fcm_id", r.component_fcm_id},
            {"mix_weight", r.mix_weight},
            {"adopted", r.adopted},
            {"equilibrium_before", summary_to_json(r.equilibrium_before)},
            {"equilibrium_after", summary_to_json(r.equilibrium_after)},
            {"detail", r.detail}};
}

inline LoopRecord record_from_json(const json& j)
{
    LoopRecord r;
    try
    {
        r.iteration = j.at("iteration").get<std::size_t>();
        const auto status = j.at("status").get<std::string>();
        if (status == "ok")
            r.status = IterationStatus::ok;
        else if (status == "failed")
            r.status = IterationStatus::failed;
        else if (status == "skipped")
            r.status = IterationStatus::skipped;
        else
            fail(ErrorKind::schema, "unknown journal status '" + status + "'");
        r.query = j.at("query").get<std::string>();
        r.fallback_query = j.at("fallback_query").get<bool>();
        r.doc_id = j.at("doc_id").get<std::string>();
        r.component_fcm_id = j.at("component_fcm_id").get<std::string>();
        r.mix_weight = j.at("mix_weight").get<double>();
        r.adopted = j.at("adopted").get<bool>();
        r.equilibrium_before = summary_from_json(j.at("equilibrium_before"));
        r.equilibrium_after = summary_from_json(j.at("equilibrium_after"));
        r.detail = j.at("detail").get<std::string>();
    }
    catch (const json::exception& e)
    {
        fail(ErrorKind::schema, std::string("bad journal record: ") + e.what());
    }
    return r;
}

inline fs::path component_path(const fs::path& dir, const std::string& id)
{
    return dir / "components" / (id + ".json");
}

/// Folds one component into `current`. An empty FCM adopts the component.
inline Fcm apply_component(const Fcm& current, const Fcm& component, double weight, bool& adopted)
{
    adopted = current.size() == 0;
    if (adopted)
        return component;
    return mix({{current, component}, {1.0 - weight, weight}, {}});
}

/// Probe the current FCM from the all-active state.
inline EquilibriumClassification probe(const Fcm& fcm, const Squasher& phi)
{
    return run_trajectory(fcm, all_active(fcm.size()), phi).equilibrium;
}

/// One turn of the loop: equilibrium, query, fetch, extract, mix. Extraction
/// failures and exhausted corpora are recorded and leave the FCM untouched.
inline LoopState agentic_iterate(LoopState state, const CorpusSource& source, llm::Provider& provider,
                                 const LoopConfig& config)
{
    LoopRecord rec;
    rec.iteration = state.iteration + 1;
    const auto before = probe(state.current_fcm, config.phi);
    rec.equilibrium_before = summarize(before);
    rec.equilibrium_after = rec.equilibrium_before;

    auto query = equilibrium_to_query(before, state.current_fcm.nodes());
    rec.query = query.text;
    rec.fallback_query = query.fallback;

    std::set<std::string> seen;
    for (const auto& h : state.history)
        if (!h.doc_id.empty())
            seen.insert(h.doc_id);

    auto docs = fetch_documents(query.text, source, config.k);
    auto pick = std::find_if(docs.begin(), docs.end(), [&](const auto& d) { return !seen.count(d.doc_id); });
    if (pick == docs.end())
    {
        rec.status = IterationStatus::skipped;
        rec.detail = docs.empty() ? "corpus returned no documents" : "every top-ranked document was already used";
    }
    else
    {
        rec.doc_id = pick->doc_id;
        try
        {
            auto result = extraction::extract_fcm(*pick, provider, config.extraction);
            rec.component_fcm_id = fcm_digest(result.fcm);
            rec.mix_weight = mix_weight_for(config, rec.iteration);
            if (config.artifact_dir)
            {
                save_fcm(result.fcm, component_path(*config.artifact_dir, rec.component_fcm_id));
                auto audit = *config.artifact_dir / "components" / (rec.component_fcm_id + ".artifacts.json");
                write_file_atomic(audit, extraction::artifacts_to_json(result.artifacts).dump(2) + "\n");
            }
            auto next = apply_component(state.current_fcm, result.fcm, rec.mix_weight, rec.adopted);
            if (rec.adopted)
                rec.mix_weight = 1.0;
            state.current_fcm = std::move(next);
            rec.equilibrium_after = summarize(probe(state.current_fcm, config.phi));
            rec.detail = pick->origin;
        }
        catch (const Error& e)
        {
            rec.status = IterationStatus::failed;
            rec.component_fcm_id.clear();
            rec.mix_weight = 0.0;
            rec.detail = std::string(to_string(e.kind())) + (e.stage().empty() ? "" : " [" + e.stage() + "]") +
                         ": " + e.what();
        }
    }

    if (config.artifact_dir)
    {
        append_line(*config.artifact_dir / "journal.jsonl", record_to_json(rec).dump());
        save_fcm(state.current_fcm, *config.artifact_dir / "current.json");
    }
    state.history.push_back(std::move(rec));
    state.iteration += 1;
    return state;
}

/// Iterates until `max_iterations` or until two consecutive iterations leave
/// the canonical attractor unchanged.
inline LoopState run_agentic_loop(LoopState state, const CorpusSource& source, llm::Provider& provider,
                                  const LoopConfig& config)
{
    if (config.artifact_dir)
    {
        fs::create_directories(*config.artifact_dir / "components");
        save_fcm(state.current_fcm, *config.artifact_dir / "initial.json");
    }
    int unchanged = 0;
    for (std::size_t i = 0; i < config.max_iterations && unchanged < 2; ++i)
    {
        state = agentic_iterate(std::move(state), source, provider, config);
        const auto& last = state.history.back();
        unchanged = last.equilibrium_after == last.equilibrium_before ? unchanged + 1 : 0;
    }
    return state;
}

inline std::vector<LoopRecord> load_journal(const fs::path& path)
{
    std::vector<LoopRecord> out;
    for (const auto& line : text::lines(read_file(path)))
    {
        if (text::trim(line).empty())
            continue;
        try
        {
            out.push_back(record_from_json(json::parse(line)));
        }
        catch (const json::parse_error& e)
        {
            fail(ErrorKind::parse, "journal " + path.string() + ": " + e.what());
        }
    }
    return out;
}

/// Rebuilds the final FCM from `initial` and the journal's successful
/// iterations, loading each component from the artifact directory.
inline Fcm replay_journal(const Fcm& initial, const std::vector<LoopRecord>& journal, const fs::path& artifact_dir)
{
    Fcm current = initial;
    for (const auto& r : journal)
    {
        if (r.status != IterationStatus::ok)
            continue;
        auto component = load_fcm(component_path(artifact_dir, r.component_fcm_id));
        if (fcm_digest(component) != r.component_fcm_id)
            fail(ErrorKind::fixture, "component " + r.component_fcm_id + " does not match its digest");
        bool adopted = false;
        current = apply_component(current, component, r.mix_weight, adopted);
        if (adopted != r.adopted)
            fail(ErrorKind::fixture, "journal iteration " + std::to_string(r.iteration) + " disagrees on adoption");
    }
    return current;
}

inline Fcm replay_journal(const fs::path& artifact_dir)
{
    return replay_journal(load_fcm(artifact_dir / "initial.json"), load_journal(artifact_dir / "journal.jsonl"),
                          artifact_dir);
}

} // namespace fcm::agentic
