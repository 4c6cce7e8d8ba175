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
#include <chrono>
#include <cmath>
#include <ctime>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fcm/core/types.hpp"
#include "fcm/extraction/evidence.hpp"
#include "fcm/extraction/llm.hpp"
#include "fcm/extraction/templates.hpp"
#include "fcm/mixer/mixer.hpp"
#include "fcm/util/hash.hpp"
#include "fcm/util/text.hpp"
#include "fcm/version.hpp"

namespace fcm::extraction
{

inline constexpr const char* kStageNouns = "step1-nouns";
inline constexpr const char* kStageNodes = "step2-nodes";
inline constexpr const char* kStageEdges = "step3-edges";
inline constexpr const char* kStageBuild = "build";

struct NounCandidate
{
    std::string surface;
    std::size_t sentence_index = 0;
    std::optional<std::string> resolved_from_pronoun;

    friend bool operator==(const NounCandidate&, const NounCandidate&) = default;
};

/// One LLM round trip, kept for audit and replay.
struct Exchange
{
    std::string stage;
    llm::Request request;
    llm::Response response;
    std::string request_hash;
};

struct ExtractionArtifacts
{
    std::string doc_id;
    std::vector<NounCandidate> nouns;
    std::vector<ConceptNode> nodes;
    std::vector<CausalEdgeCandidate> edges;
    std::vector<RejectedEdge> rejected;
    std::vector<Exchange> transcripts;
    std::vector<std::string> log;

    /// Digest over every request hash and response body, in call order.
    std::string transcript_hash() const
    {
        std::string acc;
        for (const auto& e : transcripts)
            acc += e.request_hash + " " + sha256_hex(e.response.content) + "\n";
        return sha256_hex(acc);
    }
};

/// Failure inside a pipeline stage; carries the exchanges made so far.
class PipelineError : public Error
{
  public:
    PipelineError(const std::string& message, std::string stage, std::vector<Exchange> transcript)
        : Error(ErrorKind::pipeline, message, std::move(stage)), transcript_(std::move(transcript))
    {
    }

    const std::vector<Exchange>& transcript() const noexcept { return transcript_; }

  private:
    std::vector<Exchange> transcript_;
};

struct ExtractionConfig
{
    PromptTemplates templates;
    std::string model;
    double temperature = 1.0;
    double top_p = 0.95;
    /// Ordered node pairs per edge-extraction request.
    std::size_t pair_batch_size = 20;
    std::size_t max_concurrency = 1;
    bool allow_self_loops = false;
    std::vector<double> weight_scale{0.25, 0.5, 0.75, 1.0};
    /// Provenance timestamp; the current UTC time when empty.
    std::string created_at;
};

namespace detail
{

struct ParseFailure
{
    std::string message;
};

inline std::vector<std::string> fields(const std::string& line, std::size_t count)
{
    auto parts = text::split(line, '|');
    if (parts.size() > count)
    {
        // The last field may itself contain the separator.
        std::string tail = parts[count - 1];
        for (std::size_t i = count; i < parts.size(); ++i)
            tail += "|" + parts[i];
        parts.resize(count);
        parts[count - 1] = tail;
    }
    for (auto& p : parts)
        p = text::trim(p);
    return parts;
}

/// Non-empty, non-comment lines; an empty result means NONE was answered.
inline std::optional<std::vector<std::string>> record_lines(const std::string& content)
{
    std::vector<std::string> out;
    for (auto& raw : text::lines(content))
    {
        auto line = text::trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.size() >= 3 && line.front() == '`' && line.back() == '`')
            continue; // code fences around the records
        if (line == "NONE")
            return std::vector<std::string>{};
        out.push_back(line);
    }
    if (out.empty())
        return std::nullopt;
    return out;
}

inline std::vector<std::string> require_records(const std::string& content)
{
    auto recs = record_lines(content);
    if (!recs)
        throw ParseFailure{"no records found"};
    return *recs;
}

inline std::string now_utc()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Sends one request, parses the reply, and on a parse failure asks once for
/// a reformatted answer before giving up with a PipelineError.
template <class Parse>
auto ask(llm::Provider& provider, const ExtractionConfig& config, const std::string& stage,
         const std::string& system_instruction, const std::string& user_content, Parse parse,
         std::vector<Exchange>& transcript) -> decltype(parse(std::string{}))
{
    auto call = [&](const std::string& user) -> const Exchange& {
        llm::Request req{system_instruction, user, config.temperature, config.top_p, config.model};
        try
        {
            auto resp = provider.complete(req);
            transcript.push_back({stage, req, std::move(resp), llm::request_hash(req)});
        }
        catch (Error& e)
        {
            if (e.stage().empty())
                e.set_stage(stage);
            throw;
        }
        return transcript.back();
    };

    std::string first_problem;
    {
        const auto& ex = call(user_content);
        try
        {
            return parse(ex.response.content);
        }
        catch (const ParseFailure& f)
        {
            first_problem = f.message;
        }
    }
    const auto previous = transcript.back().response.content;
    const auto& retry = call(user_content + "\n\nYOUR PREVIOUS ANSWER COULD NOT BE PARSED (" + first_problem +
                             "):\n" + previous +
                             "\n\nReformat your previous answer using exactly the required record format.");
    try
    {
        return parse(retry.response.content);
    }
    catch (const ParseFailure& f)
    {
        throw PipelineError("unparseable LLM output after one reformat retry: " + f.message, stage, transcript);
    }
}

inline std::string document_block(const SourceDocument& doc)
{
    return "DOCUMENT:\n" + doc.text + "\n";
}

inline bool contains_word(const std::string& haystack, const std::string& word)
{
    return text::token_set(haystack).count(text::casefold(word)) > 0;
}

inline double snap_magnitude(double magnitude, const std::vector<double>& scale)
{
    double best = scale.front();
    for (double level : scale)
        if (std::abs(level - magnitude) < std::abs(best - magnitude))
            best = level;
    return best;
}

} // namespace detail

/// Step 1: nouns, noun phrases and resolved pronouns, in sentence order.
inline std::vector<NounCandidate> extract_nouns(const SourceDocument& doc, llm::Provider& provider,
                                                const ExtractionConfig& config, ExtractionArtifacts& artifacts)
{
    if (text::trim(doc.text).empty())
        fail(ErrorKind::input, "document is empty", kStageNouns);

    auto parse = [](const std::string& content) {
        std::vector<NounCandidate> out;
        for (const auto& line : detail::require_records(content))
        {
            auto f = detail::fields(line, 3);
            if (f.size() != 3)
                throw detail::ParseFailure{"expected 3 fields in '" + line + "'"};
            NounCandidate n;
            try
            {
                std::size_t used = 0;
                auto idx = std::stoll(f[0], &used);
                if (used != f[0].size() || idx < 0)
                    throw std::invalid_argument("index");
                n.sentence_index = static_cast<std::size_t>(idx);
            }
            catch (const std::exception&)
            {
                throw detail::ParseFailure{"bad sentence index in '" + line + "'"};
            }
            if (f[1].empty())
                throw detail::ParseFailure{"empty noun in '" + line + "'"};
            n.surface = f[1];
            if (!f[2].empty() && f[2] != "-")
                n.resolved_from_pronoun = f[2];
            out.push_back(std::move(n));
        }
        return out;
    };

    auto raw = detail::ask(provider, config, kStageNouns, config.templates.nouns.render({}),
                           detail::document_block(doc), parse, artifacts.transcripts);

    const auto folded_doc = text::casefold(text::collapse_whitespace(doc.text));
    std::vector<NounCandidate> kept;
    for (auto& n : raw)
    {
        bool present = folded_doc.find(text::casefold(text::collapse_whitespace(n.surface))) != std::string::npos;
        bool via_pronoun = n.resolved_from_pronoun && detail::contains_word(doc.text, *n.resolved_from_pronoun);
        if (!present && !via_pronoun)
        {
            artifacts.log.push_back("step1: dropped noun '" + n.surface + "' (not found in document)");
            continue;
        }
        kept.push_back(std::move(n));
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.sentence_index < b.sentence_index; });
    return kept;
}

/// Step 2: keeps the nouns that carry a measure and are causally connected,
/// and names each as a concept node whose evidence is its source noun.
inline std::vector<ConceptNode> refine_nodes(const std::vector<NounCandidate>& nouns, const SourceDocument& doc,
                                             llm::Provider& provider, const ExtractionConfig& config,
                                             ExtractionArtifacts& artifacts)
{
    if (nouns.empty())
        return {};

    std::string listing = "NOUNS:\n";
    for (const auto& n : nouns)
        listing += std::to_string(n.sentence_index) + " | " + n.surface + "\n";

    auto parse = [](const std::string& content) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& line : detail::require_records(content))
        {
            auto f = detail::fields(line, 2);
            if (f.size() != 2 || f[0].empty() || f[1].empty())
                throw detail::ParseFailure{"expected '<label> | <source noun>' in '" + line + "'"};
            out.emplace_back(f[0], f[1]);
        }
        return out;
    };

    auto raw = detail::ask(provider, config, kStageNodes, config.templates.nodes.render({}),
                           detail::document_block(doc) + "\n" + listing, parse, artifacts.transcripts);

    std::set<std::string> known;
    for (const auto& n : nouns)
        known.insert(canonical_label(n.surface));
    std::set<std::string> labels;
    std::set<std::string> ids;
    std::vector<ConceptNode> out;
    for (auto& [label, source] : raw)
    {
        if (!known.count(canonical_label(source)))
        {
            artifacts.log.push_back("step2: dropped node '" + label + "' (source noun '" + source +
                                    "' is not a step-1 noun)");
            continue;
        }
        if (!labels.insert(canonical_label(label)).second)
        {
            artifacts.log.push_back("step2: dropped duplicate node label '" + label + "'");
            continue;
        }
        auto id = text::slugify(label);
        for (int suffix = 2; ids.count(id); ++suffix)
            id = text::slugify(label) + "-" + std::to_string(suffix);
        ids.insert(id);
        out.push_back({id, label, source});
    }
    return out;
}

/// Step 3: asks about every ordered node pair (in batches) and returns the
/// signed, weighted, quoted edges. Pairs without evidence are omitted.
inline std::vector<CausalEdgeCandidate> extract_edges(const std::vector<ConceptNode>& nodes,
                                                      const SourceDocument& doc, llm::Provider& provider,
                                                      const ExtractionConfig& config, ExtractionArtifacts& artifacts)
{
    if (nodes.empty())
        fail(ErrorKind::input, "edge extraction needs at least one node", kStageEdges);
    if (config.pair_batch_size == 0)
        fail(ErrorKind::input, "pair batch size must be positive", kStageEdges);
    if (config.weight_scale.empty())
        fail(ErrorKind::input, "weight scale must not be empty", kStageEdges);

    std::vector<EdgeKey> pairs;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = 0; j < nodes.size(); ++j)
            if (i != j || config.allow_self_loops)
                pairs.emplace_back(i, j);
    if (pairs.empty())
        return {};

    std::string scale;
    for (double s : config.weight_scale)
        scale += (scale.empty() ? "" : ", ") + text::format_fixed(s).substr(0, 4);
    const auto system = config.templates.edges.render({{"weight_scale", scale}});

    std::string node_block = "NODES:\n";
    for (const auto& n : nodes)
        node_block += "- " + n.label + "\n";

    std::map<std::string, std::size_t> by_label;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        by_label.emplace(canonical_label(nodes[i].label), i);

    struct BatchResult
    {
        std::vector<CausalEdgeCandidate> edges;
        std::vector<Exchange> transcript;
        std::vector<std::string> log;
    };

    auto run_batch = [&](std::size_t begin, std::size_t end) {
        BatchResult result;
        std::set<EdgeKey> asked(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                                pairs.begin() + static_cast<std::ptrdiff_t>(end));
        std::string user = detail::document_block(doc) + "\n" + node_block + "\nPAIRS:\n";
        for (std::size_t p = begin; p < end; ++p)
            user += std::to_string(p - begin + 1) + ". " + nodes[pairs[p].first].label + " -> " +
                    nodes[pairs[p].second].label + "\n";

        auto parse = [&](const std::string& content) {
            std::vector<std::vector<std::string>> rows;
            for (const auto& line : detail::require_records(content))
            {
                auto f = detail::fields(line, 6);
                if (f.size() != 6)
                    throw detail::ParseFailure{"expected 6 fields in '" + line + "'"};
                if (f[2] != "+" && f[2] != "-")
                    throw detail::ParseFailure{"sign must be + or - in '" + line + "'"};
                try
                {
                    std::size_t used = 0;
                    double w = std::stod(f[3], &used);
                    if (used != f[3].size() || !std::isfinite(w))
                        throw std::invalid_argument("weight");
                }
                catch (const std::exception&)
                {
                    throw detail::ParseFailure{"bad strength in '" + line + "'"};
                }
                rows.push_back(std::move(f));
            }
            return rows;
        };

        auto rows = detail::ask(provider, config, kStageEdges, system, user, parse, result.transcript);
        for (auto& f : rows)
        {
            auto src = by_label.find(canonical_label(f[0]));
            auto dst = by_label.find(canonical_label(f[1]));
            if (src == by_label.end() || dst == by_label.end())
            {
                result.log.push_back("step3: dropped edge '" + f[0] + "' -> '" + f[1] + "' (unknown label)");
                continue;
            }
            if (!asked.count({src->second, dst->second}))
            {
                result.log.push_back("step3: dropped edge '" + f[0] + "' -> '" + f[1] + "' (pair not in batch)");
                continue;
            }
            double raw = std::stod(f[3]);
            if (raw == 0.0)
            {
                result.log.push_back("step3: skipped zero-strength edge '" + f[0] + "' -> '" + f[1] + "'");
                continue;
            }
            const Sign sign = f[2] == "+" ? Sign::positive : Sign::negative;
            // Strength is normally a magnitude; a negative value must agree with the sign field.
            if (raw < 0.0 && sign == Sign::positive)
                result.log.push_back("step3: strength sign of '" + f[0] + "' -> '" + f[1] +
                                     "' disagrees with its sign field; using the sign field");
            double magnitude = detail::snap_magnitude(std::abs(raw), config.weight_scale);
            if (magnitude != std::abs(raw))
                result.log.push_back("step3: snapped strength " + f[3] + " of '" + f[0] + "' -> '" + f[1] +
                                     "' to " + text::format_fixed(magnitude));
            CausalEdgeCandidate e;
            e.source_label = nodes[src->second].label;
            e.target_label = nodes[dst->second].label;
            e.sign = sign;
            e.weight = sign == Sign::positive ? magnitude : -magnitude;
            e.trigger_verb = f[4];
            e.evidence_quote = f[5];
            result.edges.push_back(std::move(e));
        }
        return result;
    };

    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t b = 0; b < pairs.size(); b += config.pair_batch_size)
        batches.emplace_back(b, std::min(pairs.size(), b + config.pair_batch_size));

    // Batches may run concurrently; results merge in batch order.
    std::vector<BatchResult> results(batches.size());
    const std::size_t width = std::max<std::size_t>(1, config.max_concurrency);
    for (std::size_t start = 0; start < batches.size(); start += width)
    {
        std::vector<std::future<BatchResult>> wave;
        for (std::size_t b = start; b < std::min(batches.size(), start + width); ++b)
            wave.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, run_batch,
                                      batches[b].first, batches[b].second));
        std::optional<PipelineError> failure;
        for (std::size_t k = 0; k < wave.size(); ++k)
        {
            try
            {
                results[start + k] = wave[k].get();
            }
            catch (const PipelineError& e)
            {
                if (!failure)
                    failure = e;
            }
        }
        if (failure)
        {
            auto transcript = artifacts.transcripts;
            for (std::size_t b = 0; b < start; ++b)
                transcript.insert(transcript.end(), results[b].transcript.begin(), results[b].transcript.end());
            transcript.insert(transcript.end(), failure->transcript().begin(), failure->transcript().end());
            throw PipelineError(failure->what(), kStageEdges, std::move(transcript));
        }
    }

    std::vector<CausalEdgeCandidate> edges;
    for (auto& r : results)
    {
        artifacts.transcripts.insert(artifacts.transcripts.end(), r.transcript.begin(), r.transcript.end());
        artifacts.log.insert(artifacts.log.end(), r.log.begin(), r.log.end());
        edges.insert(edges.end(), r.edges.begin(), r.edges.end());
    }
    return edges;
}

/// Assembles the FCM from the nodes and the evidence-validated edges. When a
/// pair has several candidates the one with the largest magnitude wins.
inline Fcm build_fcm(const std::vector<ConceptNode>& nodes, const std::vector<CausalEdgeCandidate>& accepted,
                     const SourceDocument& doc, ExtractionArtifacts& artifacts, const ExtractionConfig& config)
{
    std::map<std::string, std::size_t> by_label;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        by_label.emplace(canonical_label(nodes[i].label), i);

    std::map<EdgeKey, const CausalEdgeCandidate*> chosen;
    for (const auto& e : accepted)
    {
        auto s = by_label.find(canonical_label(e.source_label));
        auto t = by_label.find(canonical_label(e.target_label));
        if (s == by_label.end() || t == by_label.end())
            fail(ErrorKind::internal, "edge endpoint '" + e.source_label + "' -> '" + e.target_label +
                                          "' is not a node", kStageBuild);
        EdgeKey key{s->second, t->second};
        auto [it, inserted] = chosen.emplace(key, &e);
        if (inserted)
            continue;
        if (std::abs(e.weight) > std::abs(it->second->weight))
        {
            artifacts.log.push_back("build: replaced duplicate edge '" + e.source_label + "' -> '" + e.target_label +
                                    "' with stronger candidate");
            it->second = &e;
        }
        else
            artifacts.log.push_back("build: ignored weaker duplicate edge '" + e.source_label + "' -> '" +
                                    e.target_label + "'");
    }

    EdgeMatrix matrix(nodes.size());
    std::map<EdgeKey, EdgeAnnotation> notes;
    for (const auto& [key, e] : chosen)
    {
        matrix.set(key.first, key.second, e->weight);
        notes[key] = {e->evidence_quote, e->trigger_verb};
    }

    Provenance p;
    p.source = "extraction";
    p.doc_id = doc.doc_id;
    p.template_hashes = config.templates.hashes();
    p.transcript_hash = artifacts.transcript_hash();
    p.created_at = config.created_at.empty() ? detail::now_utc() : config.created_at;
    p.tool_version = kToolVersion;
    return Fcm(nodes, std::move(matrix), std::move(p), std::move(notes));
}

struct ExtractionResult
{
    Fcm fcm;
    ExtractionArtifacts artifacts;
};

inline json edge_candidate_to_json(const CausalEdgeCandidate& e)
{
    return {{"source", e.source_label},
            {"target", e.target_label},
            {"sign", e.sign == Sign::positive ? "+" : "-"},
            {"weight", e.weight},
            {"evidence_quote", e.evidence_quote},
            {"trigger_verb", e.trigger_verb}};
}

/// Audit record of one extraction. Responses are referenced by request hash;
/// the bodies live in the replay transcripts.
inline json artifacts_to_json(const ExtractionArtifacts& a)
{
    json nouns = json::array();
    for (const auto& n : a.nouns)
    {
        json j = {{"surface", n.surface}, {"sentence_index", n.sentence_index}};
        if (n.resolved_from_pronoun)
            j["pronoun"] = *n.resolved_from_pronoun;
        nouns.push_back(std::move(j));
    }
    json nodes = json::array();
    for (const auto& n : a.nodes)
        nodes.push_back({{"id", n.id}, {"label", n.label}, {"evidence", n.evidence.value_or("")}});
    json edges = json::array();
    for (const auto& e : a.edges)
        edges.push_back(edge_candidate_to_json(e));
    json rejected = json::array();
    for (const auto& r : a.rejected)
    {
        auto j = edge_candidate_to_json(r.edge);
        j["reason"] = r.reason;
        rejected.push_back(std::move(j));
    }
    json exchanges = json::array();
    for (const auto& x : a.transcripts)
        exchanges.push_back({{"stage", x.stage},
                             {"request_hash", x.request_hash},
                             {"response_sha256", sha256_hex(x.response.content)}});
    return {{"doc_id", a.doc_id},   {"nouns", nouns},         {"nodes", nodes},
            {"edges", edges},       {"rejected", rejected},   {"exchanges", exchanges},
            {"log", a.log},         {"transcript_hash", a.transcript_hash()}};
}

/// Runs the three steps, validates every edge quote against the document and
/// builds the FCM. Edges whose quotes cannot be found are kept in
/// `artifacts.rejected`, never in the map.
inline ExtractionResult extract_fcm(const SourceDocument& doc, llm::Provider& provider,
                                    const ExtractionConfig& config)
{
    ExtractionResult r;
    auto& a = r.artifacts;
    a.doc_id = doc.doc_id;
    a.nouns = extract_nouns(doc, provider, config, a);
    a.nodes = refine_nodes(a.nouns, doc, provider, config, a);
    std::vector<CausalEdgeCandidate> candidates;
    if (!a.nodes.empty())
        candidates = extract_edges(a.nodes, doc, provider, config, a);
    auto report = validate_evidence(candidates, doc);
    a.edges = std::move(report.accepted);
    a.rejected = std::move(report.rejected);
    for (const auto& rej : a.rejected)
        a.log.push_back("validate: rejected edge '" + rej.edge.source_label + "' -> '" + rej.edge.target_label +
                        "' (" + rej.reason + ", potential hallucination)");
    r.fcm = build_fcm(a.nodes, a.edges, doc, a, config);
    return r;
}

} // namespace fcm::extraction
