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

#include <json.hpp>

#include <cmath>
#include <set>
#include <string>

#include "fcm/core/types.hpp"
#include "fcm/util/hash.hpp"
#include "fcm/util/text.hpp"
#include "fcm/version.hpp"

namespace fcm
{

using json = nlohmann::json;

inline constexpr int kFcmSchemaVersion = 1;

namespace detail
{

inline void dump_canonical(const json& j, std::string& out, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type())
    {
    case json::value_t::object:
    {
        if (j.empty())
        {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        // nlohmann::json objects are std::map backed, so iteration is key-sorted.
        for (auto it = j.begin(); it != j.end(); ++it)
        {
            if (!first)
                out += ",\n";
            first = false;
            out += inner;
            out += json(it.key()).dump();
            out += ": ";
            dump_canonical(it.value(), out, indent + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case json::value_t::array:
    {
        if (j.empty())
        {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i)
        {
            if (i)
                out += ",\n";
            out += inner;
            dump_canonical(j[i], out, indent + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case json::value_t::number_float:
        out += text::format_fixed(j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace detail

/// Canonical text form: sorted keys, two-space indentation, floats with six
/// decimals, trailing newline. Equal documents produce equal bytes.
inline std::string canonical_dump(const json& j)
{
    std::string out;
    detail::dump_canonical(j, out, 0);
    out += "\n";
    return out;
}

inline json nodes_to_json(const Fcm& fcm)
{
    json nodes = json::array();
    for (const auto& n : fcm.nodes())
    {
        json node = {{"id", n.id}, {"label", n.label}};
        if (n.evidence)
            node["evidence"] = *n.evidence;
        nodes.push_back(std::move(node));
    }
    return nodes;
}

inline json edges_to_json(const Fcm& fcm)
{
    json edges = json::array();
    const auto& e = fcm.edges();
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t j = 0; j < e.size(); ++j)
        {
            if (e(i, j) == 0.0)
                continue;
            json edge = {{"source_id", fcm.nodes()[i].id},
                         {"target_id", fcm.nodes()[j].id},
                         {"weight", e(i, j)}};
            if (const auto* note = fcm.annotation(i, j))
            {
                edge["evidence_quote"] = note->evidence_quote;
                edge["trigger_verb"] = note->trigger_verb;
            }
            edges.push_back(std::move(edge));
        }
    return edges;
}

inline json provenance_to_json(const Provenance& p)
{
    json components = json::array();
    for (const auto& c : p.components)
        components.push_back({{"digest", c.digest}, {"weight", c.weight}});
    return {{"source", p.source},
            {"doc_id", p.doc_id},
            {"template_hashes", json(p.template_hashes)},
            {"transcript_hash", p.transcript_hash},
            {"created_at", p.created_at},
            {"tool_version", p.tool_version},
            {"components", std::move(components)}};
}

inline json fcm_to_json(const Fcm& fcm)
{
    return {{"schema_version", kFcmSchemaVersion},
            {"nodes", nodes_to_json(fcm)},
            {"edges", edges_to_json(fcm)},
            {"provenance", provenance_to_json(fcm.provenance())}};
}

inline std::string serialize_fcm(const Fcm& fcm)
{
    return canonical_dump(fcm_to_json(fcm));
}

/// Content address of the causal structure: nodes, edges and edge evidence.
/// Provenance is excluded so that identical maps share a digest.
inline std::string fcm_digest(const Fcm& fcm)
{
    return sha256_hex(canonical_dump({{"nodes", nodes_to_json(fcm)}, {"edges", edges_to_json(fcm)}}));
}

namespace detail
{

[[noreturn]] inline void schema_error(const std::string& what)
{
    fail(ErrorKind::schema, what);
}

inline std::string string_field(const json& obj, const char* key, bool required)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null())
    {
        if (required)
            schema_error(std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string())
        schema_error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

} // namespace detail

/// Builds a validated FCM from its JSON document. Every violation of the file
/// invariants is reported as a schema error.
inline Fcm fcm_from_json(const json& doc)
{
    using detail::schema_error;
    if (!doc.is_object())
        schema_error("FCM document must be a JSON object");
    auto version = doc.find("schema_version");
    if (version == doc.end() || !version->is_number_integer())
        schema_error("missing integer schema_version");
    if (version->get<int>() != kFcmSchemaVersion)
        schema_error("unsupported schema_version " + std::to_string(version->get<long long>()) +
                     " (supported: " + std::to_string(kFcmSchemaVersion) + ")");

    auto nodes_it = doc.find("nodes");
    if (nodes_it == doc.end() || !nodes_it->is_array())
        schema_error("'nodes' must be an array");
    std::vector<ConceptNode> nodes;
    std::set<std::string> ids;
    for (const auto& n : *nodes_it)
    {
        if (!n.is_object())
            schema_error("node entries must be objects");
        ConceptNode node;
        node.id = detail::string_field(n, "id", true);
        node.label = detail::string_field(n, "label", true);
        if (n.contains("evidence") && !n["evidence"].is_null())
            node.evidence = detail::string_field(n, "evidence", true);
        if (node.id.empty())
            schema_error("node id must be non-empty");
        if (text::trim(node.label).empty())
            schema_error("node '" + node.id + "' has an empty label");
        if (!ids.insert(node.id).second)
            schema_error("duplicate node id '" + node.id + "'");
        nodes.push_back(std::move(node));
    }

    const std::size_t n = nodes.size();
    EdgeMatrix edges(n);
    std::map<EdgeKey, EdgeAnnotation> notes;
    std::set<EdgeKey> seen;
    auto index_of = [&](const std::string& id) {
        for (std::size_t i = 0; i < n; ++i)
            if (nodes[i].id == id)
                return i;
        schema_error("edge endpoint '" + id + "' does not name a node");
    };
    if (doc.contains("edges"))
    {
        const auto& list = doc["edges"];
        if (!list.is_array())
            schema_error("'edges' must be an array");
        for (const auto& e : list)
        {
            if (!e.is_object())
                schema_error("edge entries must be objects");
            auto i = index_of(detail::string_field(e, "source_id", true));
            auto j = index_of(detail::string_field(e, "target_id", true));
            if (!e.contains("weight") || !e["weight"].is_number())
                schema_error("edge weight must be a number");
            double w = e["weight"].get<double>();
            if (!std::isfinite(w) || w < -1.0 || w > 1.0)
                schema_error("edge weight " + std::to_string(w) + " outside [-1, 1]");
            if (!seen.insert({i, j}).second)
                schema_error("duplicate edge " + nodes[i].id + " -> " + nodes[j].id);
            edges.set(i, j, w);
            notes[{i, j}] = {detail::string_field(e, "evidence_quote", false),
                             detail::string_field(e, "trigger_verb", false)};
        }
    }

    Provenance p;
    if (auto it = doc.find("provenance"); it != doc.end() && it->is_object())
    {
        const auto& pj = *it;
        p.source = detail::string_field(pj, "source", false);
        p.doc_id = detail::string_field(pj, "doc_id", false);
        p.transcript_hash = detail::string_field(pj, "transcript_hash", false);
        p.created_at = detail::string_field(pj, "created_at", false);
        p.tool_version = detail::string_field(pj, "tool_version", false);
        if (auto th = pj.find("template_hashes"); th != pj.end() && th->is_object())
            for (auto t = th->begin(); t != th->end(); ++t)
            {
                if (!t->is_string())
                    schema_error("template hashes must be strings");
                p.template_hashes[t.key()] = t->get<std::string>();
            }
        if (auto cs = pj.find("components"); cs != pj.end() && cs->is_array())
            for (const auto& c : *cs)
            {
                if (!c.is_object() || !c.contains("weight") || !c["weight"].is_number())
                    schema_error("mixture components need a numeric weight");
                p.components.push_back({detail::string_field(c, "digest", true), c["weight"].get<double>()});
            }
    }
    return Fcm(std::move(nodes), std::move(edges), std::move(p), std::move(notes));
}

inline Fcm parse_fcm(std::string_view text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        fail(ErrorKind::parse, std::string("malformed FCM JSON: ") + e.what());
    }
    return fcm_from_json(doc);
}

} // namespace fcm
