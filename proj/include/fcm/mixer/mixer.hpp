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

#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fcm/core/types.hpp"
#include "fcm/io/fcm_json.hpp"
#include "fcm/util/hash.hpp"
#include "fcm/util/text.hpp"

namespace fcm
{

/// Tolerance on the sum of mixing weights.
inline constexpr double kConvexTolerance = 1e-12;

/// Node identity key: trimmed, whitespace-collapsed and case-folded.
inline std::string canonical_label(std::string_view label)
{
    return text::casefold(text::collapse_whitespace(label));
}

/// Synonym table from one label to another. Keys and values are
/// canonicalized before lookup; resolution is a single hop.
using AliasMap = std::map<std::string, std::string>;

struct NodeAlignment
{
    /// Display label of each union node (first appearance wins).
    std::vector<std::string> union_labels;
    /// Canonical identity key of each union node.
    std::vector<std::string> union_keys;
    /// index_maps[k][i] is the union index of local node i of component k.
    std::vector<std::vector<std::size_t>> index_maps;

    std::size_t size() const noexcept { return union_labels.size(); }
};

namespace detail
{

inline std::string resolve_key(std::string_view label, const AliasMap& aliases)
{
    auto key = canonical_label(label);
    for (const auto& [from, to] : aliases)
        if (canonical_label(from) == key)
            return canonical_label(to);
    return key;
}

} // namespace detail

/// Unions the node sets of `components` in input order.
inline NodeAlignment align_nodes(std::span<const Fcm> components, const AliasMap& aliases = {})
{
    NodeAlignment a;
    std::unordered_map<std::string, std::size_t> position;
    for (const auto& fcm : components)
    {
        std::vector<std::size_t> map;
        std::set<std::string> local;
        for (const auto& node : fcm.nodes())
        {
            auto key = detail::resolve_key(node.label, aliases);
            if (!local.insert(key).second)
                fail(ErrorKind::input, "component has two nodes with canonical label '" + key + "'");
            auto [it, inserted] = position.emplace(key, a.union_labels.size());
            if (inserted)
            {
                a.union_labels.push_back(node.label);
                a.union_keys.push_back(key);
            }
            map.push_back(it->second);
        }
        a.index_maps.push_back(std::move(map));
    }
    return a;
}

/// Embeds `edges` into an N x N matrix; unmapped rows and columns are zero.
inline EdgeMatrix zero_pad(const EdgeMatrix& edges, std::span<const std::size_t> index_map, std::size_t n)
{
    if (index_map.size() != edges.size())
        fail(ErrorKind::input, "index map must cover every local node");
    if (n < edges.size())
        fail(ErrorKind::input, "padded size smaller than source matrix");
    std::vector<bool> used(n, false);
    for (auto u : index_map)
    {
        if (u >= n)
            fail(ErrorKind::input, "index map target out of range");
        if (used[u])
            fail(ErrorKind::input, "index map is not injective");
        used[u] = true;
    }
    EdgeMatrix out(n);
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (std::size_t j = 0; j < edges.size(); ++j)
            if (edges(i, j) != 0.0)
                out.set(index_map[i], index_map[j], edges(i, j));
    return out;
}

struct MixSpec
{
    std::vector<Fcm> components;
    std::vector<double> weights;
    AliasMap aliases;
};

inline void validate_mix_weights(std::span<const double> weights, std::size_t component_count)
{
    if (component_count == 0)
        fail(ErrorKind::input, "mixing needs at least one component");
    if (weights.size() != component_count)
        fail(ErrorKind::input, "got " + std::to_string(weights.size()) + " weights for " +
                                   std::to_string(component_count) + " components");
    double sum = 0.0;
    for (double v : weights)
    {
        if (!std::isfinite(v) || v < 0.0)
            fail(ErrorKind::input, "mixing weights must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kConvexTolerance)
        fail(ErrorKind::input, "mixing weights must sum to 1 (got " + std::to_string(sum) + ")");
}

/// Convex mixture of zero-padded component edge matrices over the union node
/// set. Node metadata and edge annotations come from the first component that
/// supplies them.
inline Fcm mix(const MixSpec& spec)
{
    validate_mix_weights(spec.weights, spec.components.size());
    const auto align = align_nodes(spec.components, spec.aliases);
    const std::size_t n = align.size();

    std::vector<double> acc(n * n, 0.0);
    std::vector<bool> support(n * n, false);
    std::map<EdgeKey, EdgeAnnotation> notes;
    for (std::size_t k = 0; k < spec.components.size(); ++k)
    {
        const auto& comp = spec.components[k];
        const auto padded = zero_pad(comp.edges(), align.index_maps[k], n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
            {
                double w = padded(i, j);
                if (w == 0.0)
                    continue;
                acc[i * n + j] += spec.weights[k] * w;
                support[i * n + j] = true;
            }
        for (const auto& [key, note] : comp.annotations())
            notes.emplace(EdgeKey{align.index_maps[k][key.first], align.index_maps[k][key.second]}, note);
    }

    EdgeMatrix edges(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (support[i * n + j])
                // Rounding can push a sum of weights within tolerance of 1 just past the bound.
                edges.set(i, j, std::clamp(acc[i * n + j], -1.0, 1.0));

    std::vector<ConceptNode> nodes(n);
    std::vector<bool> filled(n, false);
    std::set<std::string> ids;
    for (std::size_t k = 0; k < spec.components.size(); ++k)
        for (std::size_t i = 0; i < spec.components[k].size(); ++i)
        {
            auto u = align.index_maps[k][i];
            if (filled[u])
                continue;
            filled[u] = true;
            nodes[u] = spec.components[k].nodes()[i];
            std::string id = nodes[u].id;
            for (int suffix = 2; ids.count(id); ++suffix)
                id = nodes[u].id + "-" + std::to_string(suffix);
            nodes[u].id = id;
            ids.insert(id);
        }

    Provenance p;
    p.source = "mixture";
    std::string transcripts;
    bool all_reproducible = true;
    for (std::size_t k = 0; k < spec.components.size(); ++k)
    {
        p.components.push_back({fcm_digest(spec.components[k]), spec.weights[k]});
        all_reproducible = all_reproducible && spec.components[k].provenance().reproducible();
        transcripts += spec.components[k].provenance().transcript_hash + "\n";
    }
    // A mixture can be regenerated exactly when every component can.
    if (all_reproducible)
        p.transcript_hash = sha256_hex(transcripts);
    return Fcm(std::move(nodes), std::move(edges), std::move(p), std::move(notes));
}

} // namespace fcm
