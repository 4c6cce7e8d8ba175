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
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcm/error.hpp"
#include "fcm/util/text.hpp"

namespace fcm
{

/// A causal concept. `evidence` is the verbatim source text the concept was
/// drawn from, when known.
struct ConceptNode
{
    std::string id;
    std::string label;
    std::optional<std::string> evidence;

    friend bool operator==(const ConceptNode&, const ConceptNode&) = default;
};

/// Square matrix of causal weights in [-1, 1]. Row = cause, column = effect;
/// a zero entry means "no edge".
class EdgeMatrix
{
  public:
    EdgeMatrix() = default;
    explicit EdgeMatrix(std::size_t n) : n_(n), w_(n * n, 0.0) {}

    static EdgeMatrix from_rows(const std::vector<std::vector<double>>& rows)
    {
        EdgeMatrix m(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            if (rows[i].size() != rows.size())
                fail(ErrorKind::shape, "edge matrix rows must be square");
            for (std::size_t j = 0; j < rows.size(); ++j)
                m.set(i, j, rows[i][j]);
        }
        return m;
    }

    std::size_t size() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }

    void set(std::size_t i, std::size_t j, double w)
    {
        if (i >= n_ || j >= n_)
            fail(ErrorKind::shape, "edge index out of range");
        if (!std::isfinite(w) || w < -1.0 || w > 1.0)
            fail(ErrorKind::input, "edge weight must lie in [-1, 1]");
        w_[i * n_ + j] = w;
    }

    std::span<const double> row(std::size_t i) const { return {w_.data() + i * n_, n_}; }

    std::size_t nonzero_count() const
    {
        std::size_t c = 0;
        for (double w : w_)
            c += w != 0.0;
        return c;
    }

    friend bool operator==(const EdgeMatrix&, const EdgeMatrix&) = default;

  private:
    std::size_t n_ = 0;
    std::vector<double> w_;
};

/// Node activations in [0, 1] at time step `t`.
class StateVector
{
  public:
    StateVector() = default;
    explicit StateVector(std::vector<double> values, std::size_t t = 0) : values_(std::move(values)), t_(t)
    {
        for (double v : values_)
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                fail(ErrorKind::input, "state components must lie in [0, 1]");
    }

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t t() const noexcept { return t_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    friend bool operator==(const StateVector&, const StateVector&) = default;

  private:
    std::vector<double> values_;
    std::size_t t_ = 0;
};

/// The bounded nonlinearity applied after the weighted sum.
struct Squasher
{
    enum class Kind
    {
        hard_threshold,
        logistic,
        clamped_linear,
    };

    Kind kind = Kind::hard_threshold;
    double threshold = 0.0;
    double steepness = 5.0;

    static Squasher hard(double threshold = 0.0) { return {Kind::hard_threshold, threshold, 5.0}; }
    static Squasher logistic(double steepness = 5.0)
    {
        if (!(steepness > 0.0) || !std::isfinite(steepness))
            fail(ErrorKind::input, "logistic steepness must be positive");
        return {Kind::logistic, 0.0, steepness};
    }
    static Squasher clamped_linear() { return {Kind::clamped_linear, 0.0, 5.0}; }

    bool is_binary() const noexcept { return kind == Kind::hard_threshold; }

    friend bool operator==(const Squasher&, const Squasher&) = default;
};

struct MixComponent
{
    std::string digest;
    double weight = 0.0;

    friend bool operator==(const MixComponent&, const MixComponent&) = default;
};

struct Provenance
{
    std::string source;
    std::string doc_id;
    std::map<std::string, std::string> template_hashes;
    std::string transcript_hash;
    std::string created_at;
    std::string tool_version;
    std::vector<MixComponent> components;

    /// An FCM without a transcript hash cannot be regenerated from recorded
    /// LLM exchanges.
    bool reproducible() const noexcept { return !transcript_hash.empty(); }

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct EdgeAnnotation
{
    std::string evidence_quote;
    std::string trigger_verb;

    friend bool operator==(const EdgeAnnotation&, const EdgeAnnotation&) = default;
};

using EdgeKey = std::pair<std::size_t, std::size_t>;

/// A fuzzy cognitive map: ordered concept nodes, their edge matrix and where
/// they came from. Immutable; edits return a new value.
class Fcm
{
  public:
    Fcm() = default;

    Fcm(std::vector<ConceptNode> nodes, EdgeMatrix edges, Provenance provenance = {},
        std::map<EdgeKey, EdgeAnnotation> annotations = {})
        : nodes_(std::move(nodes)), edges_(std::move(edges)), provenance_(std::move(provenance)),
          annotations_(std::move(annotations))
    {
        if (edges_.size() != nodes_.size())
            fail(ErrorKind::shape, "edge matrix size must equal node count");
        std::set<std::string> ids;
        for (const auto& node : nodes_)
        {
            if (text::trim(node.label).empty())
                fail(ErrorKind::input, "concept labels must be non-empty");
            if (node.id.empty())
                fail(ErrorKind::input, "concept ids must be non-empty");
            if (!ids.insert(node.id).second)
                fail(ErrorKind::input, "duplicate concept id '" + node.id + "'");
        }
        for (auto it = annotations_.begin(); it != annotations_.end();)
        {
            const auto [i, j] = it->first;
            if (i >= nodes_.size() || j >= nodes_.size())
                fail(ErrorKind::shape, "edge annotation out of range");
            // Annotations only describe existing edges.
            if (edges_(i, j) == 0.0 || (it->second.evidence_quote.empty() && it->second.trigger_verb.empty()))
                it = annotations_.erase(it);
            else
                ++it;
        }
    }

    const std::vector<ConceptNode>& nodes() const noexcept { return nodes_; }
    const EdgeMatrix& edges() const noexcept { return edges_; }
    const Provenance& provenance() const noexcept { return provenance_; }
    const std::map<EdgeKey, EdgeAnnotation>& annotations() const noexcept { return annotations_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    std::vector<std::string> labels() const
    {
        std::vector<std::string> out;
        out.reserve(nodes_.size());
        for (const auto& n : nodes_)
            out.push_back(n.label);
        return out;
    }

    std::optional<std::size_t> index_of_id(std::string_view id) const
    {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].id == id)
                return i;
        return std::nullopt;
    }

    std::optional<std::size_t> index_of_label(std::string_view label) const
    {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].label == label)
                return i;
        return std::nullopt;
    }

    const EdgeAnnotation* annotation(std::size_t i, std::size_t j) const
    {
        auto it = annotations_.find({i, j});
        return it == annotations_.end() ? nullptr : &it->second;
    }

    /// Copy with one edge weight replaced. Setting 0 removes the edge.
    Fcm with_edge(std::size_t i, std::size_t j, double w) const
    {
        auto edges = edges_;
        edges.set(i, j, w);
        auto notes = annotations_;
        if (w == 0.0)
            notes.erase({i, j});
        return Fcm(nodes_, std::move(edges), provenance_, std::move(notes));
    }

    Fcm with_provenance(Provenance p) const { return Fcm(nodes_, edges_, std::move(p), annotations_); }

    friend bool operator==(const Fcm&, const Fcm&) = default;

  private:
    std::vector<ConceptNode> nodes_;
    EdgeMatrix edges_;
    Provenance provenance_;
    std::map<EdgeKey, EdgeAnnotation> annotations_;
};

enum class EquilibriumKind
{
    fixed_point,
    limit_cycle,
    unresolved,
};

inline std::string_view to_string(EquilibriumKind k)
{
    switch (k)
    {
    case EquilibriumKind::fixed_point: return "fixed-point";
    case EquilibriumKind::limit_cycle: return "limit-cycle";
    case EquilibriumKind::unresolved: return "unresolved";
    }
    return "unresolved";
}

/// Attractor identity: the repeating activation block rotated so that its
/// lexicographically smallest state comes first.
using Attractor = std::vector<std::vector<double>>;

struct EquilibriumClassification
{
    EquilibriumKind kind = EquilibriumKind::unresolved;
    std::size_t period = 0; // 0 when unresolved
    std::vector<StateVector> cycle_states;
    std::size_t transient_length = 0;

    Attractor canonical_cycle() const
    {
        Attractor cycle;
        for (const auto& s : cycle_states)
            cycle.push_back(s.values());
        if (cycle.empty())
            return cycle;
        auto smallest = std::min_element(cycle.begin(), cycle.end());
        std::rotate(cycle.begin(), smallest, cycle.end());
        return cycle;
    }

    friend bool operator==(const EquilibriumClassification&, const EquilibriumClassification&) = default;
};

struct Trajectory
{
    std::vector<StateVector> states;
    EquilibriumClassification equilibrium;
};

} // namespace fcm
