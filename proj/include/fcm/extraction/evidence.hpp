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

#include <string>
#include <string_view>
#include <vector>

#include "fcm/error.hpp"
#include "fcm/util/hash.hpp"
#include "fcm/util/text.hpp"

namespace fcm::extraction
{

struct SourceDocument
{
    std::string doc_id;
    std::string text;
    std::string origin;

    /// The id is the SHA-256 of the text, so identical documents share it.
    static SourceDocument from_text(std::string text, std::string origin = {})
    {
        if (text::trim(text).empty())
            fail(ErrorKind::input, "document text is empty");
        SourceDocument d;
        d.doc_id = sha256_hex(text);
        d.text = std::move(text);
        d.origin = std::move(origin);
        return d;
    }
};

enum class Sign
{
    positive,
    negative,
};

struct CausalEdgeCandidate
{
    std::string source_label;
    std::string target_label;
    Sign sign = Sign::positive;
    double weight = 0.0;
    std::string evidence_quote;
    std::string trigger_verb;

    friend bool operator==(const CausalEdgeCandidate&, const CausalEdgeCandidate&) = default;
};

struct RejectedEdge
{
    CausalEdgeCandidate edge;
    std::string reason;
};

struct EvidenceReport
{
    std::vector<CausalEdgeCandidate> accepted;
    std::vector<RejectedEdge> rejected;
};

namespace detail
{

inline bool strip_prefix(std::string& s, std::string_view p)
{
    if (s.size() < p.size() || s.compare(0, p.size(), p) != 0)
        return false;
    s.erase(0, p.size());
    return true;
}

inline bool strip_suffix(std::string& s, std::string_view p)
{
    if (s.size() < p.size() || s.compare(s.size() - p.size(), p.size(), p) != 0)
        return false;
    s.erase(s.size() - p.size());
    return true;
}

} // namespace detail

/// Normalizes a quote for lookup: collapsed whitespace, no surrounding
/// quotation marks, no trailing sentence punctuation. Case is kept.
inline std::string normalize_quote(std::string_view quote)
{
    static constexpr std::string_view kOpen[] = {"\"", "'", "\xE2\x80\x9C", "\xE2\x80\x98"};
    static constexpr std::string_view kClose[] = {"\"", "'", "\xE2\x80\x9D", "\xE2\x80\x99"};
    auto s = text::collapse_whitespace(quote);
    for (bool changed = true; changed && !s.empty();)
    {
        changed = false;
        for (auto p : kOpen)
            changed |= detail::strip_prefix(s, p);
        for (auto p : kClose)
            changed |= detail::strip_suffix(s, p);
        while (!s.empty() && std::string_view(".,;:!?").find(s.back()) != std::string_view::npos)
        {
            s.pop_back();
            changed = true;
        }
        s = text::trim(s);
    }
    return s;
}

/// Splits candidates into those whose quote occurs verbatim in the document
/// and those that do not.
inline EvidenceReport validate_evidence(const std::vector<CausalEdgeCandidate>& candidates, const SourceDocument& doc)
{
    const auto haystack = text::collapse_whitespace(doc.text);
    EvidenceReport report;
    for (const auto& c : candidates)
    {
        auto q = normalize_quote(c.evidence_quote);
        if (q.empty())
            report.rejected.push_back({c, "empty-quote"});
        else if (haystack.find(q) == std::string::npos)
            report.rejected.push_back({c, "quote-not-found"});
        else
            report.accepted.push_back(c);
    }
    return report;
}

} // namespace fcm::extraction
