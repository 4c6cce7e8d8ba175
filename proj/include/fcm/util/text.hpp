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
#include <cctype>
#include <cstdio>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fcm::text
{

inline bool is_space(char c)
{
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b]))
        ++b;
    while (e > b && is_space(s[e - 1]))
        --e;
    return std::string(s.substr(b, e - b));
}

/// Trims and replaces every whitespace run with a single space.
inline std::string collapse_whitespace(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s)
    {
        if (is_space(c))
        {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space)
            out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

/// ASCII case folding. Non-ASCII bytes pass through unchanged.
inline std::string casefold(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true)
    {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos)
        {
            parts.emplace_back(s.substr(start));
            return parts;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::vector<std::string> lines(std::string_view s)
{
    auto out = split(s, '\n');
    for (auto& l : out)
        if (!l.empty() && l.back() == '\r')
            l.pop_back();
    return out;
}

/// Case-folded alphanumeric tokens; everything else separates tokens.
inline std::set<std::string> token_set(std::string_view s)
{
    std::set<std::string> tokens;
    std::string cur;
    for (char c : s)
    {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!cur.empty())
        {
            tokens.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty())
        tokens.insert(cur);
    return tokens;
}

/// Naive sentence splitter used only to index sentences for display.
inline std::vector<std::string> split_sentences(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        cur.push_back(s[i]);
        bool terminal = s[i] == '.' || s[i] == '!' || s[i] == '?';
        bool boundary = i + 1 == s.size() || is_space(s[i + 1]);
        if (terminal && boundary)
        {
            auto sentence = collapse_whitespace(cur);
            if (!sentence.empty())
                out.push_back(std::move(sentence));
            cur.clear();
        }
    }
    auto tail = collapse_whitespace(cur);
    if (!tail.empty())
        out.push_back(std::move(tail));
    return out;
}

inline std::string slugify(std::string_view s)
{
    std::string out;
    for (char c : s)
    {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else if (!out.empty() && out.back() != '-')
            out.push_back('-');
    }
    while (!out.empty() && out.back() == '-')
        out.pop_back();
    return out.empty() ? std::string("node") : out;
}

/// Fixed six-decimal rendering shared by the JSON and CSV writers.
inline std::string format_fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    if (s == "-0.000000")
        s = "0.000000";
    return s;
}

} // namespace fcm::text
