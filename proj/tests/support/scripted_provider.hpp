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

#include <atomic>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fcm/extraction/llm.hpp"
#include "fcm/io/files.hpp"
#include "fcm/mixer/mixer.hpp"
#include "fcm/util/text.hpp"

namespace fcm::testing
{

/// Canned answers for one document: one block of response lines per step.
struct Script
{
    std::vector<std::string> nouns;
    std::vector<std::string> nodes;
    std::vector<std::string> edges;

    /// Sections start with "[nouns]", "[nodes]" or "[edges]"; '#' lines
    /// before the first section are comments.
    static Script parse(const std::string& body)
    {
        Script s;
        std::vector<std::string>* section = nullptr;
        for (const auto& line : text::lines(body))
        {
            if (line == "[nouns]")
                section = &s.nouns;
            else if (line == "[nodes]")
                section = &s.nodes;
            else if (line == "[edges]")
                section = &s.edges;
            else if (section && !line.empty())
                section->push_back(line);
        }
        return s;
    }

    static Script load(const fs::path& path) { return parse(read_file(path)); }
};

/// Deterministic stand-in for a chat model. It recognises the step from the
/// template header and the document from the user content, then answers from
/// the matching script. Step 3 answers only the pairs asked in the batch.
class ScriptedProvider : public llm::Provider
{
  public:
    void add(std::string document_text, Script script) { scripts_.emplace_back(std::move(document_text), std::move(script)); }

    std::size_t calls() const noexcept { return calls_.load(); }

    llm::Response complete(const llm::Request& request) override
    {
        ++calls_;
        const Script& s = find(request.user_content);
        const auto header = text::lines(request.system_instruction).front();
        std::vector<std::string> answer;
        if (header.find("step1") != std::string::npos)
            answer = s.nouns;
        else if (header.find("step2") != std::string::npos)
            answer = s.nodes;
        else if (header.find("step3") != std::string::npos)
            answer = edges_for_batch(s, request.user_content);
        else
            fail(ErrorKind::internal, "scripted provider cannot tell the step from: " + header);

        llm::Response r;
        if (answer.empty())
            r.content = "NONE\n";
        for (const auto& line : answer)
            r.content += line + "\n";
        r.raw_provider_payload = r.content;
        return r;
    }

  private:
    const Script& find(const std::string& user_content) const
    {
        for (const auto& [doc, script] : scripts_)
            if (user_content.find("DOCUMENT:\n" + doc + "\n") != std::string::npos)
                return script;
        fail(ErrorKind::fixture, "scripted provider has no script for this document");
    }

    static std::vector<std::string> edges_for_batch(const Script& s, const std::string& user_content)
    {
        std::set<std::pair<std::string, std::string>> asked;
        auto at = user_content.find("\nPAIRS:\n");
        if (at != std::string::npos)
            for (const auto& line : text::lines(user_content.substr(at + 8)))
            {
                auto dot = line.find(". ");
                auto arrow = line.find(" -> ");
                if (dot == std::string::npos || arrow == std::string::npos)
                    continue;
                asked.emplace(canonical_label(line.substr(dot + 2, arrow - dot - 2)),
                              canonical_label(line.substr(arrow + 4)));
            }
        std::vector<std::string> out;
        for (const auto& line : s.edges)
        {
            auto f = text::split(line, '|');
            if (f.size() >= 2 && asked.count({canonical_label(f[0]), canonical_label(f[1])}))
                out.push_back(line);
        }
        return out;
    }

    std::vector<std::pair<std::string, Script>> scripts_;
    std::atomic<std::size_t> calls_{0};
};

} // namespace fcm::testing
