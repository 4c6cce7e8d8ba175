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

#include <filesystem>
#include <map>
#include <string>

#include "fcm/io/files.hpp"
#include "fcm/util/hash.hpp"

namespace fcm::extraction
{

/// A system-instruction template with `{{name}}` placeholders.
struct PromptTemplate
{
    std::string name;
    std::string text;

    std::string hash() const { return sha256_hex(text); }

    std::string render(const std::map<std::string, std::string>& vars) const
    {
        std::string out;
        std::size_t pos = 0;
        while (true)
        {
            auto open = text.find("{{", pos);
            if (open == std::string::npos)
            {
                out += text.substr(pos);
                return out;
            }
            auto close = text.find("}}", open + 2);
            if (close == std::string::npos)
                fail(ErrorKind::input, "unterminated placeholder in template " + name);
            out += text.substr(pos, open - pos);
            auto key = text.substr(open + 2, close - open - 2);
            auto it = vars.find(key);
            if (it == vars.end())
                fail(ErrorKind::input, "template " + name + " needs a value for {{" + key + "}}");
            out += it->second;
            pos = close + 2;
        }
    }
};

struct PromptTemplates
{
    PromptTemplate nouns;
    PromptTemplate nodes;
    PromptTemplate edges;

    /// Reads step1.txt, step2.txt and step3.txt from `dir`.
    static PromptTemplates load(const std::filesystem::path& dir)
    {
        return {{"step1", read_file(dir / "step1.txt")},
                {"step2", read_file(dir / "step2.txt")},
                {"step3", read_file(dir / "step3.txt")}};
    }

    std::map<std::string, std::string> hashes() const
    {
        return {{nouns.name, nouns.hash()}, {nodes.name, nodes.hash()}, {edges.name, edges.hash()}};
    }
};

} // namespace fcm::extraction
