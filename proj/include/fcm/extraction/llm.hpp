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
#include <filesystem>
#include <string>

#include "fcm/error.hpp"
#include "fcm/io/fcm_json.hpp"
#include "fcm/io/files.hpp"
#include "fcm/util/hash.hpp"
#include "fcm/util/text.hpp"

namespace fcm::llm
{

/// One chat-style completion request: a fixed system instruction plus the
/// per-call user content.
struct Request
{
    std::string system_instruction;
    std::string user_content;
    double temperature = 1.0;
    double top_p = 0.95;
    std::string model;

    friend bool operator==(const Request&, const Request&) = default;
};

struct Response
{
    std::string content;
    /// Whatever the provider returned verbatim (HTTP body, transcript file).
    std::string raw_provider_payload;
};

inline void validate(const Request& r)
{
    if (!std::isfinite(r.temperature) || r.temperature < 0.0 || r.temperature > 2.0)
        fail(ErrorKind::input, "temperature must lie in [0, 2]");
    if (!std::isfinite(r.top_p) || r.top_p <= 0.0 || r.top_p > 1.0)
        fail(ErrorKind::input, "top_p must lie in (0, 1]");
}

inline json request_to_json(const Request& r)
{
    return {{"model", r.model},
            {"system_instruction", r.system_instruction},
            {"user_content", r.user_content},
            {"temperature", r.temperature},
            {"top_p", r.top_p}};
}

/// SHA-256 of the key-sorted compact JSON form of the request.
inline std::string request_hash(const Request& r)
{
    return sha256_hex(request_to_json(r).dump());
}

class Provider
{
  public:
    virtual ~Provider() = default;
    virtual Response complete(const Request& request) = 0;
};

// Transcript files: "<request-hash>.txt" holding a short header, a "---"
// separator line, and then the response content byte for byte.
inline constexpr std::string_view kTranscriptMagic = "fcm-replay 1";
inline constexpr std::string_view kTranscriptSeparator = "---\n";

inline std::string format_transcript(const Request& request, const Response& response)
{
    auto first_line = text::lines(request.system_instruction).front();
    std::string out(kTranscriptMagic);
    out += "\nrequest-hash: " + request_hash(request);
    out += "\nmodel: " + request.model;
    out += "\ninstruction: " + first_line;
    out += "\nuser-bytes: " + std::to_string(request.user_content.size());
    out += "\n";
    out += kTranscriptSeparator;
    out += response.content;
    return out;
}

/// Serves recorded responses keyed by request hash. Thread-safe: every call
/// reads its own file.
class ReplayProvider : public Provider
{
  public:
    explicit ReplayProvider(std::filesystem::path dir) : dir_(std::move(dir))
    {
        if (!std::filesystem::is_directory(dir_))
            fail(ErrorKind::fixture, "replay directory " + dir_.string() + " does not exist");
    }

    Response complete(const Request& request) override
    {
        validate(request);
        const auto hash = request_hash(request);
        const auto path = dir_ / (hash + ".txt");
        if (!std::filesystem::exists(path))
            fail(ErrorKind::fixture, "no recorded response for request " + hash + " in " + dir_.string());
        auto raw = read_file(path);
        if (raw.rfind(kTranscriptMagic, 0) != 0)
            fail(ErrorKind::fixture, "transcript " + path.string() + " has no replay header");
        auto sep = raw.find("\n" + std::string(kTranscriptSeparator));
        if (sep == std::string::npos)
            fail(ErrorKind::fixture, "transcript " + path.string() + " has no separator");
        auto header = raw.substr(0, sep);
        if (header.find("request-hash: " + hash) == std::string::npos)
            fail(ErrorKind::fixture, "transcript " + path.string() + " was recorded for a different request");
        Response r;
        r.content = raw.substr(sep + 1 + kTranscriptSeparator.size());
        r.raw_provider_payload = std::move(raw);
        return r;
    }

  private:
    std::filesystem::path dir_;
};

/// Forwards to another provider and writes each exchange as a replay
/// transcript.
class RecordingProvider : public Provider
{
  public:
    RecordingProvider(Provider& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir))
    {
        std::filesystem::create_directories(dir_);
    }

    Response complete(const Request& request) override
    {
        auto response = inner_.complete(request);
        write_file_atomic(dir_ / (request_hash(request) + ".txt"), format_transcript(request, response));
        return response;
    }

  private:
    Provider& inner_;
    std::filesystem::path dir_;
};

} // namespace fcm::llm
