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

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "fcm/extraction/llm.hpp"

namespace fcm::llm
{

struct HttpConfig
{
    /// e.g. "https://api.example.com/v1"; requests go to <base>/chat/completions.
    std::string base_url;
    std::string model;
    std::string api_key;
    double timeout_seconds = 60.0;
    int max_retries = 2;
    int backoff_ms = 500;
};

/// Provider for chat-completion style HTTP endpoints.
class HttpProvider : public Provider
{
  public:
    explicit HttpProvider(HttpConfig config) : config_(std::move(config))
    {
        auto scheme_end = config_.base_url.find("://");
        if (scheme_end == std::string::npos)
            fail(ErrorKind::input, "LLM base URL must include a scheme: " + config_.base_url);
        auto path_start = config_.base_url.find('/', scheme_end + 3);
        origin_ = config_.base_url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/')
            prefix_.pop_back();
    }

    Response complete(const Request& request) override
    {
        validate(request);
        const std::string model = request.model.empty() ? config_.model : request.model;
        json body = {{"model", model},
                     {"temperature", request.temperature},
                     {"top_p", request.top_p},
                     {"messages",
                      json::array({{{"role", "system"}, {"content", request.system_instruction}},
                                   {{"role", "user"}, {"content", request.user_content}}})}};
        const auto payload = body.dump();

        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        int attempts = 0;
        int last_status = 0;
        std::string last_problem;
        const int budget = 1 + std::max(0, config_.max_retries);
        while (attempts < budget)
        {
            if (attempts > 0 && config_.backoff_ms > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms * attempts));
            ++attempts;

            httplib::Client client(origin_);
            auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
            auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
            client.set_connection_timeout(usec);
            client.set_read_timeout(usec);
            client.set_write_timeout(usec);
            auto res = client.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
            if (!res)
            {
                last_status = 0;
                last_problem = httplib::to_string(res.error());
                continue;
            }
            last_status = res->status;
            if (res->status == 429 || res->status >= 500)
            {
                last_problem = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ProviderError("LLM endpoint rejected the request with HTTP " + std::to_string(res->status),
                                    attempts, res->status);
            try
            {
                auto reply = json::parse(res->body);
                Response out;
                out.content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
                out.raw_provider_payload = res->body;
                return out;
            }
            catch (const json::exception& e)
            {
                throw ProviderError(std::string("unexpected LLM response body: ") + e.what(), attempts, res->status);
            }
        }
        throw ProviderError("LLM request failed after " + std::to_string(attempts) + " attempts (" + last_problem + ")",
                            attempts, last_status);
    }

  private:
    HttpConfig config_;
    std::string origin_;
    std::string prefix_;
};

struct ProviderConfig
{
    enum class Kind
    {
        http,
        replay,
    };

    Kind kind = Kind::http;
    HttpConfig http;
    std::filesystem::path replay_dir;

    /// HTTP settings from LLM_BASE_URL, LLM_MODEL and LLM_API_KEY.
    static ProviderConfig from_env()
    {
        auto env = [](const char* name) {
            const char* v = std::getenv(name);
            return v ? std::string(v) : std::string();
        };
        ProviderConfig c;
        c.http.base_url = env("LLM_BASE_URL");
        c.http.model = env("LLM_MODEL");
        c.http.api_key = env("LLM_API_KEY");
        return c;
    }

    static ProviderConfig replay(std::filesystem::path dir)
    {
        ProviderConfig c;
        c.kind = Kind::replay;
        c.replay_dir = std::move(dir);
        return c;
    }
};

inline std::unique_ptr<Provider> make_provider(const ProviderConfig& config)
{
    if (config.kind == ProviderConfig::Kind::replay)
        return std::make_unique<ReplayProvider>(config.replay_dir);
    if (config.http.base_url.empty())
        fail(ErrorKind::input, "no LLM endpoint configured (set LLM_BASE_URL or use a replay directory)");
    return std::make_unique<HttpProvider>(config.http);
}

/// One-shot completion through a freshly configured provider.
inline Response complete(const ProviderConfig& config, const Request& request)
{
    return make_provider(config)->complete(request);
}

} // namespace fcm::llm
