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

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcm
{

enum class ErrorKind
{
    input,
    shape,
    resource,
    unsupported,
    provider,
    fixture,
    pipeline,
    parse,
    schema,
    io,
    internal,
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::input: return "input-error";
    case ErrorKind::shape: return "shape-error";
    case ErrorKind::resource: return "resource-error";
    case ErrorKind::unsupported: return "unsupported-error";
    case ErrorKind::provider: return "provider-error";
    case ErrorKind::fixture: return "fixture-error";
    case ErrorKind::pipeline: return "pipeline-error";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::schema: return "schema-error";
    case ErrorKind::io: return "io-error";
    case ErrorKind::internal: return "internal-error";
    }
    return "error";
}

/// Base exception for every failure raised by the library.
///
/// `stage` names the pipeline stage that failed (e.g. "step1-nouns") and is
/// empty for errors outside the extraction pipeline.
class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, const std::string& message, std::string stage = {})
        : std::runtime_error(message), kind_(kind), stage_(std::move(stage))
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(std::string stage) { stage_ = std::move(stage); }

  private:
    ErrorKind kind_;
    std::string stage_;
};

/// Raised by LLM providers once the retry budget is exhausted.
class ProviderError : public Error
{
  public:
    ProviderError(const std::string& message, int attempts, int last_status)
        : Error(ErrorKind::provider, message), attempts_(attempts), last_status_(last_status)
    {
    }

    int attempts() const noexcept { return attempts_; }
    /// HTTP status of the last attempt, or 0 when no response arrived.
    int last_status() const noexcept { return last_status_; }

  private:
    int attempts_;
    int last_status_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, std::string stage = {})
{
    throw Error(kind, message, std::move(stage));
}

} // namespace fcm
