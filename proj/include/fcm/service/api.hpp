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

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fcm/core/dynamics.hpp"
#include "fcm/extraction/pipeline.hpp"
#include "fcm/io/fcm_json.hpp"
#include "fcm/io/files.hpp"
#include "fcm/mixer/mixer.hpp"

namespace fcm::service
{

/// Append-only store of immutable FCM snapshots with sequential ids.
class SnapshotStore
{
  public:
    struct Entry
    {
        std::string id;
        std::shared_ptr<const Fcm> fcm;
        std::string parent; // snapshot this one was derived from, if any
    };

    std::string add(Fcm fcm, std::string parent = {})
    {
        std::unique_lock lock(mutex_);
        auto id = "fcm-" + std::to_string(entries_.size() + 1);
        auto ptr = std::make_shared<const Fcm>(std::move(fcm));
        index_.emplace(id, entries_.size());
        entries_.push_back({id, std::move(ptr), std::move(parent)});
        return id;
    }

    std::optional<Entry> get(const std::string& id) const
    {
        std::shared_lock lock(mutex_);
        auto it = index_.find(id);
        if (it == index_.end())
            return std::nullopt;
        return entries_[it->second];
    }

    std::vector<Entry> list() const
    {
        std::shared_lock lock(mutex_);
        return entries_;
    }

  private:
    mutable std::shared_mutex mutex_;
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

struct ApiResponse
{
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct ApiOptions
{
    /// Builds the LLM provider for /api/extract; extraction is disabled when unset.
    std::function<std::unique_ptr<llm::Provider>()> provider_factory;
    extraction::ExtractionConfig extraction;
};

namespace detail
{

/// Problem-detail record; `stage` names the failing pipeline stage, if any.
inline ApiResponse problem(int status, std::string_view title, const std::string& detail, const std::string& stage = {})
{
    json body = {{"type", "about:blank"},
                 {"title", std::string(title)},
                 {"status", status},
                 {"detail", detail},
                 {"stage", stage.empty() ? json(nullptr) : json(stage)}};
    return {status, body.dump(), "application/problem+json"};
}

inline ApiResponse ok(const json& body, int status = 200)
{
    return {status, body.dump(), "application/json"};
}

struct HttpProblem
{
    ApiResponse response;
};

[[noreturn]] inline void bad_request(const std::string& detail)
{
    throw HttpProblem{problem(400, "Bad Request", detail)};
}

inline json parse_body(const std::string& body)
{
    try
    {
        auto j = json::parse(body);
        if (!j.is_object())
            bad_request("request body must be a JSON object");
        return j;
    }
    catch (const json::parse_error& e)
    {
        bad_request(std::string("malformed JSON body: ") + e.what());
    }
}

inline Squasher squasher_from_json(const json& j)
{
    std::string kind = "hard";
    json opts = json::object();
    if (j.is_string())
        kind = j.get<std::string>();
    else if (j.is_object())
    {
        opts = j;
        if (j.contains("kind"))
        {
            if (!j["kind"].is_string())
                bad_request("phi.kind must be a string");
            kind = j["kind"].get<std::string>();
        }
    }
    else if (!j.is_null())
        bad_request("phi must be a string or an object");

    auto number = [&](const char* key, double fallback) {
        if (!opts.contains(key))
            return fallback;
        if (!opts[key].is_number())
            bad_request(std::string("phi.") + key + " must be a number");
        return opts[key].get<double>();
    };
    if (kind == "hard" || kind == "threshold")
        return Squasher::hard(number("threshold", 0.0));
    if (kind == "logistic")
        return Squasher::logistic(number("steepness", 5.0));
    if (kind == "clamped-linear" || kind == "linear")
        return Squasher::clamped_linear();
    bad_request("unknown phi '" + kind + "'");
}

inline std::vector<std::string> split_path(const std::string& path)
{
    std::vector<std::string> out;
    for (auto& part : text::split(path, '/'))
        if (!part.empty())
            out.push_back(part);
    return out;
}

} // namespace detail

/// HTTP/JSON front end over the engine, mixer and extractor. `handle` is
/// transport independent; `mount` wires it into an httplib server.
class Api
{
  public:
    explicit Api(ApiOptions options = {}) : options_(std::move(options)) {}

    SnapshotStore& store() noexcept { return store_; }

    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body)
    {
        try
        {
            return route(method, path, body);
        }
        catch (const detail::HttpProblem& p)
        {
            return p.response;
        }
        catch (const extraction::PipelineError& e)
        {
            return detail::problem(502, "Extraction Failed", e.what(), e.stage());
        }
        catch (const Error& e)
        {
            switch (e.kind())
            {
            case ErrorKind::input:
            case ErrorKind::shape:
            case ErrorKind::schema:
            case ErrorKind::parse:
                return detail::problem(400, "Bad Request", e.what(), e.stage());
            case ErrorKind::provider:
            case ErrorKind::fixture:
                return detail::problem(502, "LLM Provider Failed", e.what(), e.stage());
            case ErrorKind::resource:
            case ErrorKind::unsupported:
                return detail::problem(422, "Unprocessable Request", e.what(), e.stage());
            default:
                return detail::problem(500, "Internal Error", e.what(), e.stage());
            }
        }
        catch (const json::exception& e)
        {
            return detail::problem(400, "Bad Request", e.what());
        }
    }

  private:
    ApiResponse route(const std::string& method, const std::string& path, const std::string& body)
    {
        auto parts = detail::split_path(path);
        if (parts.size() < 2 || parts[0] != "api")
            return detail::problem(404, "Not Found", "no route for " + path);
        const auto& head = parts[1];

        if (head == "fcm" && parts.size() == 2)
        {
            if (method == "GET")
                return list();
            if (method == "POST")
                return upload(body);
        }
        if (head == "fcm" && parts.size() == 3 && method == "GET")
            return get(parts[2]);
        if (head == "fcm" && parts.size() == 4 && parts[3] == "edge" && (method == "PATCH" || method == "POST"))
            return edit_edge(parts[2], body);
        if (head == "provenance" && parts.size() == 3 && method == "GET")
            return provenance(parts[2]);
        if (parts.size() == 2 && method == "POST")
        {
            if (head == "trajectory")
                return trajectory(body);
            if (head == "mix")
                return mix_snapshots(body);
            if (head == "extract")
                return extract(body);
        }
        return detail::problem(404, "Not Found", "no route for " + method + " " + path);
    }

    SnapshotStore::Entry lookup(const std::string& id) const
    {
        auto e = store_.get(id);
        if (!e)
            throw detail::HttpProblem{detail::problem(404, "Not Found", "unknown FCM id '" + id + "'")};
        return *e;
    }

    static json summary(const SnapshotStore::Entry& e)
    {
        return {{"id", e.id},
                {"nodes", e.fcm->size()},
                {"edges", e.fcm->edges().nonzero_count()},
                {"source", e.fcm->provenance().source},
                {"parent", e.parent.empty() ? json(nullptr) : json(e.parent)},
                {"digest", fcm_digest(*e.fcm)}};
    }

    ApiResponse list() const
    {
        json out = json::array();
        for (const auto& e : store_.list())
            out.push_back(summary(e));
        return detail::ok({{"fcms", out}});
    }

    ApiResponse upload(const std::string& body)
    {
        auto j = detail::parse_body(body);
        auto fcm = fcm_from_json(j.contains("fcm") ? j["fcm"] : j);
        auto id = store_.add(std::move(fcm));
        return detail::ok({{"fcm_id", id}}, 201);
    }

    ApiResponse get(const std::string& id) const
    {
        auto e = lookup(id);
        auto out = summary(e);
        out["fcm"] = fcm_to_json(*e.fcm);
        return detail::ok(out);
    }

    ApiResponse provenance(const std::string& id) const
    {
        auto e = lookup(id);
        auto out = provenance_to_json(e.fcm->provenance());
        out["fcm_id"] = id;
        out["reproducible"] = e.fcm->provenance().reproducible();
        return detail::ok(out);
    }

    static std::size_t resolve_node(const Fcm& fcm, const json& ref, const char* field)
    {
        if (ref.is_number_unsigned())
        {
            auto i = ref.get<std::size_t>();
            if (i >= fcm.size())
                detail::bad_request(std::string(field) + " index out of range");
            return i;
        }
        if (!ref.is_string())
            detail::bad_request(std::string(field) + " must be a node id, label or index");
        auto key = ref.get<std::string>();
        if (auto i = fcm.index_of_id(key))
            return *i;
        if (auto i = fcm.index_of_label(key))
            return *i;
        detail::bad_request(std::string(field) + " '" + key + "' is not a node of this FCM");
    }

    ApiResponse edit_edge(const std::string& id, const std::string& body)
    {
        auto e = lookup(id);
        auto j = detail::parse_body(body);
        if (!j.contains("source") || !j.contains("target") || !j.contains("weight"))
            detail::bad_request("edge edits need source, target and weight");
        if (!j["weight"].is_number())
            detail::bad_request("weight must be a number");
        auto w = j["weight"].get<double>();
        auto i = resolve_node(*e.fcm, j["source"], "source");
        auto k = resolve_node(*e.fcm, j["target"], "target");
        if (!std::isfinite(w) || w < -1.0 || w > 1.0)
            return detail::problem(409, "Conflict", "edge weight " + std::to_string(w) + " lies outside [-1, 1]");
        // An edited map no longer matches its transcripts; it descends from the parent instead.
        Provenance p;
        p.source = "edit";
        p.components.push_back({fcm_digest(*e.fcm), 1.0});
        p.created_at = e.fcm->provenance().created_at;
        p.tool_version = kToolVersion;
        auto next = e.fcm->with_edge(i, k, w).with_provenance(std::move(p));
        auto new_id = store_.add(std::move(next), id);
        return detail::ok({{"fcm_id", new_id}, {"parent", id}}, 201);
    }

    ApiResponse trajectory(const std::string& body)
    {
        auto j = detail::parse_body(body);
        if (!j.contains("fcm_id") || !j["fcm_id"].is_string())
            detail::bad_request("fcm_id is required");
        auto e = lookup(j["fcm_id"].get<std::string>());
        if (!j.contains("init") || !j["init"].is_array())
            detail::bad_request("init must be an array of activations");
        std::vector<double> init;
        for (const auto& v : j["init"])
        {
            if (!v.is_number())
                detail::bad_request("init entries must be numbers");
            init.push_back(v.get<double>());
        }
        if (init.size() != e.fcm->size())
            detail::bad_request("init has " + std::to_string(init.size()) + " entries for " +
                                std::to_string(e.fcm->size()) + " nodes");
        auto phi = detail::squasher_from_json(j.value("phi", json(nullptr)));
        std::size_t max_steps = default_max_steps(e.fcm->size(), phi);
        if (j.contains("max_steps") && !j["max_steps"].is_null())
        {
            if (!j["max_steps"].is_number_unsigned())
                detail::bad_request("max_steps must be a positive integer");
            max_steps = j["max_steps"].get<std::size_t>();
        }
        double tolerance = j.value("tolerance", kDefaultTolerance);

        auto t = run_trajectory(*e.fcm, StateVector(std::move(init)), phi, max_steps, tolerance);
        json states = json::array();
        for (const auto& s : t.states)
            states.push_back(s.values());
        return detail::ok({{"fcm_id", e.id},
                           {"labels", e.fcm->labels()},
                           {"states", states},
                           {"classification", classification_to_json(t.equilibrium)}});
    }

    ApiResponse mix_snapshots(const std::string& body)
    {
        auto j = detail::parse_body(body);
        if (!j.contains("fcm_ids") || !j["fcm_ids"].is_array() || !j.contains("weights") || !j["weights"].is_array())
            detail::bad_request("mix needs fcm_ids and weights arrays");
        MixSpec spec;
        for (const auto& id : j["fcm_ids"])
        {
            if (!id.is_string())
                detail::bad_request("fcm_ids must be strings");
            spec.components.push_back(*lookup(id.get<std::string>()).fcm);
        }
        for (const auto& w : j["weights"])
        {
            if (!w.is_number())
                detail::bad_request("weights must be numbers");
            spec.weights.push_back(w.get<double>());
        }
        if (spec.components.empty() || spec.weights.size() != spec.components.size())
            detail::bad_request("need one weight per FCM id");
        if (j.contains("aliases"))
            spec.aliases = j["aliases"].get<AliasMap>();
        try
        {
            validate_mix_weights(spec.weights, spec.components.size());
        }
        catch (const Error& e)
        {
            return detail::problem(422, "Unprocessable Entity", e.what());
        }
        auto id = store_.add(mix(spec));
        return detail::ok({{"fcm_id", id}}, 201);
    }

    ApiResponse extract(const std::string& body)
    {
        auto j = detail::parse_body(body);
        if (!j.contains("text") || !j["text"].is_string())
            detail::bad_request("text is required");
        if (!options_.provider_factory)
            return detail::problem(503, "Service Unavailable", "no LLM provider is configured");
        auto doc = extraction::SourceDocument::from_text(j["text"].get<std::string>());
        extraction::ExtractionResult result;
        {
            std::lock_guard lock(extract_mutex_);
            auto provider = options_.provider_factory();
            result = extraction::extract_fcm(doc, *provider, options_.extraction);
        }
        auto id = store_.add(std::move(result.fcm));
        return detail::ok({{"fcm_id", id}, {"artifacts", extraction::artifacts_to_json(result.artifacts)}}, 201);
    }

    ApiOptions options_;
    SnapshotStore store_;
    std::mutex extract_mutex_;
};

/// Routes every /api request to `api`; other paths serve `static_dir` if set.
inline void mount(httplib::Server& server, Api& api, const std::optional<fs::path>& static_dir = std::nullopt)
{
    auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
        auto r = api.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    const char* pattern = R"(/api/.*)";
    server.Get(pattern, forward);
    server.Post(pattern, forward);
    server.Patch(pattern, forward);
    if (static_dir && !server.set_mount_point("/", static_dir->string()))
        fail(ErrorKind::io, "static directory " + static_dir->string() + " does not exist");
}

} // namespace fcm::service
