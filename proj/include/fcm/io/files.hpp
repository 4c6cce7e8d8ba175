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
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>

#include <unistd.h>

#include "fcm/core/types.hpp"
#include "fcm/io/fcm_json.hpp"

namespace fcm
{

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file.
inline void write_file_atomic(const fs::path& path, std::string_view content)
{
    static std::atomic<unsigned> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            fail(ErrorKind::io, "cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
        {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            fail(ErrorKind::io, "short write to " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
    {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        fail(ErrorKind::io, "cannot replace " + path.string() + ": " + ec.message());
    }
}

inline void append_line(const fs::path& path, std::string_view line)
{
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out)
        fail(ErrorKind::io, "cannot append to " + path.string());
    out << line << '\n';
    if (!out)
        fail(ErrorKind::io, "short write to " + path.string());
}

inline void save_fcm(const Fcm& fcm, const fs::path& path)
{
    write_file_atomic(path, serialize_fcm(fcm));
}

/// Loads and validates an FCM file. A file without a transcript hash loads
/// fine; `provenance().reproducible()` reports false for it.
inline Fcm load_fcm(const fs::path& path)
{
    return parse_fcm(read_file(path));
}

inline json classification_to_json(const EquilibriumClassification& c)
{
    json cycle = json::array();
    for (const auto& s : c.cycle_states)
        cycle.push_back(s.values());
    return {{"kind", std::string(to_string(c.kind))},
            {"period", c.period},
            {"transient_length", c.transient_length},
            {"cycle_states", std::move(cycle)}};
}

namespace detail
{

inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for (char c : s)
    {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace detail

/// CSV raster of a trajectory: a header of node labels, then one row of
/// activations per time step. A `<path>.meta.json` sidecar records the
/// classification.
inline void export_trajectory(std::span<const StateVector> trajectory, const EquilibriumClassification& classification,
                              std::span<const std::string> labels, const fs::path& path)
{
    if (trajectory.empty())
        fail(ErrorKind::input, "cannot export an empty trajectory");
    std::string csv;
    for (std::size_t i = 0; i < labels.size(); ++i)
        csv += (i ? "," : "") + detail::csv_field(labels[i]);
    csv += "\n";
    for (const auto& s : trajectory)
    {
        if (s.size() != labels.size())
            fail(ErrorKind::shape, "trajectory state width does not match label count");
        for (std::size_t i = 0; i < s.size(); ++i)
            csv += (i ? "," : "") + text::format_fixed(s[i]);
        csv += "\n";
    }
    write_file_atomic(path, csv);

    json meta = classification_to_json(classification);
    meta["steps"] = trajectory.size();
    meta["labels"] = std::vector<std::string>(labels.begin(), labels.end());
    auto sidecar = path;
    sidecar += ".meta.json";
    write_file_atomic(sidecar, canonical_dump(meta));
}

} // namespace fcm
