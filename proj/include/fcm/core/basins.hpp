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

#include <cstdint>
#include <map>
#include <vector>

#include "fcm/core/dynamics.hpp"

namespace fcm
{

inline constexpr std::size_t kDefaultBasinNodeGuard = 20;

using BasinMap = std::map<Attractor, std::vector<StateVector>>;

namespace detail
{

// Component i of a binary state lives at bit (n - 1 - i), so ascending codes
// enumerate states in lexicographic order.
inline std::vector<double> decode_binary(std::uint32_t code, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = (code >> (n - 1 - i)) & 1u ? 1.0 : 0.0;
    return v;
}

inline std::uint32_t encode_binary(const std::vector<double>& v)
{
    std::uint32_t code = 0;
    for (double x : v)
        code = (code << 1) | (x != 0.0 ? 1u : 0u);
    return code;
}

} // namespace detail

/// Assigns every binary initial state to the attractor its trajectory
/// reaches. The hard-threshold map is a function on a finite set, so each
/// state is resolved once and shared by every trajectory passing through it.
inline BasinMap enumerate_basins(const Fcm& fcm, const Squasher& phi,
                                 std::size_t max_nodes_guard = kDefaultBasinNodeGuard)
{
    const std::size_t n = fcm.size();
    if (n > max_nodes_guard || n > 31)
        fail(ErrorKind::resource, "basin enumeration limited to " + std::to_string(max_nodes_guard) + " nodes, got " +
                                      std::to_string(n));
    if (!phi.is_binary())
        fail(ErrorKind::unsupported, "basin enumeration requires a hard-threshold squasher");

    const std::uint32_t count = std::uint32_t{1} << n;
    std::vector<std::uint32_t> next(count);
    for (std::uint32_t code = 0; code < count; ++code)
        next[code] = detail::encode_binary(step(fcm, StateVector(detail::decode_binary(code, n)), phi).values());

    constexpr std::int32_t unvisited = -1;
    constexpr std::int32_t on_stack = -2;
    std::vector<std::int32_t> attractor_of(count, unvisited);
    std::vector<Attractor> attractors;

    std::vector<std::uint32_t> path;
    for (std::uint32_t start = 0; start < count; ++start)
    {
        if (attractor_of[start] != unvisited)
            continue;
        path.clear();
        std::uint32_t cur = start;
        while (attractor_of[cur] == unvisited)
        {
            attractor_of[cur] = on_stack;
            path.push_back(cur);
            cur = next[cur];
        }
        std::int32_t id = attractor_of[cur];
        if (id == on_stack)
        {
            // New cycle: it starts where `cur` sits on the current path.
            auto begin = std::find(path.begin(), path.end(), cur);
            Attractor cycle;
            for (auto it = begin; it != path.end(); ++it)
                cycle.push_back(detail::decode_binary(*it, n));
            auto smallest = std::min_element(cycle.begin(), cycle.end());
            std::rotate(cycle.begin(), smallest, cycle.end());
            id = static_cast<std::int32_t>(attractors.size());
            attractors.push_back(std::move(cycle));
        }
        for (auto s : path)
            attractor_of[s] = id;
    }

    BasinMap basins;
    for (std::uint32_t code = 0; code < count; ++code)
        basins[attractors[static_cast<std::size_t>(attractor_of[code])]].push_back(
            StateVector(detail::decode_binary(code, n)));
    return basins;
}

} // namespace fcm
