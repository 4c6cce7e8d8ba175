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
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fcm/core/types.hpp"

namespace fcm
{

/// Default L-infinity tolerance for recurrence detection with continuous
/// squashers.
inline constexpr double kDefaultTolerance = 1e-9;

/// Hard-threshold maps at or below this size get the exhaustive step budget.
inline constexpr std::size_t kExhaustiveNodeLimit = 20;

inline constexpr std::size_t kContinuousStepBudget = 10'000;

/// Applies the squasher. Hard threshold fires only strictly above the
/// threshold, so zero net input deactivates a node.
inline double squash(const Squasher& phi, double x)
{
    if (!std::isfinite(x))
        fail(ErrorKind::input, "squash input must be finite");
    switch (phi.kind)
    {
    case Squasher::Kind::hard_threshold:
        return x > phi.threshold ? 1.0 : 0.0;
    case Squasher::Kind::logistic:
        return 1.0 / (1.0 + std::exp(-phi.steepness * x));
    case Squasher::Kind::clamped_linear:
        return std::min(1.0, std::max(0.0, x));
    }
    return 0.0;
}

/// One synchronous update: next_j = phi(sum_i state_i * w_ij).
inline StateVector step(const Fcm& fcm, const StateVector& state, const Squasher& phi)
{
    const auto& e = fcm.edges();
    const std::size_t n = e.size();
    if (state.size() != n)
        fail(ErrorKind::shape, "state length " + std::to_string(state.size()) + " does not match node count " +
                                   std::to_string(n));
    std::vector<double> sums(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
        const double ci = state[i];
        if (ci == 0.0)
            continue;
        auto row = e.row(i);
        for (std::size_t j = 0; j < n; ++j)
            sums[j] += ci * row[j];
    }
    for (auto& s : sums)
        s = squash(phi, s);
    return StateVector(std::move(sums), state.t() + 1);
}

/// 2^n + 1 for hard-threshold maps with n <= 20 (recurrence is then
/// guaranteed), otherwise a fixed budget.
inline std::size_t default_max_steps(std::size_t n, const Squasher& phi)
{
    if (phi.is_binary() && n <= kExhaustiveNodeLimit)
        return (std::size_t{1} << n) + 1;
    return kContinuousStepBudget;
}

namespace detail
{

inline double linf(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Finds the first earlier state matching a new one. Exact tolerance uses an
/// ordered index; otherwise a linear scan in insertion order.
class RecurrenceIndex
{
  public:
    explicit RecurrenceIndex(double tolerance) : tolerance_(tolerance) {}

    std::optional<std::size_t> find(const std::vector<double>& values) const
    {
        if (tolerance_ == 0.0)
        {
            auto it = exact_.find(values);
            if (it == exact_.end())
                return std::nullopt;
            return it->second;
        }
        for (std::size_t i = 0; i < seen_.size(); ++i)
            if (linf(seen_[i], values) <= tolerance_)
                return i;
        return std::nullopt;
    }

    void add(const std::vector<double>& values)
    {
        if (tolerance_ == 0.0)
            exact_.emplace(values, count_);
        else
            seen_.push_back(values);
        ++count_;
    }

  private:
    double tolerance_;
    std::size_t count_ = 0;
    std::map<std::vector<double>, std::size_t> exact_;
    std::vector<std::vector<double>> seen_;
};

inline EquilibriumClassification make_classification(std::span<const StateVector> trajectory, std::size_t first,
                                                      std::size_t repeat)
{
    EquilibriumClassification c;
    c.period = repeat - first;
    c.kind = c.period == 1 ? EquilibriumKind::fixed_point : EquilibriumKind::limit_cycle;
    c.transient_length = first;
    c.cycle_states.assign(trajectory.begin() + static_cast<std::ptrdiff_t>(first),
                          trajectory.begin() + static_cast<std::ptrdiff_t>(repeat));
    return c;
}

} // namespace detail

/// Classifies a trajectory by its earliest recurrence: the first index j
/// whose state matches some earlier state i within `tolerance` (L-infinity).
/// The period is j - i and the transient is i. No recurrence yields
/// `unresolved`.
inline EquilibriumClassification classify_equilibrium(std::span<const StateVector> trajectory,
                                                      double tolerance = kDefaultTolerance)
{
    if (trajectory.empty())
        fail(ErrorKind::input, "trajectory must be non-empty");
    if (!(tolerance >= 0.0))
        fail(ErrorKind::input, "tolerance must be nonnegative");
    detail::RecurrenceIndex index(tolerance);
    for (std::size_t j = 0; j < trajectory.size(); ++j)
    {
        if (auto i = index.find(trajectory[j].values()))
            return detail::make_classification(trajectory, *i, j);
        index.add(trajectory[j].values());
    }
    return {};
}

/// Iterates from `init` until the first recurrence or until `max_steps`
/// updates have been applied. The trajectory starts with `init` and, when a
/// recurrence is found, ends with the repeated state.
///
/// Binary squashers always use exact recurrence detection; `tolerance` only
/// applies to continuous squashers.
inline Trajectory run_trajectory(const Fcm& fcm, const StateVector& init, const Squasher& phi, std::size_t max_steps,
                                 double tolerance = kDefaultTolerance)
{
    if (init.size() != fcm.size())
        fail(ErrorKind::shape, "initial state length does not match node count");
    if (max_steps == 0)
        fail(ErrorKind::input, "max_steps must be at least 1");
    const double tol = phi.is_binary() ? 0.0 : tolerance;
    if (!(tol >= 0.0))
        fail(ErrorKind::input, "tolerance must be nonnegative");

    Trajectory out;
    out.states.push_back(init);
    detail::RecurrenceIndex index(tol);
    index.add(init.values());
    for (std::size_t s = 0; s < max_steps; ++s)
    {
        out.states.push_back(step(fcm, out.states.back(), phi));
        const auto& latest = out.states.back().values();
        if (auto i = index.find(latest))
        {
            out.equilibrium = detail::make_classification(out.states, *i, out.states.size() - 1);
            return out;
        }
        index.add(latest);
    }
    return out;
}

inline Trajectory run_trajectory(const Fcm& fcm, const StateVector& init, const Squasher& phi)
{
    return run_trajectory(fcm, init, phi, default_max_steps(fcm.size(), phi));
}

/// Convenience for the common probe: every node fully active.
inline StateVector all_active(std::size_t n)
{
    return StateVector(std::vector<double>(n, 1.0));
}

} // namespace fcm
