// SPDX-License-Identifier: Apache-2.0
//
// rtpos: ray-tracing based outdoor positioning simulator
// Copyright (C) 2026 The rtpos authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "rtpos/tracking.hpp"

#include "rtpos/array_signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace rtpos {

namespace {

void refit(TrendState &trend, const TrackerConfig &cfg)
{
    const std::size_t n = trend.buffer.size();
    if (n == 0)
        return;
    if (n == 1)
    {
        trend.slope = 0.0;
        trend.intercept = trend.buffer.front().value;
        trend.deviation = 0.0;
        return;
    }
    std::vector<double> t(n), y(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        t[i] = static_cast<double>(trend.buffer[i].tti);
        y[i] = trend.buffer[i].value;
    }
    const auto fit = lp_fit<double>(t, y, cfg.p, cfg.residual_floor);
    trend.slope = fit.slope;
    trend.intercept = fit.intercept;
    trend.deviation = fit.objective / static_cast<double>(n);
}

void push(TrendState &trend, std::int64_t tti, double value, const TrackerConfig &cfg)
{
    trend.buffer.push_back({tti, value});
    while (trend.buffer.size() > cfg.buffer_max)
        trend.buffer.pop_front();
    trend.last_update = tti;
    ++trend.updates;
    refit(trend, cfg);
}

double corrected_deviation(const TrendState &trend)
{
    const auto n = static_cast<double>(trend.buffer.size());
    if (trend.buffer.size() <= 2)
        return std::numeric_limits<double>::infinity();
    return trend.deviation * n / (n - 2.0);
}

double angle_diff(double a, double b, bool wrap)
{
    return wrap ? wrap_angle(a - b) : a - b;
}

} // namespace

double TrendState::extrapolate(std::int64_t tti) const
{
    if (buffer.empty())
        return intercept;
    if (!fitted())
        return buffer.back().value;
    return slope * static_cast<double>(tti) + intercept;
}

void TrackerConfig::validate() const
{
    if (!(p >= 1.0 && p <= 2.0))
        throw std::invalid_argument("tracker: p must be in [1, 2]");
    if (!(gate_factor > 0 && gate_min > 0 && gate_max >= gate_min))
        throw std::invalid_argument("tracker: gate parameters must be positive");
    if (buffer_max < 2)
        throw std::invalid_argument("tracker: buffer_max must be at least 2");
    if (max_idle_ttis <= 0 || !(merge_threshold > 0) || !(deviation_ceiling > 0))
        throw std::invalid_argument("tracker: idle, merge and ceiling limits must be positive");
    if (!(residual_floor > 0) || !(weight_floor > 0))
        throw std::invalid_argument("tracker: floors must be positive");
}

const TrendState *TrackerState::dominant() const
{
    const TrendState *best = nullptr;
    for (const auto &t : trends)
    {
        if (!best || t.buffer.size() > best->buffer.size() ||
            (t.buffer.size() == best->buffer.size() &&
             (t.deviation < best->deviation || (t.deviation == best->deviation && t.id < best->id))))
            best = &t;
    }
    return best;
}

const TrendState *TrackerState::find(int id) const
{
    for (const auto &t : trends)
        if (t.id == id)
            return &t;
    return nullptr;
}

double trend_gate(const TrendState &trend, const TrackerConfig &cfg)
{
    if (!trend.fitted())
        return cfg.gate_max;
    const double dev = std::pow(trend.deviation, 1.0 / trend.p);
    return std::clamp(cfg.gate_factor * dev, cfg.gate_min, cfg.gate_max);
}

TrackerUpdate update_tracker(TrackerState state, std::int64_t tti, std::vector<double> estimates, const TrackerConfig &cfg)
{
    cfg.validate();
    if (state.last_tti && tti <= *state.last_tti)
        throw std::invalid_argument("tracker: non-monotonic tti");
    state.last_tti = tti;
    for (double &e : estimates)
    {
        if (!std::isfinite(e))
            throw std::invalid_argument("tracker: non-finite estimate");
        if (cfg.wrap)
            e = wrap_angle(e);
    }
    std::sort(estimates.begin(), estimates.end());

    // Greedy one-to-one assignment on ascending distance to the trend prediction.
    struct Pair
    {
        double distance;
        int trend_id;
        std::size_t trend;
        std::size_t estimate;
    };
    std::vector<Pair> pairs;
    for (std::size_t k = 0; k < state.trends.size(); ++k)
    {
        const auto &trend = state.trends[k];
        const double pred = trend.extrapolate(tti);
        const double gate = trend_gate(trend, cfg);
        for (std::size_t e = 0; e < estimates.size(); ++e)
        {
            const double d = std::abs(angle_diff(estimates[e], pred, cfg.wrap));
            if (d <= gate)
                pairs.push_back({d, trend.id, k, e});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair &a, const Pair &b) {
        return std::tie(a.distance, a.trend_id, a.estimate) < std::tie(b.distance, b.trend_id, b.estimate);
    });

    TrackerUpdate out;
    out.assignments.resize(estimates.size());
    std::vector<bool> trend_taken(state.trends.size(), false), est_taken(estimates.size(), false);
    for (const auto &pr : pairs)
    {
        if (trend_taken[pr.trend] || est_taken[pr.estimate])
            continue;
        trend_taken[pr.trend] = est_taken[pr.estimate] = true;
        auto &trend = state.trends[pr.trend];
        const double pred = trend.extrapolate(tti);
        const double value = pred + angle_diff(estimates[pr.estimate], pred, cfg.wrap);
        push(trend, tti, value, cfg);
        out.assignments[pr.estimate] = {estimates[pr.estimate], trend.id, false};
    }
    for (std::size_t e = 0; e < estimates.size(); ++e)
    {
        if (est_taken[e])
            continue;
        TrendState trend;
        trend.id = state.next_id++;
        trend.p = cfg.p;
        trend.created = tti;
        push(trend, tti, estimates[e], cfg);
        state.trends.push_back(std::move(trend));
        out.assignments[e] = {estimates[e], state.trends.back().id, true};
    }

    // Redundant trends: predictions within the merge threshold, keep the better-conditioned one.
    const auto keep_first = [](const TrendState &a, const TrendState &b) {
        const double da = corrected_deviation(a), db = corrected_deviation(b);
        if (da != db)
            return da < db;
        if (a.buffer.size() != b.buffer.size())
            return a.buffer.size() > b.buffer.size();
        return a.id < b.id;
    };
    std::vector<bool> erased(state.trends.size(), false);
    for (std::size_t i = 0; i < state.trends.size(); ++i)
    {
        for (std::size_t j = i + 1; j < state.trends.size(); ++j)
        {
            if (erased[i] || erased[j])
                continue;
            const auto &a = state.trends[i];
            const auto &b = state.trends[j];
            if (!a.fitted() && !b.fitted())
                continue;
            const double d = std::abs(angle_diff(a.extrapolate(tti), b.extrapolate(tti), cfg.wrap));
            if (d < cfg.merge_threshold)
                (keep_first(a, b) ? erased[j] : erased[i]) = true;
        }
    }

    std::vector<TrendState> kept;
    for (std::size_t i = 0; i < state.trends.size(); ++i)
    {
        auto &t = state.trends[i];
        if (erased[i])
            continue;
        if (tti - t.last_update > cfg.max_idle_ttis)
            continue;
        if (t.buffer.size() >= 3 && std::pow(t.deviation, 1.0 / t.p) > cfg.deviation_ceiling)
            continue;
        kept.push_back(std::move(t));
    }
    std::sort(kept.begin(), kept.end(), [](const TrendState &a, const TrendState &b) { return a.id < b.id; });
    state.trends = std::move(kept);
    for (auto &a : out.assignments)
        if (!state.find(a.trend_id))
            a.trend_id = -1;
    out.state = std::move(state);
    return out;
}

std::optional<AnglePrediction> predict_angle(const TrendState &trend, std::int64_t tti, const TrackerConfig &cfg)
{
    if (!trend.fitted())
        return std::nullopt;
    double sum = 0.0;
    for (const auto &pt : trend.buffer)
        sum += std::pow(std::abs(pt.value - trend.slope * static_cast<double>(pt.tti) - trend.intercept), trend.p);
    AnglePrediction out;
    const double raw = trend.slope * static_cast<double>(tti) + trend.intercept;
    out.angle = cfg.wrap ? wrap_angle(raw) : raw;
    out.weight = static_cast<double>(trend.buffer.size()) / std::max(sum, cfg.weight_floor);
    return out;
}

CenterTracker::CenterTracker(TrackerConfig cfg) : cfg_(cfg)
{
    cfg_.wrap = false;
    cfg_.validate();
    for (int k = 0; k < 3; ++k)
    {
        axes_[static_cast<std::size_t>(k)].id = k;
        axes_[static_cast<std::size_t>(k)].p = cfg_.p;
    }
}

void CenterTracker::update(std::int64_t tti, const Vec3 &center)
{
    if (last_tti_ && tti <= *last_tti_)
        throw std::invalid_argument("tracker: non-monotonic tti");
    last_tti_ = tti;
    for (int k = 0; k < 3; ++k)
        push(axes_[static_cast<std::size_t>(k)], tti, center[k], cfg_);
}

std::optional<Vec3> CenterTracker::predict(std::int64_t tti) const
{
    if (!axes_[0].fitted())
        return std::nullopt;
    return Vec3(axes_[0].extrapolate(tti), axes_[1].extrapolate(tti), axes_[2].extrapolate(tti));
}

std::vector<CenterPrediction> track_cluster_centers(std::span<const std::pair<std::int64_t, Vec3>> stream,
                                                    const TrackerConfig &cfg)
{
    CenterTracker tracker(cfg);
    std::vector<CenterPrediction> out;
    out.reserve(stream.size());
    for (const auto &[tti, c] : stream)
    {
        CenterPrediction row{tti, tracker.predict(tti), c};
        tracker.update(tti, c);
        row.smoothed = tracker.predict(tti).value_or(c);
        out.push_back(row);
    }
    return out;
}

} // namespace rtpos
