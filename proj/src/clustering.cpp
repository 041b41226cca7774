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

#include "rtpos/clustering.hpp"

#include <algorithm>

namespace rtpos {

namespace {

Cluster summarize(std::vector<std::size_t> members, std::span<const PositionCandidate> candidates)
{
    Cluster c;
    c.members = std::move(members);
    std::sort(c.members.begin(), c.members.end());
    for (std::size_t i : c.members)
        c.total_weight += candidates[i].weight;

    // Zero-weight clusters fall back to uniform weights.
    const bool uniform = !(c.total_weight > 0.0);
    const double norm = uniform ? static_cast<double>(c.members.size()) : c.total_weight;
    for (std::size_t i : c.members)
        c.center += (uniform ? 1.0 : candidates[i].weight) * candidates[i].position;
    c.center /= norm;
    for (std::size_t i : c.members)
        c.variance += (uniform ? 1.0 : candidates[i].weight) * (candidates[i].position - c.center).squaredNorm();
    c.variance /= norm;
    return c;
}

} // namespace

std::vector<Cluster> cluster_candidates(std::span<const PositionCandidate> candidates, const ClusterConfig &cfg,
                                        ClusterStats *stats)
{
    if (!(cfg.d_cluster > 0.0))
        throw std::invalid_argument("d_cluster must be > 0");
    const std::size_t n = candidates.size();

    std::vector<double> table;
    if (cfg.memory == ClusterMemory::full_table)
    {
        table.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                table[i * n + k] = (candidates[i].position - candidates[k].position).norm();
    }
    const auto connected = [&](std::size_t i, std::size_t k) {
        const double d = cfg.memory == ClusterMemory::full_table ? table[i * n + k]
                                                                  : (candidates[i].position - candidates[k].position).norm();
        return d < cfg.d_cluster;
    };

    // Streaming mode scans only the x-slab |x_k - x_i| < d_cluster of an x-sorted index.
    std::vector<std::size_t> by_x;
    if (cfg.memory == ClusterMemory::streaming)
    {
        by_x.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            by_x[i] = i;
        std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a].position.x() < candidates[b].position.x();
        });
    }

    std::vector<bool> visited(n, false);
    std::vector<Cluster> clusters;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < n; ++seed)
    {
        if (visited[seed])
            continue;
        std::vector<std::size_t> members;
        visited[seed] = true;
        stack.push_back(seed);
        while (!stack.empty())
        {
            const std::size_t i = stack.back();
            stack.pop_back();
            members.push_back(i);
            if (cfg.memory == ClusterMemory::full_table)
            {
                for (std::size_t k = 0; k < n; ++k)
                    if (!visited[k] && connected(i, k))
                    {
                        visited[k] = true;
                        stack.push_back(k);
                    }
                continue;
            }
            const double x = candidates[i].position.x();
            auto it = std::lower_bound(by_x.begin(), by_x.end(), x - cfg.d_cluster,
                                       [&](std::size_t a, double v) { return candidates[a].position.x() < v; });
            for (; it != by_x.end() && candidates[*it].position.x() < x + cfg.d_cluster; ++it)
                if (!visited[*it] && connected(i, *it))
                {
                    visited[*it] = true;
                    stack.push_back(*it);
                }
        }
        clusters.push_back(summarize(std::move(members), candidates));
    }

    std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster &a, const Cluster &b) {
        if (a.total_weight != b.total_weight)
            return a.total_weight > b.total_weight;
        return a.members.front() < b.members.front();
    });
    if (stats)
    {
        stats->distance_table_entries = table.size();
        stats->flag_entries = visited.size();
    }
    return clusters;
}

const Cluster &select_cluster(const std::vector<Cluster> &clusters)
{
    if (clusters.empty())
        throw NoPositionError();
    const Cluster *best = &clusters.front();
    for (const auto &c : clusters)
        if (c.total_weight > best->total_weight)
            best = &c;
    return *best;
}

PickStrategy parse_strategy(const std::string &name)
{
    if (name == "max_posterior")
        return PickStrategy::max_posterior;
    if (name == "weighted_mean")
        return PickStrategy::weighted_mean;
    if (name == "combined")
        return PickStrategy::combined;
    throw std::invalid_argument("unknown pick strategy '" + name + "'");
}

std::string to_string(PickStrategy s)
{
    switch (s)
    {
    case PickStrategy::max_posterior:
        return "max_posterior";
    case PickStrategy::weighted_mean:
        return "weighted_mean";
    case PickStrategy::combined:
        return "combined";
    }
    return "unknown";
}

Vec3 pick_position(const Cluster &cluster, std::span<const PositionCandidate> candidates, PickStrategy strategy)
{
    if (cluster.members.empty())
        throw NoPositionError();
    std::size_t best = cluster.members.front();
    for (std::size_t i : cluster.members)
        if (candidates[i].weight > candidates[best].weight)
            best = i;
    const Vec3 map_pick = candidates[best].position;
    switch (strategy)
    {
    case PickStrategy::max_posterior:
        return map_pick;
    case PickStrategy::weighted_mean:
        return cluster.center;
    case PickStrategy::combined:
        return 0.5 * (map_pick + cluster.center);
    }
    return cluster.center;
}

} // namespace rtpos
