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

#ifndef RTPOS_CLUSTERING_HPP
#define RTPOS_CLUSTERING_HPP

#include "rtpos/positioning.hpp"

#include <span>
#include <vector>

namespace rtpos {

enum class ClusterMemory
{
    full_table, // precomputed N x N distance table
    streaming   // visited flags only, distances recomputed on demand
};

struct ClusterConfig
{
    double d_cluster = 5.0;
    ClusterMemory memory = ClusterMemory::streaming;
};

struct Cluster
{
    std::vector<std::size_t> members; // ascending candidate indices
    double total_weight = 0.0;
    Vec3 center = Vec3::Zero();
    double variance = 0.0; // trace of the weighted covariance, m^2
};

struct ClusterStats
{
    std::size_t distance_table_entries = 0;
    std::size_t flag_entries = 0;
};

// Connected components of the graph with edges d(i, k) < d_cluster, found by depth-first
// search. Ordered by descending total weight, ties by smallest member index.
std::vector<Cluster> cluster_candidates(std::span<const PositionCandidate> candidates, const ClusterConfig &cfg,
                                        ClusterStats *stats = nullptr);

// Cluster with the largest total weight. Throws NoPositionError when empty.
const Cluster &select_cluster(const std::vector<Cluster> &clusters);

enum class PickStrategy
{
    max_posterior,
    weighted_mean,
    combined
};

PickStrategy parse_strategy(const std::string &name);
std::string to_string(PickStrategy s);

Vec3 pick_position(const Cluster &cluster, std::span<const PositionCandidate> candidates, PickStrategy strategy);

} // namespace rtpos

#endif
