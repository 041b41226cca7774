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

#ifndef RTPOS_POSITIONING_HPP
#define RTPOS_POSITIONING_HPP

#include "rtpos/array_signal.hpp"
#include "rtpos/scene.hpp"

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtpos {

struct BiasSearchConfig
{
    double max_bias = deg2rad(1.0);       // |Omega_bias^max| per axis
    int grid_steps = 5;                   // per axis, odd
    double min_peak_width = deg2rad(1.0); // floor on the reported half-power width
    int max_reflections = 3;

    double prior_sigma() const { return max_bias / 3.0; }
    std::vector<double> offsets() const;
    void validate() const;
};

struct TracedRay
{
    int rru_id = 0;
    std::size_t peak_index = 0;
    double bias_azimuth = 0.0;
    double bias_elevation = 0.0;
    std::vector<Vec3> polyline;          // vertices; segment k runs polyline[k] -> polyline[k + 1]
    std::vector<std::size_t> reflection_faces;
    double weight = 0.0;                 // P(est | biased) * P(biased)

    std::size_t segment_count() const { return polyline.empty() ? 0 : polyline.size() - 1; }
};

// Gaussian prior density of the bias offset, per axis product.
double bias_prior_density(double bias_az, double bias_el, const BiasSearchConfig &cfg);

// Gaussian likelihood of the biased direction given the reported peak center and width.
double peak_likelihood(double bias_az, double bias_el, const AnglePeak &peak, const BiasSearchConfig &cfg);

// Launches the biased ray fan for every reported peak and traces it through the map with
// specular reflections. Throws std::invalid_argument for reports from unknown RRUs.
std::vector<TracedRay> ray_search(const std::vector<AngleReport> &reports, const SceneModel &scene,
                                  std::span<const RruConfig> rrus, const BiasSearchConfig &cfg);

// Polyline of a single ray launched from origin, clipped to the scene bounds.
TracedRay trace_ray(const SceneModel &scene, const Vec3 &origin, const Vec3 &direction, int max_reflections);

struct RtOutputs
{
    int ray_count = 0;
    std::vector<int> reflection_counts; // per contributing ray, up to the intersecting segment
    std::vector<int> rru_set;           // sorted, unique
    bool los = false;
    double min_ray_distance = 0.0;
};

struct PositionCandidate
{
    Vec3 position = Vec3::Zero();
    double weight = 0.0;
    RtOutputs rt;
};

struct ClosestApproach
{
    Vec3 on_first, on_second;
    double distance;
};

ClosestApproach segment_closest_approach(const Vec3 &p0, const Vec3 &p1, const Vec3 &q0, const Vec3 &q1);

// Pairwise closest approaches of rays from distinct RRUs within d_intersect; when only one RRU
// contributes, crossings of the z = ue_height plane. Candidates outside the bounds are dropped.
std::vector<PositionCandidate> intersect_rays(const std::vector<TracedRay> &rays, double ue_height, double d_intersect,
                                              const Aabb &bounds);

double candidate_weight(std::span<const TracedRay> contributing);

class NoPositionError : public std::runtime_error
{
  public:
    NoPositionError() : std::runtime_error("no position") {}
};

// Weighted mean of candidate positions. Throws NoPositionError for an empty set or zero weight.
Vec3 expected_position(std::span<const PositionCandidate> candidates);

// Trace of the weighted positional covariance, m^2.
double weighted_variance(std::span<const PositionCandidate> candidates);

struct FilterPolicy
{
    int min_ray_count = 1;
    std::optional<int> max_reflections; // per contributing ray
    bool require_los = false;
    std::vector<std::function<bool(const PositionCandidate &)>> predicates;
};

std::vector<PositionCandidate> filter_candidates(std::vector<PositionCandidate> candidates, const FilterPolicy &policy);

struct MissConfig
{
    double epsilon0 = 25.0; // m^2
};

// True iff the weighted variance exceeds epsilon0; an empty set counts as a miss.
bool detect_miss(std::span<const PositionCandidate> candidates, const MissConfig &cfg);

} // namespace rtpos

#endif
