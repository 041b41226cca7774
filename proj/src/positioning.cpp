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

#include "rtpos/positioning.hpp"

#include <algorithm>
#include <numeric>

namespace rtpos {

std::vector<double> BiasSearchConfig::offsets() const
{
    std::vector<double> out;
    if (grid_steps == 1)
        return {0.0};
    const int half = grid_steps / 2;
    for (int i = -half; i <= half; ++i)
        out.push_back(max_bias * i / half);
    return out;
}

void BiasSearchConfig::validate() const
{
    if (!(max_bias > 0.0))
        throw std::invalid_argument("max_bias must be > 0");
    if (grid_steps < 1 || grid_steps % 2 == 0)
        throw std::invalid_argument("bias grid count must be odd");
    if (max_reflections < 0)
        throw std::invalid_argument("max_reflections must be >= 0");
}

double bias_prior_density(double bias_az, double bias_el, const BiasSearchConfig &cfg)
{
    const double s = cfg.prior_sigma();
    const double norm = 1.0 / (2.0 * kPi * s * s);
    return norm * std::exp(-0.5 * (bias_az * bias_az + bias_el * bias_el) / (s * s));
}

double peak_likelihood(double bias_az, double bias_el, const AnglePeak &peak, const BiasSearchConfig &cfg)
{
    constexpr double fwhm_to_sigma = 2.0 * 1.1774100225154747; // 2 sqrt(2 ln 2)
    const double sa = std::max(peak.width_az, cfg.min_peak_width) / fwhm_to_sigma;
    const double se = std::max(peak.width_el, cfg.min_peak_width) / fwhm_to_sigma;
    return std::exp(-0.5 * (bias_az * bias_az / (sa * sa) + bias_el * bias_el / (se * se)));
}

TracedRay trace_ray(const SceneModel &scene, const Vec3 &origin, const Vec3 &direction, int max_reflections)
{
    TracedRay out;
    Ray ray = Ray::make(origin, direction);
    out.polyline.push_back(origin);
    for (int bounce = 0;; ++bounce)
    {
        const auto hit = scene.bvh().nearest_hit(ray);
        if (!hit)
        {
            const auto exit = ray_aabb_intersect(ray, scene.bounds());
            if (exit && exit->second > 0.0)
                out.polyline.push_back(ray.at(exit->second));
            break;
        }
        out.polyline.push_back(hit->point);
        if (bounce == max_reflections)
            break;
        const Triangle &tri = scene.triangles()[hit->triangle];
        out.reflection_faces.push_back(tri.face_id);
        ray = Ray{hit->point, reflect(ray.direction, tri.normal).normalized(), ray.accumulated_length + hit->t};
    }
    return out;
}

std::vector<TracedRay> ray_search(const std::vector<AngleReport> &reports, const SceneModel &scene,
                                  std::span<const RruConfig> rrus, const BiasSearchConfig &cfg)
{
    cfg.validate();
    const std::vector<double> offsets = cfg.offsets();
    std::vector<TracedRay> rays;
    for (const auto &report : reports)
    {
        const auto it = std::find_if(rrus.begin(), rrus.end(), [&](const RruConfig &r) { return r.id == report.rru_id; });
        if (it == rrus.end())
            throw std::invalid_argument("angle report from unknown rru id " + std::to_string(report.rru_id));
        for (std::size_t pi = 0; pi < report.peaks.size(); ++pi)
        {
            const AnglePeak &peak = report.peaks[pi];
            for (double b_el : offsets)
                for (double b_az : offsets)
                {
                    const Vec3 dir = direction_from_angles(peak.azimuth + b_az, peak.elevation + b_el);
                    TracedRay ray = trace_ray(scene, it->position, dir, cfg.max_reflections);
                    ray.rru_id = report.rru_id;
                    ray.peak_index = pi;
                    ray.bias_azimuth = b_az;
                    ray.bias_elevation = b_el;
                    ray.weight = bias_prior_density(b_az, b_el, cfg) * peak_likelihood(b_az, b_el, peak, cfg);
                    rays.push_back(std::move(ray));
                }
        }
    }
    return rays;
}

ClosestApproach segment_closest_approach(const Vec3 &p0, const Vec3 &p1, const Vec3 &q0, const Vec3 &q1)
{
    const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    constexpr double tiny = 1e-18;
    double s = 0.0, t = 0.0;
    if (a <= tiny && e <= tiny)
    {
        // both degenerate
    }
    else if (a <= tiny)
        t = std::clamp(f / e, 0.0, 1.0);
    else
    {
        const double c = d1.dot(r);
        if (e <= tiny)
            s = std::clamp(-c / a, 0.0, 1.0);
        else
        {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > 1e-12 * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0)
            {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            }
            else if (t > 1.0)
            {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    const Vec3 cp = p0 + s * d1, cq = q0 + t * d2;
    return {cp, cq, (cp - cq).norm()};
}

namespace {

Aabb polyline_box(const TracedRay &ray)
{
    Aabb box;
    for (const auto &p : ray.polyline)
        box.extend(p);
    return box;
}

} // namespace

std::vector<PositionCandidate> intersect_rays(const std::vector<TracedRay> &rays, double ue_height, double d_intersect,
                                              const Aabb &bounds)
{
    if (!(d_intersect > 0.0))
        throw std::invalid_argument("d_intersect must be > 0");

    std::vector<int> ids;
    for (const auto &r : rays)
        ids.push_back(r.rru_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::vector<PositionCandidate> out;
    const auto inside = [&](const Vec3 &p) { return p.z() >= 0.0 && bounds.contains(p, 1e-9); };

    if (ids.size() == 1)
    {
        for (const auto &ray : rays)
            for (std::size_t k = 0; k < ray.segment_count(); ++k)
            {
                const Vec3 &a = ray.polyline[k], &b = ray.polyline[k + 1];
                const double da = a.z() - ue_height, db = b.z() - ue_height;
                if (da * db > 0.0 || da == db)
                    continue;
                const Vec3 p = a + (da / (da - db)) * (b - a);
                if (!inside(p))
                    continue;
                PositionCandidate c;
                c.position = p;
                c.weight = ray.weight;
                c.rt = RtOutputs{1, {static_cast<int>(k)}, {ray.rru_id}, k == 0, 0.0};
                out.push_back(std::move(c));
            }
        return out;
    }

    std::vector<Aabb> boxes;
    boxes.reserve(rays.size());
    for (const auto &r : rays)
    {
        Aabb b = polyline_box(r);
        b.min_corner.array() -= d_intersect;
        b.max_corner.array() += d_intersect;
        boxes.push_back(b);
    }

    for (std::size_t i = 0; i < rays.size(); ++i)
        for (std::size_t j = i + 1; j < rays.size(); ++j)
        {
            const TracedRay &ri = rays[i], &rj = rays[j];
            if (ri.rru_id == rj.rru_id || !boxes[i].overlaps(boxes[j]))
                continue;
            ClosestApproach best{Vec3::Zero(), Vec3::Zero(), std::numeric_limits<double>::infinity()};
            std::size_t seg_i = 0, seg_j = 0;
            for (std::size_t a = 0; a < ri.segment_count(); ++a)
                for (std::size_t b = 0; b < rj.segment_count(); ++b)
                {
                    const auto ca = segment_closest_approach(ri.polyline[a], ri.polyline[a + 1], rj.polyline[b], rj.polyline[b + 1]);
                    if (ca.distance < best.distance)
                    {
                        best = ca;
                        seg_i = a;
                        seg_j = b;
                    }
                }
            if (!(best.distance < d_intersect))
                continue;
            PositionCandidate c;
            c.position = 0.5 * (best.on_first + best.on_second);
            if (!inside(c.position))
                continue;
            c.weight = ri.weight + rj.weight;
            c.rt.ray_count = 2;
            c.rt.reflection_counts = {static_cast<int>(seg_i), static_cast<int>(seg_j)};
            c.rt.rru_set = {std::min(ri.rru_id, rj.rru_id), std::max(ri.rru_id, rj.rru_id)};
            c.rt.los = seg_i == 0 && seg_j == 0;
            c.rt.min_ray_distance = best.distance;
            out.push_back(std::move(c));
        }
    return out;
}

double candidate_weight(std::span<const TracedRay> contributing)
{
    return std::accumulate(contributing.begin(), contributing.end(), 0.0,
                           [](double acc, const TracedRay &r) { return acc + r.weight; });
}

Vec3 expected_position(std::span<const PositionCandidate> candidates)
{
    double total = 0.0;
    Vec3 sum = Vec3::Zero();
    for (const auto &c : candidates)
    {
        total += c.weight;
        sum += c.weight * c.position;
    }
    if (candidates.empty() || !(total > 0.0))
        throw NoPositionError();
    return sum / total;
}

double weighted_variance(std::span<const PositionCandidate> candidates)
{
    const Vec3 mean = expected_position(candidates);
    double total = 0.0, acc = 0.0;
    for (const auto &c : candidates)
    {
        total += c.weight;
        acc += c.weight * (c.position - mean).squaredNorm();
    }
    return acc / total;
}

std::vector<PositionCandidate> filter_candidates(std::vector<PositionCandidate> candidates, const FilterPolicy &policy)
{
    std::erase_if(candidates, [&](const PositionCandidate &c) {
        if (c.rt.ray_count < policy.min_ray_count)
            return true;
        if (policy.max_reflections &&
            std::any_of(c.rt.reflection_counts.begin(), c.rt.reflection_counts.end(), [&](int n) { return n > *policy.max_reflections; }))
            return true;
        if (policy.require_los && !c.rt.los)
            return true;
        return std::any_of(policy.predicates.begin(), policy.predicates.end(), [&](const auto &pred) { return !pred(c); });
    });
    return candidates;
}

bool detect_miss(std::span<const PositionCandidate> candidates, const MissConfig &cfg)
{
    if (candidates.empty())
        return true;
    double total = 0.0;
    for (const auto &c : candidates)
        total += c.weight;
    if (!(total > 0.0))
        return true;
    return weighted_variance(candidates) > cfg.epsilon0;
}

} // namespace rtpos
