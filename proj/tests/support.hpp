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


#ifndef RTPOS_TESTS_SUPPORT_HPP
#define RTPOS_TESTS_SUPPORT_HPP

#include "rtpos/geometry.hpp"

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rtpos::test {

inline std::string fixture(const std::string &name) { return std::string(RTPOS_FIXTURE_DIR) + "/" + name; }

// Plain linear solve of origin + t d = v0 + u e1 + v e2; shares no code with the library.
inline std::optional<double> oracle_hit_t(const Vec3 &origin, const Vec3 &d, const Triangle &tri,
                                          double t_min = kHitEpsilon)
{
    Eigen::Matrix3d m;
    m.col(0) = -d;
    m.col(1) = tri.v1 - tri.v0;
    m.col(2) = tri.v2 - tri.v0;
    const double det = m.determinant();
    if (std::abs(det) < 1e-14 * m.col(1).norm() * m.col(2).norm())
        return std::nullopt;
    const Vec3 x = m.inverse() * (origin - tri.v0);
    if (x[1] < 0.0 || x[2] < 0.0 || x[1] + x[2] > 1.0 || !(x[0] > t_min))
        return std::nullopt;
    return x[0];
}

inline std::optional<std::pair<double, std::size_t>> oracle_nearest(const Vec3 &origin, const Vec3 &d,
                                                                    const std::vector<Triangle> &tris)
{
    std::optional<std::pair<double, std::size_t>> best;
    for (std::size_t i = 0; i < tris.size(); ++i)
    {
        const auto t = oracle_hit_t(origin, d, tris[i]);
        if (t && (!best || *t < best->first))
            best = std::pair{*t, i};
    }
    return best;
}

inline Vec3 random_point(std::mt19937_64 &rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

inline Vec3 random_unit(std::mt19937_64 &rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do
        v = Vec3(n(rng), n(rng), n(rng));
    while (v.norm() < 1e-6);
    return v.normalized();
}

// Triangles of a few meters scattered through a cube of the given half size.
inline std::vector<Triangle> random_triangles(std::mt19937_64 &rng, std::size_t count, double half_size,
                                              double tri_size = 3.0)
{
    std::vector<Triangle> out;
    out.reserve(count);
    while (out.size() < count)
    {
        const Vec3 c = random_point(rng, -half_size, half_size);
        const Vec3 a = c + tri_size * random_point(rng, -1.0, 1.0);
        const Vec3 b = c + tri_size * random_point(rng, -1.0, 1.0);
        const Vec3 e = c + tri_size * random_point(rng, -1.0, 1.0);
        if (0.5 * (b - a).cross(e - a).norm() < 1e-3)
            continue;
        out.push_back(make_triangle(a, b, e, out.size() % 3, out.size()));
    }
    return out;
}

} // namespace rtpos::test

#endif
