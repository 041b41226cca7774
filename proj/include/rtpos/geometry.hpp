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

#ifndef RTPOS_GEOMETRY_HPP
#define RTPOS_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rtpos {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
using Vec3 = Vec3T<double>;

// Minimum accepted hit distance; keeps reflected rays from re-hitting their own surface.
inline constexpr double kHitEpsilon = 1e-4;

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

// Right-handed, z up. Azimuth is measured from +y clockwise toward +x, elevation from the
// horizontal plane (positive up).
template <typename Scalar>
Vec3T<Scalar> direction_from_angles(Scalar azimuth, Scalar elevation)
{
    using std::cos;
    using std::sin;
    return {cos(elevation) * sin(azimuth), cos(elevation) * cos(azimuth), sin(elevation)};
}

// Inverse of direction_from_angles; the input need not be normalized.
template <typename Scalar>
std::pair<Scalar, Scalar> angles_from_direction(const Vec3T<Scalar> &d)
{
    using std::atan2;
    using std::hypot;
    return {atan2(d.x(), d.y()), atan2(d.z(), hypot(d.x(), d.y()))};
}

struct Ray
{
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    double accumulated_length = 0.0;

    // Normalizes the direction. Throws std::invalid_argument on a zero direction.
    static Ray make(const Vec3 &origin, const Vec3 &direction, double accumulated_length = 0.0);

    Vec3 at(double t) const { return origin + t * direction; }
};

struct Triangle
{
    Vec3 v0, v1, v2;
    Vec3 normal;
    std::size_t material_id = 0;
    std::size_t face_id = 0; // planar face the triangle belongs to (wall, roof, ground, ...)

    Vec3 centroid() const { return (v0 + v1 + v2) / 3.0; }
    double area() const { return 0.5 * (v1 - v0).cross(v2 - v0).norm(); }
};

// Throws std::invalid_argument for triangles with area <= 1e-12 m^2.
Triangle make_triangle(const Vec3 &v0, const Vec3 &v1, const Vec3 &v2, std::size_t material_id = 0,
                       std::size_t face_id = 0);

struct Aabb
{
    Vec3 min_corner = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max_corner = Vec3::Constant(-std::numeric_limits<double>::infinity());

    static Aabb of(const Triangle &tri);

    bool is_empty() const { return (min_corner.array() > max_corner.array()).any(); }
    void extend(const Vec3 &p);
    void extend(const Aabb &box);
    bool contains(const Vec3 &p, double tol = 0.0) const;
    bool contains(const Aabb &box, double tol = 0.0) const;
    bool overlaps(const Aabb &box) const;
    Vec3 center() const { return 0.5 * (min_corner + max_corner); }
    Vec3 extent() const { return max_corner - min_corner; }
    int longest_axis() const;
};

template <typename Scalar>
struct HitT
{
    Scalar t;
    Vec3T<Scalar> point;
    Scalar u, v; // barycentric coordinates of v1 and v2
    std::size_t triangle = kNoIndex;
    std::size_t material_id = kNoIndex;
};
using Hit = HitT<double>;

// Moller-Trumbore intersection. Returns hits with t > t_min, including triangle edges.
template <typename Scalar>
std::optional<HitT<Scalar>> intersect_triangle(const Vec3T<Scalar> &origin, const Vec3T<Scalar> &direction,
                                               const Vec3T<Scalar> &v0, const Vec3T<Scalar> &v1,
                                               const Vec3T<Scalar> &v2, Scalar t_min = Scalar(kHitEpsilon))
{
    const Vec3T<Scalar> e1 = v1 - v0;
    const Vec3T<Scalar> e2 = v2 - v0;
    const Vec3T<Scalar> p = direction.cross(e2);
    const Scalar det = e1.dot(p);
    const Scalar scale = e1.norm() * e2.norm();
    if (std::abs(det) <= Scalar(1e-14) * scale)
        return std::nullopt;
    const Scalar inv_det = Scalar(1) / det;
    const Vec3T<Scalar> s = origin - v0;
    const Scalar u = s.dot(p) * inv_det;
    if (u < Scalar(0) || u > Scalar(1))
        return std::nullopt;
    const Vec3T<Scalar> q = s.cross(e1);
    const Scalar v = direction.dot(q) * inv_det;
    if (v < Scalar(0) || u + v > Scalar(1))
        return std::nullopt;
    const Scalar t = e2.dot(q) * inv_det;
    if (!(t > t_min))
        return std::nullopt;
    return HitT<Scalar>{t, origin + t * direction, u, v};
}

std::optional<Hit> ray_triangle_intersect(const Ray &ray, const Triangle &tri, double t_min = kHitEpsilon);

// Slab test. On a hit returns (t_near, t_far) with t_near clamped to 0 for rays starting inside.
std::optional<std::pair<double, double>> ray_aabb_intersect(const Ray &ray, const Aabb &box);

// Flat bounding volume hierarchy over a triangle soup. Immutable after build.
class BvhTree
{
  public:
    struct Node
    {
        Aabb box;
        std::uint32_t first = 0; // leaf: offset into order(); inner: index of left child
        std::uint32_t count = 0; // leaf: number of triangles; inner: 0
        std::uint32_t right = 0; // inner: index of right child
        bool is_leaf() const { return count > 0; }
    };

    static constexpr std::size_t kMaxLeafSize = 4;

    const std::vector<Node> &nodes() const { return nodes_; }
    const std::vector<std::uint32_t> &order() const { return order_; }
    const std::vector<Triangle> &triangles() const { return triangles_; }
    const Aabb &bounds() const { return nodes_.front().box; }

    // Nearest hit in (t_min, t_max); ties in t resolve to the smaller triangle index.
    std::optional<Hit> nearest_hit(const Ray &ray, double t_max = std::numeric_limits<double>::infinity(),
                                   double t_min = kHitEpsilon) const;

    // True when any triangle is hit in (t_min, t_max).
    bool any_hit(const Ray &ray, double t_max, double t_min = kHitEpsilon) const;

    // Segment visibility test with kHitEpsilon trimmed off both ends.
    bool visible(const Vec3 &a, const Vec3 &b) const;

  private:
    friend BvhTree build_bvh(std::vector<Triangle> triangles);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<Triangle> triangles_;
};

// Median split on the longest centroid axis, leaves of at most 4 triangles.
// Throws std::invalid_argument("empty scene") for empty input.
BvhTree build_bvh(std::vector<Triangle> triangles);

inline std::optional<Hit> nearest_hit(const Ray &ray, const BvhTree &bvh) { return bvh.nearest_hit(ray); }

// Uniform grid mapping integer cells to the objects whose boxes overlap them.
class SpatialGrid
{
  public:
    struct Cell
    {
        std::int64_t i, j, k;
        bool operator==(const Cell &) const = default;
    };

    SpatialGrid() = default;
    SpatialGrid(std::span<const Aabb> objects, double cell_size = 25.0);

    double cell_size() const { return cell_size_; }
    Cell cell_of(const Vec3 &p) const;

    // Sorted, unique indices of objects registered in any cell the box touches.
    std::vector<std::size_t> query(const Aabb &box) const;
    const std::vector<std::size_t> &objects_in(const Cell &cell) const;
    std::size_t cell_count() const { return cells_.size(); }

  private:
    struct CellHash
    {
        std::size_t operator()(const Cell &c) const noexcept;
    };

    double cell_size_ = 25.0;
    std::unordered_map<Cell, std::vector<std::size_t>, CellHash> cells_;
};

} // namespace rtpos

#endif
