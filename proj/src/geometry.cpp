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

#include "rtpos/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rtpos {

Ray Ray::make(const Vec3 &origin, const Vec3 &direction, double accumulated_length)
{
    const double n = direction.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("ray direction must be non-zero");
    return Ray{origin, direction / n, accumulated_length};
}

Triangle make_triangle(const Vec3 &v0, const Vec3 &v1, const Vec3 &v2, std::size_t material_id, std::size_t face_id)
{
    const Vec3 c = (v1 - v0).cross(v2 - v0);
    if (!(0.5 * c.norm() > 1e-12))
        throw std::invalid_argument("degenerate triangle");
    return Triangle{v0, v1, v2, c.normalized(), material_id, face_id};
}

Aabb Aabb::of(const Triangle &tri)
{
    Aabb box;
    box.extend(tri.v0);
    box.extend(tri.v1);
    box.extend(tri.v2);
    return box;
}

void Aabb::extend(const Vec3 &p)
{
    min_corner = min_corner.cwiseMin(p);
    max_corner = max_corner.cwiseMax(p);
}

void Aabb::extend(const Aabb &box)
{
    min_corner = min_corner.cwiseMin(box.min_corner);
    max_corner = max_corner.cwiseMax(box.max_corner);
}

bool Aabb::contains(const Vec3 &p, double tol) const
{
    return (p.array() >= min_corner.array() - tol).all() && (p.array() <= max_corner.array() + tol).all();
}

bool Aabb::contains(const Aabb &box, double tol) const
{
    return contains(box.min_corner, tol) && contains(box.max_corner, tol);
}

bool Aabb::overlaps(const Aabb &box) const
{
    return (min_corner.array() <= box.max_corner.array()).all() && (box.min_corner.array() <= max_corner.array()).all();
}

int Aabb::longest_axis() const
{
    Eigen::Index axis = 0;
    extent().maxCoeff(&axis);
    return static_cast<int>(axis);
}

std::optional<Hit> ray_triangle_intersect(const Ray &ray, const Triangle &tri, double t_min)
{
    return intersect_triangle<double>(ray.origin, ray.direction, tri.v0, tri.v1, tri.v2, t_min);
}

std::optional<std::pair<double, double>> ray_aabb_intersect(const Ray &ray, const Aabb &box)
{
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a)
    {
        const double o = ray.origin[a];
        const double d = ray.direction[a];
        if (d == 0.0)
        {
            if (o < box.min_corner[a] || o > box.max_corner[a])
                return std::nullopt;
            continue;
        }
        double t0 = (box.min_corner[a] - o) / d;
        double t1 = (box.max_corner[a] - o) / d;
        if (t0 > t1)
            std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
    }
    if (t_far < std::max(t_near, 0.0))
        return std::nullopt;
    return std::make_pair(std::max(t_near, 0.0), t_far);
}

// ---------------------------------------------------------------------------------------------
// BVH

namespace {

struct BuildItem
{
    std::uint32_t tri;
    Vec3 centroid;
    Aabb box;
};

std::uint32_t build_node(std::vector<BvhTree::Node> &nodes, std::vector<BuildItem> &items, std::size_t begin,
                         std::size_t end)
{
    const auto index = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();

    Aabb box, centroid_box;
    for (std::size_t i = begin; i < end; ++i)
    {
        box.extend(items[i].box);
        centroid_box.extend(items[i].centroid);
    }
    // Padding keeps flat boxes (axis-aligned walls) robust under the slab test.
    const double pad = 1e-9 * (1.0 + box.extent().cwiseAbs().maxCoeff());
    box.min_corner.array() -= pad;
    box.max_corner.array() += pad;
    nodes[index].box = box;

    const std::size_t n = end - begin;
    if (n <= BvhTree::kMaxLeafSize)
    {
        nodes[index].first = static_cast<std::uint32_t>(begin);
        nodes[index].count = static_cast<std::uint32_t>(n);
        return index;
    }

    const int axis = centroid_box.longest_axis();
    const std::size_t mid = begin + n / 2;
    std::nth_element(items.begin() + static_cast<std::ptrdiff_t>(begin), items.begin() + static_cast<std::ptrdiff_t>(mid),
                     items.begin() + static_cast<std::ptrdiff_t>(end), [axis](const BuildItem &a, const BuildItem &b) {
                         if (a.centroid[axis] != b.centroid[axis])
                             return a.centroid[axis] < b.centroid[axis];
                         return a.tri < b.tri;
                     });

    const std::uint32_t left = build_node(nodes, items, begin, mid);
    const std::uint32_t right = build_node(nodes, items, mid, end);
    nodes[index].first = left;
    nodes[index].right = right;
    return index;
}

inline bool box_hit(const Ray &ray, const Vec3 &inv_dir, const Aabb &box, double t_min, double t_max, double &t_entry)
{
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a)
    {
        double lo = (box.min_corner[a] - ray.origin[a]) * inv_dir[a];
        double hi = (box.max_corner[a] - ray.origin[a]) * inv_dir[a];
        if (std::isnan(lo) || std::isnan(hi))
        {
            // direction component 0 with origin on the slab plane
            if (ray.origin[a] < box.min_corner[a] || ray.origin[a] > box.max_corner[a])
                return false;
            continue;
        }
        if (lo > hi)
            std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
        if (t0 > t1)
            return false;
    }
    t_entry = t0;
    return true;
}

} // namespace

BvhTree build_bvh(std::vector<Triangle> triangles)
{
    if (triangles.empty())
        throw std::invalid_argument("empty scene");

    std::vector<BuildItem> items;
    items.reserve(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i)
        items.push_back({static_cast<std::uint32_t>(i), triangles[i].centroid(), Aabb::of(triangles[i])});

    BvhTree tree;
    tree.nodes_.reserve(2 * triangles.size() / BvhTree::kMaxLeafSize + 2);
    build_node(tree.nodes_, items, 0, items.size());
    tree.order_.resize(items.size());
    std::transform(items.begin(), items.end(), tree.order_.begin(), [](const BuildItem &it) { return it.tri; });
    tree.triangles_ = std::move(triangles);
    return tree;
}

std::optional<Hit> BvhTree::nearest_hit(const Ray &ray, double t_max, double t_min) const
{
    const Vec3 inv_dir = ray.direction.cwiseInverse();
    std::optional<Hit> best;
    double best_t = t_max;
    // Slack for rounding differences between the slab test and the triangle test.
    const auto slack = [](double t) { return 1e-9 * (1.0 + std::abs(t)); };

    std::array<std::uint32_t, 128> stack{};
    std::size_t top = 0;
    double entry = 0.0;
    if (!box_hit(ray, inv_dir, nodes_[0].box, t_min - slack(t_min), best_t + slack(best_t), entry))
        return best;
    stack[top++] = 0;

    while (top > 0)
    {
        const Node &node = nodes_[stack[--top]];
        if (node.is_leaf())
        {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
            {
                const std::uint32_t tri_index = order_[i];
                const Triangle &tri = triangles_[tri_index];
                auto hit = intersect_triangle<double>(ray.origin, ray.direction, tri.v0, tri.v1, tri.v2, t_min);
                if (!hit || hit->t > best_t)
                    continue;
                if (best && hit->t == best->t && tri_index > best->triangle)
                    continue;
                hit->triangle = tri_index;
                hit->material_id = tri.material_id;
                best_t = hit->t;
                best = hit;
            }
            continue;
        }
        double e_left = 0.0, e_right = 0.0;
        const bool hl = box_hit(ray, inv_dir, nodes_[node.first].box, t_min - slack(t_min), best_t + slack(best_t), e_left);
        const bool hr = box_hit(ray, inv_dir, nodes_[node.right].box, t_min - slack(t_min), best_t + slack(best_t), e_right);
        // Push the farther child first so the nearer one is popped next.
        if (hl && hr)
        {
            if (e_left <= e_right)
            {
                stack[top++] = node.right;
                stack[top++] = node.first;
            }
            else
            {
                stack[top++] = node.first;
                stack[top++] = node.right;
            }
        }
        else if (hl)
            stack[top++] = node.first;
        else if (hr)
            stack[top++] = node.right;
    }
    return best;
}

bool BvhTree::any_hit(const Ray &ray, double t_max, double t_min) const
{
    const Vec3 inv_dir = ray.direction.cwiseInverse();
    std::array<std::uint32_t, 128> stack{};
    std::size_t top = 0;
    stack[top++] = 0;
    double entry = 0.0;
    while (top > 0)
    {
        const Node &node = nodes_[stack[--top]];
        if (!box_hit(ray, inv_dir, node.box, t_min - 1e-9, t_max + 1e-9, entry))
            continue;
        if (node.is_leaf())
        {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
            {
                const Triangle &tri = triangles_[order_[i]];
                auto hit = intersect_triangle<double>(ray.origin, ray.direction, tri.v0, tri.v1, tri.v2, t_min);
                if (hit && hit->t < t_max)
                    return true;
            }
            continue;
        }
        stack[top++] = node.right;
        stack[top++] = node.first;
    }
    return false;
}

bool BvhTree::visible(const Vec3 &a, const Vec3 &b) const
{
    const Vec3 d = b - a;
    const double len = d.norm();
    if (len <= 2.0 * kHitEpsilon)
        return true;
    return !any_hit(Ray{a, d / len, 0.0}, len - kHitEpsilon, kHitEpsilon);
}

// ---------------------------------------------------------------------------------------------
// Spatial grid

std::size_t SpatialGrid::CellHash::operator()(const Cell &c) const noexcept
{
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : {c.i, c.j, c.k})
    {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

SpatialGrid::SpatialGrid(std::span<const Aabb> objects, double cell_size) : cell_size_(cell_size)
{
    if (!(cell_size > 0.0))
        throw std::invalid_argument("grid cell size must be positive");
    for (std::size_t idx = 0; idx < objects.size(); ++idx)
    {
        const Cell lo = cell_of(objects[idx].min_corner);
        const Cell hi = cell_of(objects[idx].max_corner);
        for (std::int64_t i = lo.i; i <= hi.i; ++i)
            for (std::int64_t j = lo.j; j <= hi.j; ++j)
                for (std::int64_t k = lo.k; k <= hi.k; ++k)
                    cells_[Cell{i, j, k}].push_back(idx);
    }
}

SpatialGrid::Cell SpatialGrid::cell_of(const Vec3 &p) const
{
    return Cell{static_cast<std::int64_t>(std::floor(p.x() / cell_size_)),
                static_cast<std::int64_t>(std::floor(p.y() / cell_size_)),
                static_cast<std::int64_t>(std::floor(p.z() / cell_size_))};
}

const std::vector<std::size_t> &SpatialGrid::objects_in(const Cell &cell) const
{
    static const std::vector<std::size_t> none;
    auto it = cells_.find(cell);
    return it == cells_.end() ? none : it->second;
}

std::vector<std::size_t> SpatialGrid::query(const Aabb &box) const
{
    std::vector<std::size_t> out;
    const Cell lo = cell_of(box.min_corner);
    const Cell hi = cell_of(box.max_corner);
    for (std::int64_t i = lo.i; i <= hi.i; ++i)
        for (std::int64_t j = lo.j; j <= hi.j; ++j)
            for (std::int64_t k = lo.k; k <= hi.k; ++k)
            {
                const auto &objs = objects_in(Cell{i, j, k});
                out.insert(out.end(), objs.begin(), objs.end());
            }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace rtpos
