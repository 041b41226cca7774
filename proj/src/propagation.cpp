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

#include "rtpos/propagation.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace rtpos {

// ---------------------------------------------------------------------------------------------
// Knife-edge Fresnel integral

namespace {

using cd = std::complex<double>;

cd integrand(double t) { return std::polar(1.0, -kPi * t * t / 2.0); }

cd simpson(double a, double b, cd fa, cd fm, cd fb) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

cd adaptive_simpson(double a, double b, cd fa, cd fm, cd fb, cd whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const cd flm = integrand(lm), frm = integrand(rm);
    const cd left = simpson(a, m, fa, flm, fm);
    const cd right = simpson(m, b, fm, frm, fb);
    const cd delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// integral_0^v exp(-i pi t^2 / 2) dt, split so each piece spans at most a quarter oscillation.
cd fresnel_cs(double v)
{
    const double sign = v < 0.0 ? -1.0 : 1.0;
    const double x = std::abs(v);
    cd sum{0.0, 0.0};
    double a = 0.0;
    while (a < x)
    {
        const double width = std::min(0.25, 0.5 / (1.0 + a));
        const double b = std::min(x, a + width);
        const double m = 0.5 * (a + b);
        const cd fa = integrand(a), fm = integrand(m), fb = integrand(b);
        sum += adaptive_simpson(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 1e-13, 30);
        a = b;
    }
    return sign * sum;
}

} // namespace

std::complex<double> fresnel_integral_ratio(double v)
{
    if (!std::isfinite(v))
        return v < 0.0 ? cd{1.0, 0.0} : cd{0.0, 0.0};
    const cd half_line{0.5, -0.5}; // integral_0^inf
    return cd{0.5, 0.5} * (half_line - fresnel_cs(v));
}

// ---------------------------------------------------------------------------------------------
// Configuration

double TraceConfig::angular_step() const { return std::sqrt(4.0 * kPi / static_cast<double>(ray_count)); }

void TraceConfig::validate() const
{
    if (max_reflections < 0)
        throw std::invalid_argument("max_reflections must be >= 0");
    if (!(carrier_frequency > 0.0))
        throw std::invalid_argument("carrier frequency must be > 0");
    if (ray_count < 1)
        throw std::invalid_argument("ray_count must be >= 1");
    if (!(capture_radius_coefficient > 0.0))
        throw std::invalid_argument("capture radius coefficient must be > 0");
    if (!(scattering_tile_size > 0.0))
        throw std::invalid_argument("scattering tile size must be > 0");
}

std::size_t PathComponent::reflection_count() const
{
    return static_cast<std::size_t>(std::count_if(interactions.begin(), interactions.end(), [](const Interaction &i) {
        return i.kind == InteractionKind::reflection;
    }));
}

// ---------------------------------------------------------------------------------------------
// Specular paths

namespace {

bool point_on_face(const SceneModel &scene, const Face &face, const Vec3 &p)
{
    for (std::size_t ti : face.triangles)
    {
        const Triangle &tri = scene.triangles()[ti];
        const Vec3 e1 = tri.v1 - tri.v0, e2 = tri.v2 - tri.v0, w = p - tri.v0;
        const double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
        const double w1 = w.dot(e1), w2 = w.dot(e2);
        const double det = d11 * d22 - d12 * d12;
        const double u = (d22 * w1 - d12 * w2) / det;
        const double v = (d11 * w2 - d12 * w1) / det;
        const double tol = 1e-9;
        if (u >= -tol && v >= -tol && u + v <= 1.0 + tol)
            return true;
    }
    return false;
}

Vec3 mirror_point(const Vec3 &p, const Face &f) { return p - 2.0 * (p - f.point).dot(f.normal) * f.normal; }

std::complex<double> reflection_coefficient(const Material &m, const Vec3 &incoming, const Vec3 &normal)
{
    const double c = std::min(1.0, std::abs(incoming.normalized().dot(normal)));
    const double theta = std::min(std::acos(c), kPi / 2.0 - 1e-9);
    const auto f = fresnel_reflection<double>(1.0, m.refractive_index, theta);
    return {-std::sqrt(f.mean()), 0.0};
}

PathComponent make_path(const Vec3 &tx, const Vec3 &rx, std::vector<Interaction> interactions,
                        std::complex<double> coefficient, double lambda)
{
    PathComponent p;
    double length = 0.0;
    Vec3 prev = tx;
    for (const auto &it : interactions)
    {
        length += (it.point - prev).norm();
        prev = it.point;
    }
    length += (rx - prev).norm();

    const Vec3 first = interactions.empty() ? rx : interactions.front().point;
    const Vec3 last = interactions.empty() ? tx : interactions.back().point;
    std::tie(p.aod_azimuth, p.aod_elevation) = angles_from_direction<double>(first - tx);
    std::tie(p.aoa_azimuth, p.aoa_elevation) = angles_from_direction<double>(last - rx);
    p.path_length = length;
    p.delay = length / kSpeedOfLight;
    p.complex_gain = free_space_field(length, lambda) * coefficient;
    p.is_los = interactions.empty();
    p.interactions = std::move(interactions);
    return p;
}

std::vector<Vec3> fibonacci_sphere(int n)
{
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<std::size_t>(n));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i)
    {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
    }
    return dirs;
}

bool path_less(const PathComponent &a, const PathComponent &b)
{
    if (a.path_length != b.path_length)
        return a.path_length < b.path_length;
    if (a.interactions.size() != b.interactions.size())
        return a.interactions.size() < b.interactions.size();
    for (std::size_t i = 0; i < a.interactions.size(); ++i)
    {
        const auto &x = a.interactions[i];
        const auto &y = b.interactions[i];
        if (x.kind != y.kind)
            return x.kind < y.kind;
        if (x.face_id != y.face_id)
            return x.face_id < y.face_id;
    }
    return false;
}

// Scattered sub-paths through wall tiles visible from both ends.
void add_scattered_paths(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &cfg,
                         std::vector<PathComponent> &out)
{
    const double lambda = cfg.wavelength();
    for (std::size_t fi = 0; fi < scene.faces().size(); ++fi)
    {
        const Face &face = scene.faces()[fi];
        if (face.kind != FaceKind::wall)
            continue;
        const Triangle &t0 = scene.triangles()[face.triangles[0]];
        // Wall quads are stored as (a0, b0, bh) + (a0, bh, ah).
        const Vec3 a0 = t0.v0, b0 = t0.v1, bh = t0.v2;
        const Vec3 along = b0 - a0, up = bh - b0;
        const int nu = std::max(1, static_cast<int>(std::ceil(along.norm() / cfg.scattering_tile_size)));
        const int nv = std::max(1, static_cast<int>(std::ceil(up.norm() / cfg.scattering_tile_size)));
        const double area = along.norm() * up.norm() / (nu * nv);
        const Material &mat = scene.material(face.material_id);
        for (int iu = 0; iu < nu; ++iu)
            for (int iv = 0; iv < nv; ++iv)
            {
                const Vec3 c = a0 + along * ((iu + 0.5) / nu) + up * ((iv + 0.5) / nv);
                const Vec3 to_tx = tx - c, to_rx = rx - c;
                if (to_tx.dot(face.normal) <= 0.0 || to_rx.dot(face.normal) <= 0.0)
                    continue;
                const Vec3 lifted = c + 1e-3 * face.normal;
                if (!scene.bvh().visible(tx, lifted) || !scene.bvh().visible(lifted, rx))
                    continue;
                const double d1 = to_tx.norm(), d2 = to_rx.norm();
                const Vec3 incoming = -to_tx / d1;
                const Vec3 specular = reflect(incoming, face.normal);
                const double psi = std::acos(std::clamp(specular.dot(to_rx / d2), -1.0, 1.0));
                const double cos_i = std::abs(incoming.dot(face.normal));
                const double aperture = std::min(1.0, std::sqrt(area * cos_i / kPi) * (d1 + d2) / (d1 * d2));
                const double amplitude = std::sqrt(scattering_gain(psi, mat)) * aperture;
                if (amplitude <= 0.0)
                    continue;
                out.push_back(make_path(tx, rx, {Interaction{InteractionKind::scattering, c, face.material_id, fi}},
                                        {amplitude, 0.0}, lambda));
            }
    }
}

// Single knife-edge paths over building edges, considered only when the direct line is blocked.
void add_diffracted_paths(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &cfg,
                          std::vector<PathComponent> &out)
{
    const double lambda = cfg.wavelength();
    Aabb region;
    region.extend(tx);
    region.extend(rx);
    const double margin = 0.5 * (rx - tx).norm();
    region.min_corner.array() -= margin;
    region.max_corner.array() += margin;
    const auto nearby = scene.grid().query(region);

    const Vec3 los = rx - tx;
    const double los_len2 = los.squaredNorm();
    for (std::size_t ei = 0; ei < scene.edges().size(); ++ei)
    {
        const Edge &edge = scene.edges()[ei];
        if (!std::binary_search(nearby.begin(), nearby.end(), edge.object))
            continue;
        const Vec3 e = edge.b - edge.a;
        const auto total = [&](double s) {
            const Vec3 d = edge.a + s * e;
            return (d - tx).norm() + (rx - d).norm();
        };
        // Golden-section search; the unfolded length is convex along the edge.
        double lo = 0.0, hi = 1.0;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        double f1 = total(x1), f2 = total(x2);
        for (int it = 0; it < 80; ++it)
        {
            if (f1 < f2)
            {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = total(x1);
            }
            else
            {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = total(x2);
            }
        }
        const double s = 0.5 * (lo + hi);
        if (s < 1e-6 || s > 1.0 - 1e-6)
            continue; // no interior diffraction point
        const Vec3 d = edge.a + s * e;
        const Vec3 lifted = d + 1e-3 * edge.outward;
        if (!scene.bvh().visible(tx, lifted) || !scene.bvh().visible(lifted, rx))
            continue;

        const double d1 = (d - tx).norm(), d2 = (rx - d).norm();
        const double along = std::clamp((d - tx).dot(los) / los_len2, 0.0, 1.0);
        const Vec3 offset = d - (tx + along * los);
        const double h = offset.dot(edge.outward) >= 0.0 ? offset.norm() : -offset.norm();
        if (h <= 0.0)
            continue; // the edge does not shadow the direct line
        const double v = diffraction_v<double>(h, d1, d2, lambda);
        const double amplitude = std::pow(10.0, -diffraction_loss_db(v) / 20.0);
        out.push_back(make_path(tx, rx, {Interaction{InteractionKind::diffraction, d, edge.material_id, ei}},
                                {amplitude, 0.0}, lambda));
    }
}

} // namespace

std::optional<std::vector<Vec3>> specular_path(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx,
                                               std::span<const std::size_t> faces)
{
    const std::size_t n = faces.size();
    std::vector<Vec3> images(n + 1);
    images[0] = tx;
    for (std::size_t k = 0; k < n; ++k)
        images[k + 1] = mirror_point(images[k], scene.faces()[faces[k]]);

    std::vector<Vec3> points(n);
    Vec3 from = rx;
    for (std::size_t kk = n; kk-- > 0;)
    {
        const Face &face = scene.faces()[faces[kk]];
        const Vec3 &target = images[kk + 1];
        const double df = (from - face.point).dot(face.normal);
        const double dt = (target - face.point).dot(face.normal);
        if (df * dt >= 0.0)
            return std::nullopt; // segment does not cross the face plane
        const double s = df / (df - dt);
        const Vec3 q = from + s * (target - from);
        if (!point_on_face(scene, face, q))
            return std::nullopt;
        points[kk] = q;
        from = q;
    }

    Vec3 prev = tx;
    for (const Vec3 &p : points)
    {
        if (!scene.bvh().visible(prev, p))
            return std::nullopt;
        prev = p;
    }
    if (!scene.bvh().visible(prev, rx))
        return std::nullopt;
    return points;
}

std::vector<std::vector<PathComponent>> trace_paths(const SceneModel &scene, const Vec3 &tx,
                                                    std::span<const Vec3> receivers, const TraceConfig &cfg)
{
    cfg.validate();
    const double lambda = cfg.wavelength();
    const double step = cfg.angular_step();
    const std::size_t nrx = receivers.size();

    // Face sequences captured per receiver, with the smallest capture miss distance seen.
    std::vector<std::map<std::vector<std::size_t>, double>> captured(nrx);

    if (cfg.max_reflections > 0)
    {
        std::vector<std::size_t> sequence;
        for (const Vec3 &dir0 : fibonacci_sphere(cfg.ray_count))
        {
            Ray ray{tx, dir0, 0.0};
            sequence.clear();
            for (int bounce = 0; bounce <= cfg.max_reflections; ++bounce)
            {
                const auto hit = scene.bvh().nearest_hit(ray);
                const double t_end = hit ? hit->t : std::numeric_limits<double>::infinity();
                if (bounce > 0)
                {
                    for (std::size_t r = 0; r < nrx; ++r)
                    {
                        const Vec3 rel = receivers[r] - ray.origin;
                        const double s = rel.dot(ray.direction);
                        if (s <= 0.0 || s >= t_end)
                            continue;
                        const double miss = (rel - s * ray.direction).norm();
                        const double radius = cfg.capture_radius_coefficient * (ray.accumulated_length + s) * step;
                        if (miss < radius)
                        {
                            auto [it, inserted] = captured[r].emplace(sequence, miss);
                            if (!inserted)
                                it->second = std::min(it->second, miss);
                        }
                    }
                }
                if (!hit || bounce == cfg.max_reflections)
                    break;
                const Triangle &tri = scene.triangles()[hit->triangle];
                sequence.push_back(tri.face_id);
                ray = Ray{hit->point, reflect(ray.direction, tri.normal).normalized(), ray.accumulated_length + hit->t};
            }
        }
    }

    std::vector<std::vector<PathComponent>> result(nrx);
    for (std::size_t r = 0; r < nrx; ++r)
    {
        const Vec3 &rx = receivers[r];
        auto &paths = result[r];
        if (scene.bvh().visible(tx, rx) && (rx - tx).norm() > 0.0)
            paths.push_back(make_path(tx, rx, {}, {1.0, 0.0}, lambda));

        for (const auto &[faces, miss] : captured[r])
        {
            const auto points = specular_path(scene, tx, rx, faces);
            if (!points)
                continue;
            std::vector<Interaction> inter;
            std::complex<double> coefficient{1.0, 0.0};
            Vec3 prev = tx;
            for (std::size_t k = 0; k < faces.size(); ++k)
            {
                const Face &face = scene.faces()[faces[k]];
                coefficient *= reflection_coefficient(scene.material(face.material_id), (*points)[k] - prev, face.normal);
                inter.push_back(Interaction{InteractionKind::reflection, (*points)[k], face.material_id, faces[k]});
                prev = (*points)[k];
            }
            paths.push_back(make_path(tx, rx, std::move(inter), coefficient, lambda));
        }

        if (cfg.enable_scattering)
            add_scattered_paths(scene, tx, rx, cfg, paths);
        if (cfg.enable_diffraction && !scene.bvh().visible(tx, rx))
            add_diffracted_paths(scene, tx, rx, cfg, paths);

        const double floor = std::pow(10.0, cfg.min_path_gain_db / 20.0);
        std::erase_if(paths, [floor](const PathComponent &p) { return std::abs(p.complex_gain) < floor; });
        std::sort(paths.begin(), paths.end(), path_less);
    }
    return result;
}

std::vector<PathComponent> trace_paths(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &cfg)
{
    const Vec3 receivers[1] = {rx};
    return std::move(trace_paths(scene, tx, std::span<const Vec3>(receivers, 1), cfg).front());
}

} // namespace rtpos
