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


#include "support.hpp"

#include "rtpos/positioning.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace rtpos;

namespace {

TracedRay straight(int rru, const Vec3 &origin, const Vec3 &target, double weight, double reach = 400.0)
{
    TracedRay r;
    r.rru_id = rru;
    r.weight = weight;
    r.polyline = {origin, origin + reach * (target - origin).normalized()};
    return r;
}

Aabb big_box()
{
    Aabb b;
    b.extend(Vec3(-500, -500, -1));
    b.extend(Vec3(500, 500, 100));
    return b;
}

PositionCandidate cand(const Vec3 &p, double w, int rays = 2)
{
    PositionCandidate c;
    c.position = p;
    c.weight = w;
    c.rt.ray_count = rays;
    c.rt.reflection_counts.assign(static_cast<std::size_t>(rays), 0);
    return c;
}

AnglePeak peak_towards(const Vec3 &from, const Vec3 &to, double width = deg2rad(2.0))
{
    const auto [az, el] = angles_from_direction<double>(to - from);
    AnglePeak p;
    p.azimuth = az;
    p.elevation = el;
    p.width_az = width;
    p.width_el = width;
    p.peak_power = 1.0;
    return p;
}

} // namespace

TEST_SUITE("positioning")
{
    TEST_CASE("bias grid and prior")
    {
        BiasSearchConfig cfg;
        const auto off = cfg.offsets();
        REQUIRE(off.size() == 5);
        CHECK(off.front() == doctest::Approx(-cfg.max_bias));
        CHECK(off[2] == 0.0);
        CHECK(off[3] == doctest::Approx(cfg.max_bias / 2.0));
        cfg.grid_steps = 4;
        CHECK_THROWS(cfg.validate());
        cfg.grid_steps = 1;
        CHECK(cfg.offsets() == std::vector<double>{0.0});

        BiasSearchConfig c2;
        const double s = c2.prior_sigma();
        CHECK(bias_prior_density(0.0, 0.0, c2) == doctest::Approx(1.0 / (2.0 * kPi * s * s)));
        CHECK(bias_prior_density(0.01, -0.005, c2) == doctest::Approx(bias_prior_density(-0.01, 0.005, c2)));
        CHECK(bias_prior_density(0.01, 0.0, c2) < bias_prior_density(0.0, 0.0, c2));
    }

    TEST_CASE("peak likelihood uses the half power width")
    {
        BiasSearchConfig cfg;
        AnglePeak p;
        p.width_az = deg2rad(4.0);
        p.width_el = deg2rad(4.0);
        // at half the full width the gaussian is at half maximum
        CHECK(peak_likelihood(deg2rad(2.0), 0.0, p, cfg) == doctest::Approx(0.5));
        CHECK(peak_likelihood(0.0, 0.0, p, cfg) == 1.0);
        p.width_az = 0.0; // floored
        CHECK(peak_likelihood(cfg.min_peak_width / 2.0, 0.0, p, cfg) == doctest::Approx(0.5));
    }

    TEST_CASE("ray search fan")
    {
        const auto sc = load_scene(test::fixture("two_ray_flat.json"));
        AngleReport rep{sc.rrus[0].id, 0, {peak_towards(sc.rrus[0].position, Vec3(0, 0, 1.5))}};
        BiasSearchConfig cfg;
        cfg.grid_steps = 1;
        auto rays = ray_search({rep}, sc.scene, sc.rrus, cfg);
        REQUIRE(rays.size() == 1);
        CHECK(rays[0].weight == doctest::Approx(bias_prior_density(0.0, 0.0, cfg)));
        const Vec3 d = (rays[0].polyline[1] - rays[0].polyline[0]).normalized();
        CHECK((d - (Vec3(0, 0, 1.5) - sc.rrus[0].position).normalized()).norm() < 1e-12);

        cfg.grid_steps = 5;
        rays = ray_search({rep}, sc.scene, sc.rrus, cfg);
        REQUIRE(rays.size() == 25);
        for (const auto &r : rays)
        {
            const auto mirror = std::find_if(rays.begin(), rays.end(), [&](const TracedRay &o) {
                return std::abs(o.bias_azimuth + r.bias_azimuth) < 1e-15 && std::abs(o.bias_elevation + r.bias_elevation) < 1e-15;
            });
            REQUIRE(mirror != rays.end());
            CHECK(mirror->weight == doctest::Approx(r.weight).epsilon(1e-12));
        }
        CHECK(rays[12].weight == doctest::Approx(bias_prior_density(0.0, 0.0, cfg)));

        rep.rru_id = 99;
        CHECK_THROWS_AS(ray_search({rep}, sc.scene, sc.rrus, cfg), std::invalid_argument);
    }

    TEST_CASE("ray aimed at a mirror wall reflects specularly")
    {
        const auto sc = load_scene(test::fixture("mirror_wall.json"));
        const Vec3 o = sc.rrus[0].position;
        const Vec3 aim(20, 0, 8); // on the wall face x = 20
        AngleReport rep{sc.rrus[0].id, 0, {peak_towards(o, aim)}};
        BiasSearchConfig cfg;
        cfg.grid_steps = 1;
        cfg.max_reflections = 1;
        const auto rays = ray_search({rep}, sc.scene, sc.rrus, cfg);
        REQUIRE(rays.size() == 1);
        const auto &pl = rays[0].polyline;
        REQUIRE(pl.size() == 3);
        CHECK((pl[1] - aim).norm() < 1e-9);
        const Vec3 in = (pl[1] - pl[0]).normalized();
        const Vec3 out = (pl[2] - pl[1]).normalized();
        const Vec3 n(-1, 0, 0);
        CHECK(in.dot(n) == doctest::Approx(-out.dot(n)));
        CHECK((in - in.dot(n) * n - (out - out.dot(n) * n)).norm() < 1e-12);
        CHECK(rays[0].reflection_faces.size() == 1);
    }

    TEST_CASE("closest approach of segments")
    {
        const auto ca = segment_closest_approach({0, 0, 0}, {10, 0, 0}, {5, -5, 1}, {5, 5, 1});
        CHECK(ca.distance == doctest::Approx(1.0));
        CHECK((ca.on_first - Vec3(5, 0, 0)).norm() < 1e-12);
        CHECK((ca.on_second - Vec3(5, 0, 1)).norm() < 1e-12);
        // endpoints clamp
        CHECK(segment_closest_approach({0, 0, 0}, {1, 0, 0}, {3, 0, 0}, {4, 0, 0}).distance == doctest::Approx(2.0));
        // parallel
        CHECK(segment_closest_approach({0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {1, 2, 0}).distance == doctest::Approx(2.0));
    }

    TEST_CASE("pairwise intersection examples")
    {
        const Vec3 ue(100, 0, 1.5);
        const std::vector<TracedRay> rays{straight(1, {0, 0, 20}, ue, 0.2), straight(2, {200, 0, 20}, ue, 0.3)};
        const auto c = intersect_rays(rays, 1.5, 1.0, big_box());
        REQUIRE(c.size() == 1);
        CHECK((c[0].position - ue).norm() < 1e-6);
        CHECK(c[0].weight == doctest::Approx(0.5));
        CHECK(c[0].rt.ray_count == 2);
        CHECK(c[0].rt.rru_set == std::vector<int>{1, 2});
        CHECK(c[0].rt.los);

        const std::vector<TracedRay> parallel{straight(1, {0, 0, 10}, {100, 0, 10}, 1.0),
                                              straight(2, {0, 50, 10}, {100, 50, 10}, 1.0)};
        CHECK(intersect_rays(parallel, 1.5, 1.0, big_box()).empty());

        // same RRU never pairs with itself
        const std::vector<TracedRay> same{straight(1, {0, 0, 20}, ue, 0.2), straight(1, {200, 0, 20}, ue, 0.3),
                                          straight(2, {0, 300, 20}, {0, 301, 20}, 0.3)};
        CHECK(intersect_rays(same, 1.5, 1.0, big_box()).empty());
        CHECK_THROWS(intersect_rays(rays, 1.5, 0.0, big_box()));
    }

    TEST_CASE("single rru plane crossing")
    {
        const std::vector<TracedRay> rays{straight(4, {0, 0, 20}, {30, 40, 1.5}, 0.7)};
        const auto c = intersect_rays(rays, 1.5, 1.0, big_box());
        REQUIRE(c.size() == 1);
        CHECK((c[0].position - Vec3(30, 40, 1.5)).norm() < 1e-9);
        CHECK(c[0].weight == 0.7);
        CHECK(c[0].rt.ray_count == 1);
    }

    TEST_CASE("candidates outside the map are dropped")
    {
        Aabb small;
        small.extend(Vec3(-50, -50, 0));
        small.extend(Vec3(50, 50, 30));
        const Vec3 far(100, 0, 1.5);
        const std::vector<TracedRay> rays{straight(1, {0, 0, 20}, far, 1.0), straight(2, {200, 0, 20}, far, 1.0)};
        CHECK(intersect_rays(rays, 1.5, 1.0, small).empty());
        const Vec3 under(0, 0, -3);
        const std::vector<TracedRay> low{straight(1, {-40, 0, 20}, under, 1.0), straight(2, {40, 0, 20}, under, 1.0)};
        CHECK(intersect_rays(low, 1.5, 1.0, big_box()).empty());
    }

    TEST_CASE("intersection does not depend on ray order")
    {
        std::mt19937_64 rng(3);
        std::vector<TracedRay> rays;
        const Vec3 ue(10, 5, 1.5);
        for (int k = 0; k < 40; ++k)
        {
            const Vec3 o = test::random_point(rng, -100.0, 100.0) + Vec3(0, 0, 120);
            rays.push_back(straight(k % 4, Vec3(o.x(), o.y(), 25), ue + test::random_point(rng, -2.0, 2.0), 0.1 + 0.01 * k));
        }
        auto key = [](std::vector<PositionCandidate> c) {
            std::vector<std::array<double, 4>> out;
            for (const auto &x : c)
                out.push_back({std::round(x.position.x() * 1e6), std::round(x.position.y() * 1e6),
                               std::round(x.position.z() * 1e6), std::round(x.weight * 1e9)});
            std::sort(out.begin(), out.end());
            return out;
        };
        const auto a = key(intersect_rays(rays, 1.5, 2.0, big_box()));
        CHECK(a.size() > 10);
        std::reverse(rays.begin(), rays.end());
        const auto b = key(intersect_rays(rays, 1.5, 2.0, big_box()));
        std::shuffle(rays.begin(), rays.end(), rng);
        const auto c = key(intersect_rays(rays, 1.5, 2.0, big_box()));
        CHECK(a == b);
        CHECK(a == c);
    }

    TEST_CASE("candidate weight is a sum")
    {
        TracedRay a, b;
        a.weight = 0.2;
        b.weight = 0.3;
        CHECK(candidate_weight(std::vector<TracedRay>{a}) == doctest::Approx(0.2));
        CHECK(candidate_weight(std::vector<TracedRay>{a, b}) == doctest::Approx(0.5));
        CHECK(candidate_weight(std::vector<TracedRay>(7, a)) == doctest::Approx(1.4));
    }

    TEST_CASE("expected position examples")
    {
        CHECK(expected_position(std::vector{cand({3, 4, 5}, 2.0)}) == Vec3(3, 4, 5));
        CHECK((expected_position(std::vector{cand({0, 0, 0}, 1.0), cand({2, 0, 0}, 1.0)}) - Vec3(1, 0, 0)).norm() < 1e-15);
        CHECK((expected_position(std::vector{cand({0, 0, 0}, 3.0), cand({2, 0, 0}, 1.0)}) - Vec3(0.5, 0, 0)).norm() < 1e-15);
        CHECK_THROWS_AS(expected_position(std::vector<PositionCandidate>{}), NoPositionError);
        CHECK_THROWS_AS(expected_position(std::vector{cand({0, 0, 0}, 0.0)}), NoPositionError);
    }

    TEST_CASE("expected position is scale invariant and inside the hull")
    {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> w(0.01, 5.0);
        for (int trial = 0; trial < 50; ++trial)
        {
            std::vector<PositionCandidate> cs;
            for (int k = 0; k < 12; ++k)
                cs.push_back(cand(test::random_point(rng, -30.0, 30.0), w(rng)));
            const Vec3 m = expected_position(cs);
            auto scaled = cs;
            for (auto &c : scaled)
                c.weight *= 7.25;
            CHECK((expected_position(scaled) - m).norm() < 1e-12);
            for (int k = 0; k < 30; ++k)
            {
                const Vec3 u = test::random_unit(rng);
                double lo = 1e300, hi = -1e300;
                for (const auto &c : cs)
                {
                    lo = std::min(lo, u.dot(c.position));
                    hi = std::max(hi, u.dot(c.position));
                }
                CHECK(u.dot(m) >= lo - 1e-9);
                CHECK(u.dot(m) <= hi + 1e-9);
            }
        }
    }

    TEST_CASE("filter policy")
    {
        std::vector<PositionCandidate> cs{cand({0, 0, 0}, 1.0, 1), cand({1, 0, 0}, 1.0, 2), cand({2, 0, 0}, 1.0, 2)};
        cs[2].rt.reflection_counts = {3, 0};
        cs[1].rt.los = true;
        FilterPolicy p;
        CHECK(filter_candidates(cs, p).size() == 3);
        p.min_ray_count = 2;
        auto out = filter_candidates(cs, p);
        REQUIRE(out.size() == 2);
        CHECK(out[0].position.x() == 1.0);
        CHECK(out[1].position.x() == 2.0);
        p = FilterPolicy{};
        p.max_reflections = 2;
        CHECK(filter_candidates(cs, p).size() == 2);
        p = FilterPolicy{};
        p.require_los = true;
        CHECK(filter_candidates(cs, p).size() == 1);
        p = FilterPolicy{};
        p.predicates.push_back([](const PositionCandidate &c) { return c.position.x() > 0.5; });
        CHECK(filter_candidates(cs, p).size() == 2);
    }

    TEST_CASE("miss detection")
    {
        MissConfig cfg;
        CHECK(detect_miss(std::vector<PositionCandidate>{}, cfg));
        CHECK_FALSE(detect_miss(std::vector(4, cand({5, 5, 1.5}, 1.0)), cfg));
        const std::vector far{cand({0, 0, 0}, 1.0), cand({100, 0, 0}, 1.0)};
        CHECK(weighted_variance(far) == doctest::Approx(2500.0));
        CHECK(detect_miss(far, cfg));
        std::vector<PositionCandidate> tight;
        std::mt19937_64 rng(1);
        for (int k = 0; k < 20; ++k)
            tight.push_back(cand(Vec3(10, 10, 1.5) + test::random_point(rng, -0.25, 0.25), 1.0));
        CHECK_FALSE(detect_miss(tight, cfg));
    }

    TEST_CASE("exact reports from two line of sight sites meet at the truth")
    {
        auto sc = load_scene(test::fixture("two_ray_flat.json"));
        RruConfig second = sc.rrus[0];
        second.id = 2;
        second.position = Vec3(120, 40, 25);
        sc.rrus.push_back(second);
        BiasSearchConfig cfg;
        for (const auto &s : sc.tracks[0].samples)
        {
            std::vector<AngleReport> reports;
            for (const auto &r : sc.rrus)
                reports.push_back({r.id, s.tti, {peak_towards(r.position, s.position, deg2rad(1.0))}});
            // the unbiased pair carries the largest prior weight
            const auto cs = intersect_rays(ray_search(reports, sc.scene, sc.rrus, cfg), 1.5, 1.0, sc.scene.bounds());
            REQUIRE_FALSE(cs.empty());
            const auto best = std::max_element(cs.begin(), cs.end(), [](const auto &a, const auto &b) {
                return a.weight < b.weight;
            });
            CHECK((best->position - s.position).norm() < 0.1);

            BiasSearchConfig single = cfg;
            single.grid_steps = 1;
            const auto one = intersect_rays(ray_search(reports, sc.scene, sc.rrus, single), 1.5, 1.0, sc.scene.bounds());
            REQUIRE_FALSE(one.empty());
            CHECK((expected_position(one) - s.position).norm() < 0.1);
        }
    }
}
