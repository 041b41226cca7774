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

#ifndef RTPOS_SCENE_HPP
#define RTPOS_SCENE_HPP

#include "rtpos/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtpos {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct Material
{
    double refractive_index = 2.4;     // n >= 1
    double scattering_amplitude = 0.4; // E_S0
    double scattering_exponent = 4.0;  // alpha_R
};

// Extruded polygon footprint, walls from z = 0 to height.
struct Building
{
    std::vector<Eigen::Vector2d> footprint;
    double height = 0.0;
    std::size_t material_id = 0;
};

// Free-form triangle mesh (vertices in meters).
struct Mesh
{
    std::vector<std::array<Vec3, 3>> triangles;
    std::size_t material_id = 0;
};

struct GroundPlane
{
    Eigen::Vector2d min_xy{-500.0, -500.0};
    Eigen::Vector2d max_xy{500.0, 500.0};
    std::size_t material_id = 0;
};

enum class FaceKind
{
    ground,
    wall,
    roof,
    floor,
    mesh
};

struct Face
{
    Vec3 normal;
    Vec3 point;
    FaceKind kind = FaceKind::wall;
    std::size_t object = kNoIndex; // building / mesh index, kNoIndex for ground
    std::size_t material_id = 0;
    std::vector<std::size_t> triangles;
};

// Diffracting building edge (roof edge or vertical corner).
struct Edge
{
    Vec3 a, b;
    Vec3 outward; // bisector of the two adjacent face normals
    std::size_t object = kNoIndex;
    std::size_t material_id = 0;
};

// Triangulated scene with its acceleration structures. Immutable after assembly.
class SceneModel
{
  public:
    static SceneModel assemble(std::map<std::size_t, Material> materials, GroundPlane ground,
                               std::vector<Building> buildings, std::vector<Mesh> meshes = {});

    const std::map<std::size_t, Material> &materials() const { return materials_; }
    const Material &material(std::size_t id) const;
    const GroundPlane &ground() const { return ground_; }
    const std::vector<Building> &buildings() const { return buildings_; }
    const std::vector<Mesh> &meshes() const { return meshes_; }

    const std::vector<Triangle> &triangles() const { return bvh_.triangles(); }
    const std::vector<Face> &faces() const { return faces_; }
    const std::vector<Edge> &edges() const { return edges_; }
    const BvhTree &bvh() const { return bvh_; }
    const SpatialGrid &grid() const { return grid_; }
    const std::vector<Aabb> &object_boxes() const { return object_boxes_; }
    const Aabb &bounds() const { return bounds_; }

    std::size_t object_count() const { return buildings_.size() + meshes_.size(); }

  private:
    std::map<std::size_t, Material> materials_;
    GroundPlane ground_;
    std::vector<Building> buildings_;
    std::vector<Mesh> meshes_;

    std::vector<Face> faces_;
    std::vector<Edge> edges_;
    std::vector<Aabb> object_boxes_;
    BvhTree bvh_;
    SpatialGrid grid_;
    Aabb bounds_;
};

struct RruConfig
{
    int id = 0;
    Vec3 position = Vec3(0.0, 0.0, 20.0);
    double rotation_azimuth = 0.0; // phi_h: rotation of the horizontal element axis
    double tilt = deg2rad(10.0);   // theta_v, down-tilt of the panel
    int rows = 4;                  // i_v count
    int columns = 8;               // i_h count
    double spacing_h = 0.0;        // d_h, meters
    double spacing_v = 0.0;        // d_v, meters

    // Direction of the panel normal: azimuth pi - phi_h, elevation -tilt.
    double boresight_azimuth() const;
    static double rotation_for_boresight(double boresight_azimuth);

    void validate() const;
};

struct UeSample
{
    std::int64_t tti = 0;
    Vec3 position = Vec3::Zero();
};

struct UeTrajectory
{
    int id = 0;
    std::vector<UeSample> samples;

    void validate(const Aabb &bounds) const;
};

struct Scenario
{
    SceneModel scene;
    std::vector<RruConfig> rrus;
    std::vector<UeTrajectory> tracks;
    double carrier_frequency = 3.5e9;

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    const RruConfig &rru(int id) const;
};

class SceneError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Parses a JSON scene document. Errors carry the offending field path or line/column.
Scenario parse_scene(const std::string &text);
Scenario load_scene(const std::filesystem::path &path);

// Serializes back to the scene document format (used by the `perturb` subcommand).
std::string dump_scene(const Scenario &scenario);

struct PerturbationSpec
{
    double wall_position_sigma = 0.0;
    double transmission_scale_low = 1.0;
    double transmission_scale_high = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Rigidly shifts every building/mesh horizontally by N(0, sigma) per axis and scales each
// material's refractive index and scattering amplitude by independent Uniform(low, high) draws.
SceneModel perturb_scene(const SceneModel &scene, const PerturbationSpec &spec);

} // namespace rtpos

#endif
