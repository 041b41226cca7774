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

#include "rtpos/scene.hpp"
#include "rtpos/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rtpos {

using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Assembly

namespace {

double signed_area(const std::vector<Eigen::Vector2d> &poly)
{
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
    {
        const auto &p = poly[i];
        const auto &q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

bool is_convex_ccw(const std::vector<Eigen::Vector2d> &poly)
{
    for (std::size_t i = 0; i < poly.size(); ++i)
    {
        const Eigen::Vector2d e1 = poly[(i + 1) % poly.size()] - poly[i];
        const Eigen::Vector2d e2 = poly[(i + 2) % poly.size()] - poly[(i + 1) % poly.size()];
        if (e1.x() * e2.y() - e1.y() * e2.x() < -1e-9)
            return false;
    }
    return true;
}

Vec3 lift(const Eigen::Vector2d &p, double z) { return {p.x(), p.y(), z}; }

} // namespace

const Material &SceneModel::material(std::size_t id) const
{
    auto it = materials_.find(id);
    if (it == materials_.end())
        throw SceneError("unknown material id " + std::to_string(id));
    return it->second;
}

SceneModel SceneModel::assemble(std::map<std::size_t, Material> materials, GroundPlane ground,
                                std::vector<Building> buildings, std::vector<Mesh> meshes)
{
    SceneModel s;
    s.materials_ = std::move(materials);
    s.ground_ = ground;

    for (const auto &[id, m] : s.materials_)
    {
        if (!(m.refractive_index >= 1.0))
            throw SceneError("material " + std::to_string(id) + ": refractive index must be >= 1");
        if (!(m.scattering_exponent > 0.0))
            throw SceneError("material " + std::to_string(id) + ": scattering exponent must be > 0");
        if (!(m.scattering_amplitude >= 0.0))
            throw SceneError("material " + std::to_string(id) + ": scattering amplitude must be >= 0");
    }
    const auto check_material = [&](std::size_t id, const std::string &where) {
        if (!s.materials_.count(id))
            throw SceneError("unknown material id " + std::to_string(id) + " referenced by " + where);
    };
    check_material(ground.material_id, "ground");
    if (!(ground.max_xy.array() > ground.min_xy.array()).all())
        throw SceneError("ground extent must have positive area");

    std::vector<Triangle> tris;
    const auto add_face = [&](FaceKind kind, std::size_t object, std::size_t material, const Vec3 &normal,
                              const Vec3 &point) {
        s.faces_.push_back(Face{normal, point, kind, object, material, {}});
        return s.faces_.size() - 1;
    };
    const auto add_tri = [&](const Vec3 &a, const Vec3 &b, const Vec3 &c, std::size_t material, std::size_t face) {
        tris.push_back(make_triangle(a, b, c, material, face));
        s.faces_[face].triangles.push_back(tris.size() - 1);
    };

    {
        const Vec3 a(ground.min_xy.x(), ground.min_xy.y(), 0.0);
        const Vec3 b(ground.max_xy.x(), ground.min_xy.y(), 0.0);
        const Vec3 c(ground.max_xy.x(), ground.max_xy.y(), 0.0);
        const Vec3 d(ground.min_xy.x(), ground.max_xy.y(), 0.0);
        const std::size_t f = add_face(FaceKind::ground, kNoIndex, ground.material_id, Vec3::UnitZ(), a);
        add_tri(a, b, c, ground.material_id, f);
        add_tri(a, c, d, ground.material_id, f);
    }

    double top = 0.0;
    for (std::size_t bi = 0; bi < buildings.size(); ++bi)
    {
        auto &bld = buildings[bi];
        const std::string where = "buildings[" + std::to_string(bi) + "]";
        check_material(bld.material_id, where + ".material");
        if (bld.footprint.size() < 3)
            throw SceneError(where + ".footprint: need at least 3 vertices");
        if (!(bld.height > 0.0))
            throw SceneError(where + ".height must be > 0");
        if (signed_area(bld.footprint) < 0.0)
            std::reverse(bld.footprint.begin(), bld.footprint.end());
        if (!is_convex_ccw(bld.footprint))
            throw SceneError(where + ".footprint must be convex");

        const auto &fp = bld.footprint;
        const double h = bld.height;
        const std::size_t n = fp.size();
        Aabb box;
        std::vector<Vec3> wall_normals;
        for (std::size_t i = 0; i < n; ++i)
        {
            const Eigen::Vector2d e = fp[(i + 1) % n] - fp[i];
            wall_normals.push_back(Vec3(e.y(), -e.x(), 0.0).normalized());
        }
        for (std::size_t i = 0; i < n; ++i)
        {
            const Eigen::Vector2d &p = fp[i];
            const Eigen::Vector2d &q = fp[(i + 1) % n];
            const Vec3 a0 = lift(p, 0.0), b0 = lift(q, 0.0), bh = lift(q, h), ah = lift(p, h);
            const Vec3 normal = (b0 - a0).cross(bh - a0).normalized();
            const std::size_t f = add_face(FaceKind::wall, bi, bld.material_id, normal, a0);
            add_tri(a0, b0, bh, bld.material_id, f);
            add_tri(a0, bh, ah, bld.material_id, f);
            const Vec3 &prev_normal = wall_normals[(i + n - 1) % n];
            s.edges_.push_back(Edge{ah, bh, (normal + Vec3::UnitZ()).normalized(), bi, bld.material_id});
            s.edges_.push_back(Edge{a0, ah, (normal + prev_normal).normalized(), bi, bld.material_id});
            box.extend(a0);
            box.extend(ah);
        }
        const std::size_t roof = add_face(FaceKind::roof, bi, bld.material_id, Vec3::UnitZ(), lift(fp[0], h));
        for (std::size_t i = 1; i + 1 < n; ++i)
            add_tri(lift(fp[0], h), lift(fp[i], h), lift(fp[i + 1], h), bld.material_id, roof);
        const std::size_t floor = add_face(FaceKind::floor, bi, bld.material_id, -Vec3::UnitZ(), lift(fp[0], 0.0));
        for (std::size_t i = 1; i + 1 < n; ++i)
            add_tri(lift(fp[0], 0.0), lift(fp[i + 1], 0.0), lift(fp[i], 0.0), bld.material_id, floor);
        s.object_boxes_.push_back(box);
        top = std::max(top, h);
    }

    for (std::size_t mi = 0; mi < meshes.size(); ++mi)
    {
        const auto &mesh = meshes[mi];
        const std::string where = "meshes[" + std::to_string(mi) + "]";
        check_material(mesh.material_id, where + ".material");
        Aabb box;
        for (const auto &t : mesh.triangles)
        {
            const Vec3 normal = (t[1] - t[0]).cross(t[2] - t[0]);
            if (!(0.5 * normal.norm() > 1e-12))
                throw SceneError(where + ": degenerate triangle");
            const std::size_t f =
                add_face(FaceKind::mesh, buildings.size() + mi, mesh.material_id, normal.normalized(), t[0]);
            add_tri(t[0], t[1], t[2], mesh.material_id, f);
            for (const auto &v : t)
            {
                box.extend(v);
                top = std::max(top, v.z());
            }
        }
        s.object_boxes_.push_back(box);
    }

    s.buildings_ = std::move(buildings);
    s.meshes_ = std::move(meshes);
    s.bvh_ = build_bvh(std::move(tris));
    s.grid_ = SpatialGrid(s.object_boxes_, 25.0);
    s.bounds_.min_corner = Vec3(ground.min_xy.x(), ground.min_xy.y(), 0.0);
    s.bounds_.max_corner = Vec3(ground.max_xy.x(), ground.max_xy.y(), top + 100.0);
    return s;
}

// ---------------------------------------------------------------------------------------------
// Configuration types

double RruConfig::boresight_azimuth() const
{
    double az = kPi - rotation_azimuth;
    az = std::remainder(az, 2.0 * kPi);
    return az;
}

double RruConfig::rotation_for_boresight(double boresight_azimuth)
{
    return std::remainder(kPi - boresight_azimuth, 2.0 * kPi);
}

void RruConfig::validate() const
{
    const std::string who = "rru " + std::to_string(id);
    if (rows < 1 || columns < 1)
        throw SceneError(who + ": rows and columns must be >= 1");
    if (!(spacing_h > 0.0) || !(spacing_v > 0.0))
        throw SceneError(who + ": element spacings must be > 0");
    if (!(tilt >= 0.0 && tilt < kPi / 2.0))
        throw SceneError(who + ": tilt must be in [0, 90) degrees");
}

void UeTrajectory::validate(const Aabb &bounds) const
{
    const std::string who = "ue track " + std::to_string(id);
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (i > 0 && samples[i].tti <= samples[i - 1].tti)
            throw SceneError(who + ": tti must be strictly increasing (sample " + std::to_string(i) + ")");
        if (!bounds.contains(samples[i].position))
            throw SceneError(who + ": sample " + std::to_string(i) + " lies outside the scene bounds");
    }
}

const RruConfig &Scenario::rru(int id) const
{
    for (const auto &r : rrus)
        if (r.id == id)
            return r;
    throw SceneError("unknown rru id " + std::to_string(id));
}

void PerturbationSpec::validate() const
{
    if (!(wall_position_sigma >= 0.0))
        throw std::invalid_argument("wall position sigma must be >= 0");
    if (!(transmission_scale_low > 0.0 && transmission_scale_low <= transmission_scale_high))
        throw std::invalid_argument("transmission scale bounds must satisfy 0 < low <= high");
}

// ---------------------------------------------------------------------------------------------
// Parsing

namespace {

struct Reader
{
    static const json &field(const json &obj, const std::string &key, const std::string &path)
    {
        if (!obj.is_object())
            throw SceneError(path + ": expected an object");
        auto it = obj.find(key);
        if (it == obj.end())
            throw SceneError(path + "." + key + ": missing field");
        return *it;
    }

    static double number(const json &obj, const std::string &key, const std::string &path)
    {
        const json &v = field(obj, key, path);
        if (!v.is_number())
            throw SceneError(path + "." + key + ": expected a number");
        return v.get<double>();
    }

    static double number_or(const json &obj, const std::string &key, double fallback, const std::string &path)
    {
        return obj.contains(key) ? number(obj, key, path) : fallback;
    }

    static std::int64_t integer(const json &obj, const std::string &key, const std::string &path)
    {
        const json &v = field(obj, key, path);
        if (!v.is_number_integer())
            throw SceneError(path + "." + key + ": expected an integer");
        return v.get<std::int64_t>();
    }

    static std::size_t index(const json &obj, const std::string &key, const std::string &path)
    {
        const auto v = integer(obj, key, path);
        if (v < 0)
            throw SceneError(path + "." + key + ": expected a non-negative id");
        return static_cast<std::size_t>(v);
    }

    static std::vector<double> numbers(const json &v, std::size_t n, const std::string &path)
    {
        if (!v.is_array() || v.size() != n)
            throw SceneError(path + ": expected an array of " + std::to_string(n) + " numbers");
        std::vector<double> out;
        for (const auto &x : v)
        {
            if (!x.is_number())
                throw SceneError(path + ": expected numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    static Vec3 vec3(const json &v, const std::string &path)
    {
        const auto a = numbers(v, 3, path);
        return {a[0], a[1], a[2]};
    }

    static const json &array(const json &obj, const std::string &key, const std::string &path)
    {
        const json &v = field(obj, key, path);
        if (!v.is_array())
            throw SceneError(path + "." + key + ": expected an array");
        return v;
    }
};

std::string line_context(const std::string &text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    {
        if (text[i] == '\n')
        {
            ++line;
            col = 1;
        }
        else
            ++col;
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::vector<UeSample> parse_track_samples(const json &t, const std::string &path)
{
    std::vector<UeSample> samples;
    if (t.contains("points"))
    {
        const json &pts = Reader::array(t, "points", path);
        for (std::size_t i = 0; i < pts.size(); ++i)
        {
            const std::string p = path + ".points[" + std::to_string(i) + "]";
            samples.push_back({Reader::integer(pts[i], "tti", p), Reader::vec3(Reader::field(pts[i], "xyz", p), p + ".xyz")});
        }
        return samples;
    }
    // Waypoint form: evenly spaced samples along a 2D polyline at fixed UE height.
    const json &wps = Reader::array(t, "waypoints", path);
    const double height = Reader::number_or(t, "height", 1.5, path);
    const double step = Reader::number_or(t, "step_m", 1.0, path);
    std::int64_t tti = t.contains("first_tti") ? Reader::integer(t, "first_tti", path) : 0;
    const std::int64_t tti_step = t.contains("tti_step") ? Reader::integer(t, "tti_step", path) : 1;
    if (!(step > 0.0))
        throw SceneError(path + ".step_m must be > 0");
    if (wps.size() < 2)
        throw SceneError(path + ".waypoints: need at least 2 points");
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t i = 0; i < wps.size(); ++i)
    {
        const auto a = Reader::numbers(wps[i], 2, path + ".waypoints[" + std::to_string(i) + "]");
        pts.emplace_back(a[0], a[1]);
    }
    double carry = 0.0; // distance already travelled past the last emitted sample
    samples.push_back({tti, lift(pts.front(), height)});
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    {
        const Eigen::Vector2d d = pts[i + 1] - pts[i];
        const double len = d.norm();
        double s = step - carry;
        while (s <= len + 1e-9)
        {
            tti += tti_step;
            samples.push_back({tti, lift(pts[i] + d * (std::min(s, len) / len), height)});
            s += step;
        }
        carry = len - (s - step);
    }
    return samples;
}

} // namespace

Scenario parse_scene(const std::string &text)
{
    json root;
    try
    {
        root = json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        throw SceneError("scene parse error at " + line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    if (!root.is_object())
        throw SceneError("scene: top level must be an object");

    Scenario sc;
    sc.carrier_frequency = Reader::number_or(root, "carrier_frequency_hz", 3.5e9, "scene");
    if (!(sc.carrier_frequency > 0.0))
        throw SceneError("scene.carrier_frequency_hz must be > 0");
    const double lambda = sc.wavelength();

    std::map<std::size_t, Material> materials;
    const json &mats = Reader::array(root, "materials", "scene");
    for (std::size_t i = 0; i < mats.size(); ++i)
    {
        const std::string p = "materials[" + std::to_string(i) + "]";
        Material m;
        m.refractive_index = Reader::number_or(mats[i], "n", m.refractive_index, p);
        m.scattering_amplitude = Reader::number_or(mats[i], "scattering_amplitude", m.scattering_amplitude, p);
        m.scattering_exponent = Reader::number_or(mats[i], "alpha_r", m.scattering_exponent, p);
        const std::size_t id = Reader::index(mats[i], "id", p);
        if (!materials.emplace(id, m).second)
            throw SceneError(p + ".id: duplicate material id " + std::to_string(id));
    }

    GroundPlane ground;
    {
        const json &g = Reader::field(root, "ground", "scene");
        const auto ext = Reader::numbers(Reader::field(g, "extent", "ground"), 4, "ground.extent");
        ground.min_xy = {ext[0], ext[1]};
        ground.max_xy = {ext[2], ext[3]};
        ground.material_id = Reader::index(g, "material", "ground");
    }

    std::vector<Building> buildings;
    if (root.contains("buildings"))
    {
        const json &bs = Reader::array(root, "buildings", "scene");
        for (std::size_t i = 0; i < bs.size(); ++i)
        {
            const std::string p = "buildings[" + std::to_string(i) + "]";
            Building b;
            b.height = Reader::number(bs[i], "height", p);
            b.material_id = Reader::index(bs[i], "material", p);
            if (bs[i].contains("box"))
            {
                const auto r = Reader::numbers(bs[i]["box"], 4, p + ".box");
                b.footprint = {{r[0], r[1]}, {r[2], r[1]}, {r[2], r[3]}, {r[0], r[3]}};
            }
            else
            {
                const json &fp = Reader::array(bs[i], "footprint", p);
                for (std::size_t k = 0; k < fp.size(); ++k)
                {
                    const auto a = Reader::numbers(fp[k], 2, p + ".footprint[" + std::to_string(k) + "]");
                    b.footprint.emplace_back(a[0], a[1]);
                }
            }
            buildings.push_back(std::move(b));
        }
    }

    std::vector<Mesh> meshes;
    if (root.contains("meshes"))
    {
        const json &ms = Reader::array(root, "meshes", "scene");
        for (std::size_t i = 0; i < ms.size(); ++i)
        {
            const std::string p = "meshes[" + std::to_string(i) + "]";
            Mesh m;
            m.material_id = Reader::index(ms[i], "material", p);
            const json &ts = Reader::array(ms[i], "triangles", p);
            for (std::size_t k = 0; k < ts.size(); ++k)
            {
                const std::string tp = p + ".triangles[" + std::to_string(k) + "]";
                if (!ts[k].is_array() || ts[k].size() != 3)
                    throw SceneError(tp + ": expected 3 vertices");
                m.triangles.push_back({Reader::vec3(ts[k][0], tp), Reader::vec3(ts[k][1], tp), Reader::vec3(ts[k][2], tp)});
            }
            meshes.push_back(std::move(m));
        }
    }

    sc.scene = SceneModel::assemble(std::move(materials), ground, std::move(buildings), std::move(meshes));

    if (root.contains("rrus"))
    {
        const json &rs = Reader::array(root, "rrus", "scene");
        for (std::size_t i = 0; i < rs.size(); ++i)
        {
            const std::string p = "rrus[" + std::to_string(i) + "]";
            RruConfig r;
            r.id = static_cast<int>(Reader::integer(rs[i], "id", p));
            r.position = Reader::vec3(Reader::field(rs[i], "position", p), p + ".position");
            r.rotation_azimuth = RruConfig::rotation_for_boresight(deg2rad(Reader::number(rs[i], "azimuth_deg", p)));
            r.tilt = deg2rad(Reader::number_or(rs[i], "tilt_deg", 10.0, p));
            r.rows = static_cast<int>(rs[i].contains("rows") ? Reader::integer(rs[i], "rows", p) : 4);
            r.columns = static_cast<int>(rs[i].contains("cols") ? Reader::integer(rs[i], "cols", p) : 8);
            r.spacing_h = Reader::number_or(rs[i], "spacing_h", lambda / 2.0, p);
            r.spacing_v = Reader::number_or(rs[i], "spacing_v", lambda / 2.0, p);
            r.validate();
            if (!sc.scene.bounds().contains(r.position))
                throw SceneError(p + ".position lies outside the scene bounds");
            for (const auto &other : sc.rrus)
                if (other.id == r.id)
                    throw SceneError(p + ".id: duplicate rru id " + std::to_string(r.id));
            sc.rrus.push_back(r);
        }
    }

    if (root.contains("ue_tracks"))
    {
        const json &ts = Reader::array(root, "ue_tracks", "scene");
        for (std::size_t i = 0; i < ts.size(); ++i)
        {
            const std::string p = "ue_tracks[" + std::to_string(i) + "]";
            UeTrajectory t;
            t.id = ts[i].contains("id") ? static_cast<int>(Reader::integer(ts[i], "id", p)) : static_cast<int>(i);
            t.samples = parse_track_samples(ts[i], p);
            t.validate(sc.scene.bounds());
            sc.tracks.push_back(std::move(t));
        }
    }
    return sc;
}

Scenario load_scene(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw SceneError("cannot open scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try
    {
        return parse_scene(ss.str());
    }
    catch (const SceneError &e)
    {
        throw SceneError(path.string() + ": " + e.what());
    }
}

std::string dump_scene(const Scenario &sc)
{
    json root;
    root["carrier_frequency_hz"] = sc.carrier_frequency;
    root["materials"] = json::array();
    for (const auto &[id, m] : sc.scene.materials())
        root["materials"].push_back(
            {{"id", id}, {"n", m.refractive_index}, {"scattering_amplitude", m.scattering_amplitude}, {"alpha_r", m.scattering_exponent}});
    const auto &g = sc.scene.ground();
    root["ground"] = {{"material", g.material_id}, {"extent", {g.min_xy.x(), g.min_xy.y(), g.max_xy.x(), g.max_xy.y()}}};
    root["buildings"] = json::array();
    for (const auto &b : sc.scene.buildings())
    {
        json fp = json::array();
        for (const auto &p : b.footprint)
            fp.push_back({p.x(), p.y()});
        root["buildings"].push_back({{"footprint", fp}, {"height", b.height}, {"material", b.material_id}});
    }
    if (!sc.scene.meshes().empty())
    {
        root["meshes"] = json::array();
        for (const auto &m : sc.scene.meshes())
        {
            json tris = json::array();
            for (const auto &t : m.triangles)
                tris.push_back({{t[0].x(), t[0].y(), t[0].z()}, {t[1].x(), t[1].y(), t[1].z()}, {t[2].x(), t[2].y(), t[2].z()}});
            root["meshes"].push_back({{"material", m.material_id}, {"triangles", tris}});
        }
    }
    root["rrus"] = json::array();
    for (const auto &r : sc.rrus)
        root["rrus"].push_back({{"id", r.id},
                                {"position", {r.position.x(), r.position.y(), r.position.z()}},
                                {"azimuth_deg", rad2deg(r.boresight_azimuth())},
                                {"tilt_deg", rad2deg(r.tilt)},
                                {"rows", r.rows},
                                {"cols", r.columns},
                                {"spacing_h", r.spacing_h},
                                {"spacing_v", r.spacing_v}});
    root["ue_tracks"] = json::array();
    for (const auto &t : sc.tracks)
    {
        json pts = json::array();
        for (const auto &s : t.samples)
            pts.push_back({{"tti", s.tti}, {"xyz", {s.position.x(), s.position.y(), s.position.z()}}});
        root["ue_tracks"].push_back({{"id", t.id}, {"points", pts}});
    }
    return root.dump(2);
}

// ---------------------------------------------------------------------------------------------
// Map perturbation

SceneModel perturb_scene(const SceneModel &scene, const PerturbationSpec &spec)
{
    spec.validate();
    Rng rng(mix_seed({spec.rng_seed, 0x9e7u}));

    auto buildings = scene.buildings();
    auto meshes = scene.meshes();
    if (spec.wall_position_sigma > 0.0)
    {
        std::normal_distribution<double> offset(0.0, spec.wall_position_sigma);
        for (auto &b : buildings)
        {
            const Eigen::Vector2d shift(offset(rng), offset(rng));
            for (auto &p : b.footprint)
                p += shift;
        }
        for (auto &m : meshes)
        {
            const Vec3 shift(offset(rng), offset(rng), 0.0);
            for (auto &t : m.triangles)
                for (auto &v : t)
                    v += shift;
        }
    }

    auto materials = scene.materials();
    if (spec.transmission_scale_low != 1.0 || spec.transmission_scale_high != 1.0)
    {
        std::uniform_real_distribution<double> scale(spec.transmission_scale_low, spec.transmission_scale_high);
        for (auto &[id, m] : materials)
        {
            m.refractive_index = std::max(1.0, m.refractive_index * scale(rng));
            m.scattering_amplitude *= scale(rng);
        }
    }
    return SceneModel::assemble(std::move(materials), scene.ground(), std::move(buildings), std::move(meshes));
}

} // namespace rtpos
