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

#include "rtpos/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rtpos::csv {

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_paths_header(std::ostream &os)
{
    os << "tti,rru_id,path,length_m,delay_s,gain_re,gain_im,power_db,aoa_az_deg,aoa_el_deg,aod_az_deg,aod_el_deg,los,"
          "interactions\n";
}

void write_paths(std::ostream &os, std::int64_t tti, int rru_id, std::span<const PathComponent> paths)
{
    for (std::size_t i = 0; i < paths.size(); ++i)
    {
        const auto &p = paths[i];
        std::string seq;
        for (const auto &it : p.interactions)
        {
            if (!seq.empty())
                seq += ';';
            seq += it.kind == InteractionKind::reflection ? 'R' : it.kind == InteractionKind::scattering ? 'S' : 'D';
            seq += std::to_string(it.face_id);
        }
        os << tti << ',' << rru_id << ',' << i << ',' << format_double(p.path_length) << ',' << format_double(p.delay)
           << ',' << format_double(p.complex_gain.real()) << ',' << format_double(p.complex_gain.imag()) << ','
           << format_double(10.0 * std::log10(p.power())) << ',' << format_double(rad2deg(p.aoa_azimuth)) << ','
           << format_double(rad2deg(p.aoa_elevation)) << ',' << format_double(rad2deg(p.aod_azimuth)) << ','
           << format_double(rad2deg(p.aod_elevation)) << ',' << (p.is_los ? 1 : 0) << ',' << seq << '\n';
    }
}

void write_reports_header(std::ostream &os) { os << "tti,rru_id,az_deg,el_deg,power,width_az_deg,width_el_deg\n"; }

void write_report(std::ostream &os, const AngleReport &report)
{
    for (const auto &pk : report.peaks)
        os << report.tti << ',' << report.rru_id << ',' << format_double(rad2deg(pk.azimuth)) << ','
           << format_double(rad2deg(pk.elevation)) << ',' << format_double(pk.peak_power) << ','
           << format_double(rad2deg(pk.width_az)) << ',' << format_double(rad2deg(pk.width_el)) << '\n';
}

namespace {

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

template <typename T>
T parse_number(const std::string &s, std::size_t line)
{
    T v{};
    const auto *end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw std::runtime_error("line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

} // namespace

std::vector<AngleReport> read_reports(std::istream &is)
{
    std::vector<AngleReport> out;
    std::map<std::pair<std::int64_t, int>, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(is, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (header)
        {
            header = false;
            if (line.rfind("tti,", 0) == 0)
                continue;
        }
        const auto cells = split(line);
        if (cells.size() != 7)
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected 7 columns");
        const auto tti = parse_number<std::int64_t>(cells[0], lineno);
        const auto rru = parse_number<int>(cells[1], lineno);
        AnglePeak pk;
        pk.azimuth = deg2rad(parse_number<double>(cells[2], lineno));
        pk.elevation = deg2rad(parse_number<double>(cells[3], lineno));
        pk.peak_power = parse_number<double>(cells[4], lineno);
        pk.width_az = deg2rad(parse_number<double>(cells[5], lineno));
        pk.width_el = deg2rad(parse_number<double>(cells[6], lineno));
        const auto key = std::make_pair(tti, rru);
        auto it = index.find(key);
        if (it == index.end())
        {
            it = index.emplace(key, out.size()).first;
            out.push_back({rru, tti, {}});
        }
        out[it->second].peaks.push_back(pk);
    }
    return out;
}

void write_candidates_header(std::ostream &os) { os << "tti,x,y,z,weight,ray_count,rru_set\n"; }

void write_candidates(std::ostream &os, std::int64_t tti, std::span<const PositionCandidate> candidates)
{
    for (const auto &c : candidates)
    {
        std::string set;
        for (int r : c.rt.rru_set)
            set += (set.empty() ? "" : ";") + std::to_string(r);
        os << tti << ',' << format_double(c.position.x()) << ',' << format_double(c.position.y()) << ','
           << format_double(c.position.z()) << ',' << format_double(c.weight) << ',' << c.rt.ray_count << ',' << set
           << '\n';
    }
}

void write_clusters_header(std::ostream &os) { os << "tti,cluster_id,weight,cx,cy,cz,variance,size\n"; }

void write_clusters(std::ostream &os, std::int64_t tti, std::span<const Cluster> clusters)
{
    for (std::size_t i = 0; i < clusters.size(); ++i)
    {
        const auto &c = clusters[i];
        os << tti << ',' << i << ',' << format_double(c.total_weight) << ',' << format_double(c.center.x()) << ','
           << format_double(c.center.y()) << ',' << format_double(c.center.z()) << ',' << format_double(c.variance)
           << ',' << c.members.size() << '\n';
    }
}

void write_track_header(std::ostream &os) { os << "tti,trend_id,raw,predicted,weight\n"; }

void write_track(std::ostream &os, std::span<const TrackRow> rows)
{
    for (const auto &r : rows)
        os << r.tti << ',' << r.trend_id << ',' << format_double(r.raw) << ',' << format_double(r.predicted) << ','
           << format_double(r.weight) << '\n';
}

void write_cdf(std::ostream &os, std::span<const double> values)
{
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    os << "value,cumulative_probability\n";
    const auto n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        os << format_double(v[i]) << ',' << format_double(static_cast<double>(i + 1) / n) << '\n';
}

} // namespace rtpos::csv
