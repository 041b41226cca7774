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

#ifndef RTPOS_CSV_IO_HPP
#define RTPOS_CSV_IO_HPP

#include "rtpos/array_signal.hpp"
#include "rtpos/clustering.hpp"
#include "rtpos/positioning.hpp"
#include "rtpos/propagation.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rtpos::csv {

// Header: tti,rru_id,path,length_m,delay_s,gain_re,gain_im,power_db,aoa_az_deg,aoa_el_deg,aod_az_deg,aod_el_deg,los,interactions
void write_paths_header(std::ostream &os);
void write_paths(std::ostream &os, std::int64_t tti, int rru_id, std::span<const PathComponent> paths);

// Header: tti,rru_id,az_deg,el_deg,power,width_az_deg,width_el_deg
void write_reports_header(std::ostream &os);
void write_report(std::ostream &os, const AngleReport &report);
// Groups rows by (tti, rru_id) in order of first appearance. Throws std::runtime_error with the
// offending line number on malformed input.
std::vector<AngleReport> read_reports(std::istream &is);

// Header: tti,x,y,z,weight,ray_count,rru_set
void write_candidates_header(std::ostream &os);
void write_candidates(std::ostream &os, std::int64_t tti, std::span<const PositionCandidate> candidates);

// Header: tti,cluster_id,weight,cx,cy,cz,variance,size
void write_clusters_header(std::ostream &os);
void write_clusters(std::ostream &os, std::int64_t tti, std::span<const Cluster> clusters);

// Header: tti,trend_id,raw,predicted,weight (angles in degrees)
struct TrackRow
{
    std::int64_t tti;
    int trend_id;
    double raw;
    double predicted; // NaN when the trend has no fit yet
    double weight;
};
void write_track_header(std::ostream &os);
void write_track(std::ostream &os, std::span<const TrackRow> rows);

// Header: value,cumulative_probability
void write_cdf(std::ostream &os, std::span<const double> values);

std::string format_double(double v);

} // namespace rtpos::csv

#endif
