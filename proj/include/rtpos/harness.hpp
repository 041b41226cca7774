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

#ifndef RTPOS_HARNESS_HPP
#define RTPOS_HARNESS_HPP

#include "rtpos/array_signal.hpp"
#include "rtpos/clustering.hpp"
#include "rtpos/positioning.hpp"
#include "rtpos/propagation.hpp"
#include "rtpos/scene.hpp"
#include "rtpos/tracking.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rtpos {

struct ExperimentConfig
{
    std::filesystem::path scene_path;
    std::vector<std::uint64_t> seeds{1};
    double calibration_sigma_deg = 0.0; // 3 sigma; array orientation and element phase
    double snr_db = 20.0;
    int max_base_stations = 5;          // N_bs
    bool clustering = true;
    bool tracking = false;
    PickStrategy strategy = PickStrategy::combined;

    // Spurious arrival directions: per RRU and TTI with this probability, one extra plane wave
    // from a random direction inside the sector.
    double interference_probability = 0.0;
    double interference_power_db = 0.0;

    // Map error seen by the positioning stage; the propagation truth stays unperturbed.
    double wall_sigma = 0.0;
    double transmission_scale_low = 1.0;
    double transmission_scale_high = 1.0;

    TraceConfig trace;
    AoaConfig aoa;
    BiasSearchConfig bias;
    double d_intersect = 2.0;
    ClusterConfig cluster;
    MissConfig miss;
    int min_ray_count = 1;
    std::optional<int> filter_max_reflections;
    double ue_height = 1.5;
    std::optional<double> height_tolerance = 3.0; // drop candidates farther than this from ue_height
    TrackerConfig tracker;        // angle trends
    std::size_t center_buffer = 8; // cluster-center tracker buffer

    std::vector<int> track_ids;       // empty: every track in the scene
    std::optional<std::size_t> max_samples; // per track, from the start
    int threads = 1;
    std::filesystem::path out_dir;

    void validate() const;
};

// Reads the JSON experiment document. Relative scene paths resolve against the config's directory.
ExperimentConfig parse_experiment(const std::string &text, const std::filesystem::path &base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path &path);

// Uplink paths indexed [rru][sample] where samples are the selected track points in order.
struct TraceCache
{
    std::vector<int> rru_ids;
    std::vector<std::vector<std::vector<PathComponent>>> paths;
};

struct UePoint
{
    int track_id;
    std::int64_t tti;
    Vec3 position;
};

std::vector<UePoint> selected_points(const Scenario &scenario, const ExperimentConfig &cfg);

// Traces from each RRU to every UE point once and reverses the paths into uplink orientation.
TraceCache build_trace_cache(const Scenario &scenario, std::span<const UePoint> points, const TraceConfig &cfg);

// Receiver-side view of a path traced from the other end.
PathComponent reverse_path(const PathComponent &p);

struct TtiRecord
{
    int track_id = 0;
    std::int64_t tti = 0;
    Vec3 truth = Vec3::Zero();
    Vec3 estimate = Vec3::Zero();
    double error = 0.0;
    double variance = 0.0;         // weighted variance of all candidates (m^2)
    double cluster_variance = std::numeric_limits<double>::quiet_NaN(); // selected cluster; NaN without clustering
    bool miss = false;
    bool fallback = false; // no candidates survived; estimate is the fallback position
    std::size_t rru_count = 0;
    std::size_t peak_count = 0;
    std::size_t candidate_count = 0;
    std::size_t cluster_count = 0;
};

struct PipelineOutputs
{
    std::vector<TtiRecord> records;
    std::vector<AngleReport> reports;                           // per TTI, per RRU
    std::vector<std::vector<PositionCandidate>> candidates;     // per record
    std::vector<std::vector<Cluster>> clusters;                 // per record
};

struct PipelineOptions
{
    bool keep_reports = false;
    bool keep_candidates = false;
    // Replace the estimated reports (e.g. read from a file); keyed by (tti, rru_id).
    const std::map<std::pair<std::int64_t, int>, AngleReport> *reports_override = nullptr;
    // Noise-free reports built from the traced path directions, one peak per path.
    bool oracle_reports = false;
};

PipelineOutputs run_pipeline(const Scenario &scenario, const ExperimentConfig &cfg, std::uint64_t seed,
                             const TraceCache *cache = nullptr, const PipelineOptions &options = {});

// RRU ids ordered by descending total received power, ties by ascending id; capped at n_bs.
std::vector<int> strongest_rrus(const std::vector<int> &rru_ids, const std::vector<double> &powers, int n_bs);

struct ErrorSummary
{
    std::size_t count = 0;
    double median = 0.0;
    double p90 = 0.0;
    double mean = 0.0;
    double pearson = 0.0; // variance vs error; NaN when undefined
    std::vector<double> sorted_errors;
};

// Smallest sample with at least fraction q of the samples at or below it.
double order_statistic(std::vector<double> values, double q);
double pearson_correlation(std::span<const double> x, std::span<const double> y);
ErrorSummary summarize(std::span<const double> errors, std::span<const double> variances);

enum class SweepDimension
{
    n_bs,
    calibration_sigma,
    perturbation,
};

SweepDimension parse_dimension(const std::string &name);
std::string to_string(SweepDimension d);

struct SweepPoint
{
    double value = 0.0;
    ErrorSummary summary;
    double miss_rate = 0.0;
    double mean_error_miss = 0.0; // NaN when there are no misses
    double mean_error_hit = 0.0;
};

ExperimentConfig with_sweep_value(ExperimentConfig cfg, SweepDimension dim, double value);

// One run_pipeline per value per seed; errors pooled over seeds.
std::vector<SweepPoint> sweep(const Scenario &scenario, const ExperimentConfig &cfg, SweepDimension dim,
                              const std::vector<double> &values);

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must write only to slot i.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn);

} // namespace rtpos

#endif
