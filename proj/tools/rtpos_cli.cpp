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
#include "rtpos/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace rtpos;

struct Common
{
    std::string scene;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    int threads = 0;
    bool emit_cdf = false;
};

void add_common(CLI::App *cmd, Common &c)
{
    cmd->add_option("--scene", c.scene, "Scene JSON document");
    cmd->add_option("--config", c.config, "Experiment JSON document");
    cmd->add_option("--seed", c.seed, "Run a single seed instead of the configured list");
    cmd->add_option("--out-dir", c.out_dir, "Directory for CSV outputs");
    cmd->add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--emit-cdf", c.emit_cdf, "Also write error CDF pairs");
}

struct Setup
{
    ExperimentConfig cfg;
    Scenario scenario;
};

Setup prepare(const Common &c)
{
    Setup s;
    if (!c.config.empty())
        s.cfg = load_experiment(c.config);
    if (!c.scene.empty())
        s.cfg.scene_path = c.scene;
    if (s.cfg.scene_path.empty())
        throw std::invalid_argument("no scene given (--scene or config 'scene')");
    if (c.seed)
        s.cfg.seeds = {*c.seed};
    if (c.threads > 0)
        s.cfg.threads = c.threads;
    if (c.out_dir != ".")
        s.cfg.out_dir = c.out_dir;
    if (s.cfg.out_dir.empty())
        s.cfg.out_dir = ".";
    s.cfg.validate();
    s.scenario = load_scene(s.cfg.scene_path);
    s.cfg.trace.carrier_frequency = s.scenario.carrier_frequency;
    std::filesystem::create_directories(s.cfg.out_dir);
    return s;
}

std::ofstream open_out(const Setup &s, const std::string &name)
{
    const auto path = s.cfg.out_dir / name;
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
    return os;
}

void write_positions(std::ostream &os, const std::vector<std::pair<std::uint64_t, TtiRecord>> &rows)
{
    os << "seed,track_id,tti,true_x,true_y,true_z,est_x,est_y,est_z,error,variance,cluster_variance,miss,fallback,rru_count,"
          "peak_count,candidate_count,cluster_count\n";
    using csv::format_double;
    for (const auto &[seed, r] : rows)
        os << seed << ',' << r.track_id << ',' << r.tti << ',' << format_double(r.truth.x()) << ','
           << format_double(r.truth.y()) << ',' << format_double(r.truth.z()) << ',' << format_double(r.estimate.x())
           << ',' << format_double(r.estimate.y()) << ',' << format_double(r.estimate.z()) << ','
           << format_double(r.error) << ',' << format_double(r.variance) << ',' << format_double(r.cluster_variance)
           << ',' << (r.miss ? 1 : 0) << ','
           << (r.fallback ? 1 : 0) << ',' << r.rru_count << ',' << r.peak_count << ',' << r.candidate_count << ','
           << r.cluster_count << '\n';
}

void write_summary(std::ostream &os, const ErrorSummary &s)
{
    using csv::format_double;
    os << "count,median,p90,mean,pearson\n"
       << s.count << ',' << format_double(s.median) << ',' << format_double(s.p90) << ',' << format_double(s.mean)
       << ',' << format_double(s.pearson) << '\n';
}

int cmd_trace(const Common &c)
{
    const auto s = prepare(c);
    const auto points = selected_points(s.scenario, s.cfg);
    const auto cache = build_trace_cache(s.scenario, points, s.cfg.trace);
    auto os = open_out(s, "paths.csv");
    csv::write_paths_header(os);
    for (std::size_t k = 0; k < cache.rru_ids.size(); ++k)
        for (std::size_t i = 0; i < points.size(); ++i)
            csv::write_paths(os, points[i].tti, cache.rru_ids[k], cache.paths[k][i]);
    return 0;
}

int cmd_aoa(const Common &c)
{
    const auto s = prepare(c);
    auto os = open_out(s, "reports.csv");
    csv::write_reports_header(os);
    const auto cache = build_trace_cache(s.scenario, selected_points(s.scenario, s.cfg), s.cfg.trace);
    PipelineOptions opt;
    opt.keep_reports = true;
    const auto run = run_pipeline(s.scenario, s.cfg, s.cfg.seeds.front(), &cache, opt);
    for (const auto &r : run.reports)
        csv::write_report(os, r);
    return 0;
}

int cmd_localize(const Common &c, const std::string &reports_path, bool tracking)
{
    auto s = prepare(c);
    if (tracking)
        s.cfg.tracking = true;
    std::map<std::pair<std::int64_t, int>, AngleReport> reports;
    PipelineOptions opt;
    opt.keep_candidates = true;
    if (!reports_path.empty())
    {
        std::ifstream in(reports_path);
        if (!in)
            throw std::runtime_error("cannot open " + reports_path);
        for (auto &r : csv::read_reports(in))
            reports[{r.tti, r.rru_id}] = std::move(r);
        opt.reports_override = &reports;
    }
    const auto cache = build_trace_cache(s.scenario, selected_points(s.scenario, s.cfg), s.cfg.trace);
    auto cand = open_out(s, "candidates.csv");
    auto clus = open_out(s, "clusters.csv");
    csv::write_candidates_header(cand);
    csv::write_clusters_header(clus);
    std::vector<std::pair<std::uint64_t, TtiRecord>> rows;
    std::vector<double> errors, variances;
    for (auto seed : s.cfg.seeds)
    {
        const auto run = run_pipeline(s.scenario, s.cfg, seed, &cache, opt);
        for (std::size_t i = 0; i < run.records.size(); ++i)
        {
            if (s.cfg.seeds.size() == 1)
            {
                csv::write_candidates(cand, run.records[i].tti, run.candidates[i]);
                csv::write_clusters(clus, run.records[i].tti, run.clusters[i]);
            }
            rows.emplace_back(seed, run.records[i]);
            errors.push_back(run.records[i].error);
            variances.push_back(run.records[i].variance);
        }
    }
    auto pos = open_out(s, "positions.csv");
    write_positions(pos, rows);
    if (errors.size() >= 2)
    {
        const auto summary = summarize(errors, variances);
        auto sum = open_out(s, "summary.csv");
        write_summary(sum, summary);
        std::cout << "median " << summary.median << " m, p90 " << summary.p90 << " m, pearson " << summary.pearson
                  << '\n';
    }
    if (c.emit_cdf)
    {
        auto cdf = open_out(s, "error_cdf.csv");
        csv::write_cdf(cdf, errors);
    }
    return 0;
}

int cmd_track(const Common &c, std::optional<int> rru_filter, bool elevation)
{
    const auto s = prepare(c);
    const auto cache = build_trace_cache(s.scenario, selected_points(s.scenario, s.cfg), s.cfg.trace);
    PipelineOptions opt;
    opt.keep_reports = true;
    const auto run = run_pipeline(s.scenario, s.cfg, s.cfg.seeds.front(), &cache, opt);

    // One tracker per RRU over the reported peak angles.
    TrackerConfig tcfg = s.cfg.tracker;
    tcfg.wrap = !elevation;
    std::map<int, TrackerState> states;
    std::map<int, std::optional<std::int64_t>> last;
    std::vector<csv::TrackRow> rows;
    for (const auto &r : run.reports)
    {
        if (rru_filter && r.rru_id != *rru_filter)
            continue;
        auto &prev = last[r.rru_id];
        if (prev && r.tti <= *prev)
            continue; // several tracks share TTIs; keep the first stream
        prev = r.tti;
        std::vector<double> est;
        for (const auto &pk : r.peaks)
            est.push_back(elevation ? pk.elevation : pk.azimuth);
        auto upd = update_tracker(std::move(states[r.rru_id]), r.tti, est, tcfg);
        for (const auto &a : upd.assignments)
        {
            double predicted = std::numeric_limits<double>::quiet_NaN(), weight = 0.0;
            if (const auto *t = upd.state.find(a.trend_id))
                if (const auto p = predict_angle(*t, r.tti, tcfg))
                {
                    predicted = rad2deg(p->angle);
                    weight = p->weight;
                }
            rows.push_back({r.tti, r.rru_id * 100000 + a.trend_id, rad2deg(a.estimate), predicted, weight});
        }
        states[r.rru_id] = std::move(upd.state);
    }
    auto os = open_out(s, "track.csv");
    csv::write_track_header(os);
    csv::write_track(os, rows);
    return 0;
}

int cmd_sweep(const Common &c, const std::string &dimension, std::vector<double> values)
{
    const auto s = prepare(c);
    const auto dim = parse_dimension(dimension);
    if (values.empty())
    {
        switch (dim)
        {
        case SweepDimension::n_bs:
            values = {1, 2, 3, 4, 5};
            break;
        case SweepDimension::calibration_sigma:
            values = {1, 3};
            break;
        case SweepDimension::perturbation:
            values = {0, 1, 2};
            break;
        }
    }
    const auto table = sweep(s.scenario, s.cfg, dim, values);
    auto os = open_out(s, "sweep_" + dimension + ".csv");
    using csv::format_double;
    os << "dimension,value,count,median,p90,mean,pearson,miss_rate,mean_error_miss,mean_error_hit\n";
    for (const auto &p : table)
    {
        os << dimension << ',' << format_double(p.value) << ',' << p.summary.count << ','
           << format_double(p.summary.median) << ',' << format_double(p.summary.p90) << ','
           << format_double(p.summary.mean) << ',' << format_double(p.summary.pearson) << ','
           << format_double(p.miss_rate) << ',' << format_double(p.mean_error_miss) << ','
           << format_double(p.mean_error_hit) << '\n';
        std::cout << dimension << '=' << p.value << ": median " << p.summary.median << " m, p90 " << p.summary.p90
                  << " m\n";
        if (c.emit_cdf)
        {
            auto cdf = open_out(s, "cdf_" + dimension + "_" + format_double(p.value) + ".csv");
            csv::write_cdf(cdf, p.summary.sorted_errors);
        }
    }
    return 0;
}

int cmd_perturb(const Common &c, double wall_sigma, double low, double high, const std::string &output)
{
    auto s = prepare(c);
    const std::uint64_t seed = s.cfg.seeds.front();
    s.scenario.scene = perturb_scene(s.scenario.scene, {wall_sigma, low, high, seed});
    const auto path = s.cfg.out_dir / output;
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    os << dump_scene(s.scenario);
    std::cerr << "wrote " << path.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"rtpos: ray-tracing based outdoor positioning simulator"};
    app.require_subcommand(1);
    Common common;

    auto *trace = app.add_subcommand("trace", "Dump propagation paths per RRU and UE point");
    add_common(trace, common);

    auto *aoa = app.add_subcommand("aoa", "Estimate angle reports (MUSIC + CFAR)");
    add_common(aoa, common);

    std::string reports_path;
    bool localize_tracking = false;
    auto *localize = app.add_subcommand("localize", "Candidates, clusters and positions");
    add_common(localize, common);
    localize->add_option("--reports", reports_path, "Use angle reports from this CSV instead of estimating them");
    localize->add_flag("--tracking", localize_tracking, "Track the selected cluster center");

    std::optional<int> track_rru;
    bool track_elevation = false;
    auto *track = app.add_subcommand("track", "Multi-trend tracking of reported angles");
    add_common(track, common);
    track->add_option("--rru", track_rru, "Only this RRU");
    track->add_flag("--elevation", track_elevation, "Track elevation instead of azimuth");

    std::string dimension = "n_bs";
    std::vector<double> values;
    auto *sweep_cmd = app.add_subcommand("sweep", "Error statistics over a parameter grid");
    add_common(sweep_cmd, common);
    sweep_cmd->add_option("--dimension", dimension, "n_bs | calibration_sigma | perturbation")
        ->check(CLI::IsMember({"n_bs", "calibration_sigma", "perturbation"}));
    sweep_cmd->add_option("--values", values, "Grid values (defaults depend on the dimension)")->delimiter(',');

    double wall_sigma = 1.0, scale_low = 1.0, scale_high = 1.0;
    std::string perturb_out = "perturbed_scene.json";
    auto *perturb = app.add_subcommand("perturb", "Write a perturbed copy of the scene");
    add_common(perturb, common);
    perturb->add_option("--wall-sigma", wall_sigma, "Building shift sigma per axis, m");
    perturb->add_option("--scale-low", scale_low, "Lower material scale bound");
    perturb->add_option("--scale-high", scale_high, "Upper material scale bound");
    perturb->add_option("--output", perturb_out, "Output file name inside --out-dir");

    CLI11_PARSE(app, argc, argv);
    try
    {
        if (trace->parsed())
            return cmd_trace(common);
        if (aoa->parsed())
            return cmd_aoa(common);
        if (localize->parsed())
            return cmd_localize(common, reports_path, localize_tracking);
        if (track->parsed())
            return cmd_track(common, track_rru, track_elevation);
        if (sweep_cmd->parsed())
            return cmd_sweep(common, dimension, values);
        if (perturb->parsed())
            return cmd_perturb(common, wall_sigma, scale_low, scale_high, perturb_out);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
