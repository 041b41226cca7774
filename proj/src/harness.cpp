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

#include "rtpos/harness.hpp"

#include "rtpos/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace rtpos {

namespace {

using Json = nlohmann::json;

class ConfigReader
{
  public:
    ConfigReader(const Json &obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            fail("expected an object");
    }

    ~ConfigReader() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0)
            return;
        for (const auto &item : obj_.items())
            if (!seen_.count(item.key()))
                throw std::invalid_argument("config: unknown key '" + where(item.key()) + "'");
    }

    template <typename T>
    void get(const std::string &key, T &out)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end())
            return;
        try
        {
            out = it->template get<T>();
        }
        catch (const Json::exception &)
        {
            throw std::invalid_argument("config: bad value for '" + where(key) + "'");
        }
    }

    void get_deg(const std::string &key, double &out_rad)
    {
        double deg = rad2deg(out_rad);
        get(key, deg);
        out_rad = deg2rad(deg);
    }

    const Json *child(const std::string &key)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string where(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  private:
    [[noreturn]] void fail(const std::string &msg) const
    {
        throw std::invalid_argument("config: " + (path_.empty() ? std::string("document") : path_) + ": " + msg);
    }

    const Json &obj_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace

void ExperimentConfig::validate() const
{
    if (seeds.empty())
        throw std::invalid_argument("config: seeds must be non-empty");
    if (max_base_stations < 1)
        throw std::invalid_argument("config: max_base_stations must be >= 1");
    if (calibration_sigma_deg < 0.0)
        throw std::invalid_argument("config: calibration_sigma_deg must be >= 0");
    if (interference_probability < 0.0 || interference_probability > 1.0)
        throw std::invalid_argument("config: interference probability must be in [0, 1]");
    if (!(d_intersect > 0.0))
        throw std::invalid_argument("config: d_intersect must be > 0");
    if (!(cluster.d_cluster > 0.0))
        throw std::invalid_argument("config: d_cluster must be > 0");
    if (!(miss.epsilon0 > 0.0))
        throw std::invalid_argument("config: epsilon0 must be > 0");
    if (threads < 1)
        throw std::invalid_argument("config: threads must be >= 1");
    if (center_buffer < 2)
        throw std::invalid_argument("config: center_buffer must be >= 2");
    PerturbationSpec{wall_sigma, transmission_scale_low, transmission_scale_high, 0}.validate();
    trace.validate();
    bias.validate();
    tracker.validate();
}

ExperimentConfig parse_experiment(const std::string &text, const std::filesystem::path &base_dir)
{
    Json doc;
    try
    {
        doc = Json::parse(text);
    }
    catch (const Json::parse_error &e)
    {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    {
        ConfigReader r(doc, "");
        std::string scene, strategy = to_string(cfg.strategy), out_dir;
        r.get("scene", scene);
        if (!scene.empty())
        {
            cfg.scene_path = scene;
            if (cfg.scene_path.is_relative() && !base_dir.empty())
                cfg.scene_path = base_dir / cfg.scene_path;
        }
        r.get("seeds", cfg.seeds);
        r.get("calibration_sigma_deg", cfg.calibration_sigma_deg);
        r.get("snr_db", cfg.snr_db);
        r.get("max_base_stations", cfg.max_base_stations);
        r.get("clustering", cfg.clustering);
        r.get("tracking", cfg.tracking);
        r.get("strategy", strategy);
        cfg.strategy = parse_strategy(strategy);
        r.get("d_intersect", cfg.d_intersect);
        r.get("d_cluster", cfg.cluster.d_cluster);
        r.get("epsilon0", cfg.miss.epsilon0);
        r.get("min_ray_count", cfg.min_ray_count);
        int max_refl = -1;
        r.get("filter_max_reflections", max_refl);
        if (max_refl >= 0)
            cfg.filter_max_reflections = max_refl;
        r.get("ue_height", cfg.ue_height);
        double height_tol = cfg.height_tolerance.value_or(-1.0);
        r.get("height_tolerance", height_tol);
        cfg.height_tolerance = height_tol >= 0.0 ? std::optional<double>(height_tol) : std::nullopt;
        r.get("tracks", cfg.track_ids);
        std::size_t max_samples = 0;
        r.get("max_samples", max_samples);
        if (max_samples > 0)
            cfg.max_samples = max_samples;
        r.get("threads", cfg.threads);
        r.get("center_buffer", cfg.center_buffer);
        r.get("out_dir", out_dir);
        if (!out_dir.empty())
            cfg.out_dir = out_dir;

        if (const Json *j = r.child("interference"))
        {
            ConfigReader c(*j, "interference");
            c.get("probability", cfg.interference_probability);
            c.get("power_db", cfg.interference_power_db);
        }
        if (const Json *j = r.child("perturbation"))
        {
            ConfigReader c(*j, "perturbation");
            c.get("wall_sigma", cfg.wall_sigma);
            c.get("transmission_low", cfg.transmission_scale_low);
            c.get("transmission_high", cfg.transmission_scale_high);
        }
        if (const Json *j = r.child("trace"))
        {
            ConfigReader c(*j, "trace");
            c.get("ray_count", cfg.trace.ray_count);
            c.get("max_reflections", cfg.trace.max_reflections);
            c.get("capture_radius_coefficient", cfg.trace.capture_radius_coefficient);
            c.get("min_path_gain_db", cfg.trace.min_path_gain_db);
            c.get("enable_scattering", cfg.trace.enable_scattering);
            c.get("enable_diffraction", cfg.trace.enable_diffraction);
            c.get("scattering_tile_size", cfg.trace.scattering_tile_size);
        }
        if (const Json *j = r.child("bias"))
        {
            ConfigReader c(*j, "bias");
            c.get_deg("max_bias_deg", cfg.bias.max_bias);
            c.get("grid_steps", cfg.bias.grid_steps);
            c.get_deg("min_peak_width_deg", cfg.bias.min_peak_width);
            c.get("max_reflections", cfg.bias.max_reflections);
        }
        if (const Json *j = r.child("aoa"))
        {
            ConfigReader c(*j, "aoa");
            c.get("subcarriers", cfg.aoa.snapshots.subcarriers);
            c.get("cfar_threshold", cfg.aoa.cfar.threshold);
            c.get("cfar_window_az", cfg.aoa.cfar.window_az);
            c.get("cfar_window_el", cfg.aoa.cfar.window_el);
            c.get("cfar_guard", cfg.aoa.cfar.guard);
            c.get_deg("grid_az_half_width_deg", cfg.aoa.grid.az_half_width);
            c.get_deg("grid_az_step_deg", cfg.aoa.grid.az_step);
            c.get_deg("grid_el_min_deg", cfg.aoa.grid.el_min);
            c.get_deg("grid_el_max_deg", cfg.aoa.grid.el_max);
            c.get_deg("grid_el_step_deg", cfg.aoa.grid.el_step);
            c.get("order_factor", cfg.aoa.order_factor);
            c.get("max_order", cfg.aoa.max_order);
            c.get("limit_peaks_to_order", cfg.aoa.limit_peaks_to_order);
        }
        if (const Json *j = r.child("tracker"))
        {
            ConfigReader c(*j, "tracker");
            c.get("p", cfg.tracker.p);
            c.get("buffer_max", cfg.tracker.buffer_max);
            c.get("max_idle_ttis", cfg.tracker.max_idle_ttis);
            c.get_deg("merge_threshold_deg", cfg.tracker.merge_threshold);
            c.get_deg("deviation_ceiling_deg", cfg.tracker.deviation_ceiling);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment(ss.str(), path.parent_path());
}

std::vector<UePoint> selected_points(const Scenario &scenario, const ExperimentConfig &cfg)
{
    std::vector<UePoint> out;
    for (const auto &track : scenario.tracks)
    {
        if (!cfg.track_ids.empty() &&
            std::find(cfg.track_ids.begin(), cfg.track_ids.end(), track.id) == cfg.track_ids.end())
            continue;
        std::size_t n = track.samples.size();
        if (cfg.max_samples)
            n = std::min(n, *cfg.max_samples);
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({track.id, track.samples[i].tti, track.samples[i].position});
    }
    for (int id : cfg.track_ids)
        if (std::none_of(scenario.tracks.begin(), scenario.tracks.end(), [&](const auto &t) { return t.id == id; }))
            throw std::invalid_argument("config: unknown track id " + std::to_string(id));
    return out;
}

PathComponent reverse_path(const PathComponent &p)
{
    PathComponent r = p;
    std::swap(r.aoa_azimuth, r.aod_azimuth);
    std::swap(r.aoa_elevation, r.aod_elevation);
    std::reverse(r.interactions.begin(), r.interactions.end());
    return r;
}

TraceCache build_trace_cache(const Scenario &scenario, std::span<const UePoint> points, const TraceConfig &cfg)
{
    TraceCache cache;
    std::vector<Vec3> receivers;
    receivers.reserve(points.size());
    for (const auto &p : points)
        receivers.push_back(p.position);
    for (const auto &rru : scenario.rrus)
    {
        cache.rru_ids.push_back(rru.id);
        auto lists = trace_paths(scenario.scene, rru.position, receivers, cfg);
        for (auto &list : lists)
            for (auto &p : list)
                p = reverse_path(p);
        cache.paths.push_back(std::move(lists));
    }
    return cache;
}

std::vector<int> strongest_rrus(const std::vector<int> &rru_ids, const std::vector<double> &powers, int n_bs)
{
    std::vector<std::size_t> order(rru_ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (powers[a] != powers[b])
            return powers[a] > powers[b];
        return rru_ids[a] < rru_ids[b];
    });
    std::vector<int> out;
    for (std::size_t k = 0; k < order.size() && static_cast<int>(out.size()) < n_bs; ++k)
        if (powers[order[k]] > 0.0)
            out.push_back(rru_ids[order[k]]);
    return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn)
{
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
            {
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

namespace {

AngleReport oracle_report(const RruConfig &rru, std::int64_t tti, const std::vector<PathComponent> &paths,
                          double width)
{
    AngleReport r{rru.id, tti, {}};
    for (const auto &p : paths)
        r.peaks.push_back({p.aoa_azimuth, p.aoa_elevation, p.power(), width, width});
    std::stable_sort(r.peaks.begin(), r.peaks.end(),
                     [](const AnglePeak &a, const AnglePeak &b) { return a.peak_power > b.peak_power; });
    return r;
}

struct SampleResult
{
    TtiRecord record;
    std::vector<AngleReport> reports;
    std::vector<PositionCandidate> candidates;
    std::vector<Cluster> clusters;
};

} // namespace

PipelineOutputs run_pipeline(const Scenario &scenario, const ExperimentConfig &cfg_in, std::uint64_t seed,
                             const TraceCache *cache, const PipelineOptions &options)
{
    ExperimentConfig cfg = cfg_in;
    cfg.trace.carrier_frequency = scenario.carrier_frequency;
    cfg.validate();
    const double lambda = scenario.wavelength();
    const auto points = selected_points(scenario, cfg);

    std::optional<TraceCache> local_cache;
    if (!cache)
        cache = &local_cache.emplace(build_trace_cache(scenario, points, cfg.trace));
    if (cache->rru_ids.size() != scenario.rrus.size())
        throw std::invalid_argument("trace cache does not match the scenario");
    for (const auto &lists : cache->paths)
        if (lists.size() != points.size())
            throw std::invalid_argument("trace cache does not match the selected points");

    // Map used by the positioning stage.
    std::optional<SceneModel> perturbed;
    if (cfg.wall_sigma > 0.0 || cfg.transmission_scale_low != 1.0 || cfg.transmission_scale_high != 1.0)
        perturbed.emplace(perturb_scene(scenario.scene,
                                        {cfg.wall_sigma, cfg.transmission_scale_low, cfg.transmission_scale_high,
                                         mix_seed({seed, 0x3a9u})}));
    const SceneModel &map = perturbed ? *perturbed : scenario.scene;

    std::vector<SteeringTable> tables;
    const bool estimate = !options.oracle_reports && !options.reports_override;
    if (estimate)
        for (const auto &rru : scenario.rrus)
            tables.emplace_back(ArrayGeometry::from(rru), cfg.aoa.grid, lambda);

    Vec3 centroid = Vec3::Zero();
    for (const auto &rru : scenario.rrus)
        centroid += rru.position;
    centroid /= static_cast<double>(std::max<std::size_t>(scenario.rrus.size(), 1));
    centroid.z() = cfg.ue_height;

    FilterPolicy policy;
    policy.min_ray_count = cfg.min_ray_count;
    policy.max_reflections = cfg.filter_max_reflections;
    if (cfg.height_tolerance)
        policy.predicates.push_back([h = cfg.ue_height, tol = *cfg.height_tolerance](const PositionCandidate &c) {
            return std::abs(c.position.z() - h) <= tol;
        });

    std::vector<SampleResult> results(points.size());
    parallel_for(points.size(), cfg.threads, [&](std::size_t s) {
        const UePoint &pt = points[s];
        SampleResult &res = results[s];
        TtiRecord &rec = res.record;
        rec.track_id = pt.track_id;
        rec.tti = pt.tti;
        rec.truth = pt.position;
        const std::uint64_t tti_seed =
            mix_seed({seed, static_cast<std::uint64_t>(pt.track_id), static_cast<std::uint64_t>(pt.tti)});

        std::vector<double> powers(scenario.rrus.size(), 0.0);
        for (std::size_t k = 0; k < scenario.rrus.size(); ++k)
            for (const auto &p : cache->paths[k][s])
                powers[k] += p.power();
        const auto chosen = strongest_rrus(cache->rru_ids, powers, cfg.max_base_stations);
        rec.rru_count = chosen.size();

        std::vector<AngleReport> reports;
        for (int id : chosen)
        {
            const auto k = static_cast<std::size_t>(
                std::find(cache->rru_ids.begin(), cache->rru_ids.end(), id) - cache->rru_ids.begin());
            const RruConfig &rru = scenario.rrus[k];
            const auto &paths = cache->paths[k][s];
            if (options.reports_override)
            {
                const auto it = options.reports_override->find({pt.tti, id});
                if (it != options.reports_override->end())
                    reports.push_back(it->second);
                continue;
            }
            if (options.oracle_reports)
            {
                reports.push_back(oracle_report(rru, pt.tti, paths, cfg.bias.min_peak_width));
                continue;
            }
            const std::uint64_t rru_seed = mix_seed({tti_seed, static_cast<std::uint64_t>(id)});
            Impairments imp;
            imp.snr_db = cfg.snr_db;
            imp.calibration_sigma_deg_3sigma = cfg.calibration_sigma_deg;
            imp.pointing_sigma_deg_3sigma = cfg.calibration_sigma_deg;
            imp.calibration_seed = mix_seed({seed, static_cast<std::uint64_t>(id), 0xca1u});
            if (cfg.interference_probability > 0.0)
            {
                Rng rng(mix_seed({rru_seed, 0x1f7u}));
                std::uniform_real_distribution<double> u(0.0, 1.0);
                if (u(rng) < cfg.interference_probability)
                {
                    const double az = rru.boresight_azimuth() + (2.0 * u(rng) - 1.0) * cfg.aoa.grid.az_half_width;
                    const double el = deg2rad(-30.0 + 28.0 * u(rng));
                    imp.interference.push_back({wrap_angle(az), el, cfg.interference_power_db});
                }
            }
            reports.push_back(estimate_aoa(rru, pt.tti, paths, imp, cfg.aoa, lambda, rru_seed, &tables[k]));
        }
        for (const auto &r : reports)
            rec.peak_count += r.peaks.size();

        std::vector<PositionCandidate> candidates;
        if (!reports.empty())
        {
            const auto rays = ray_search(reports, map, scenario.rrus, cfg.bias);
            candidates = filter_candidates(intersect_rays(rays, cfg.ue_height, cfg.d_intersect, map.bounds()), policy);
        }
        rec.candidate_count = candidates.size();

        if (candidates.empty())
        {
            rec.fallback = true;
            rec.miss = true;
            rec.variance = std::numeric_limits<double>::infinity();
        }
        else if (cfg.clustering)
        {
            res.clusters = cluster_candidates(candidates, cfg.cluster);
            rec.cluster_count = res.clusters.size();
            const Cluster &main = select_cluster(res.clusters);
            rec.estimate = pick_position(main, candidates, cfg.strategy);
            rec.cluster_variance = main.variance;
        }
        else
            rec.estimate = expected_position(candidates);
        if (!candidates.empty())
        {
            // spread of every surviving candidate, with or without clustering
            rec.variance = weighted_variance(candidates);
            rec.miss = detect_miss(candidates, cfg.miss);
        }
        if (options.keep_reports)
            res.reports = std::move(reports);
        if (options.keep_candidates)
            res.candidates = std::move(candidates);
    });

    // Sequential pass per track: fallback positions and optional center tracking.
    std::map<int, std::optional<Vec3>> previous;
    std::map<int, CenterTracker> trackers;
    TrackerConfig center_cfg = cfg.tracker;
    center_cfg.buffer_max = cfg.center_buffer;
    PipelineOutputs out;
    for (auto &res : results)
    {
        TtiRecord &rec = res.record;
        auto &prev = previous[rec.track_id];
        if (cfg.tracking)
        {
            auto it = trackers.try_emplace(rec.track_id, center_cfg).first;
            CenterTracker &tr = it->second;
            if (!rec.miss)
            {
                tr.update(rec.tti, rec.estimate);
                rec.estimate = tr.predict(rec.tti).value_or(rec.estimate);
            }
            else if (const auto pred = tr.predict(rec.tti))
            {
                rec.estimate = *pred;
                rec.fallback = rec.fallback || rec.candidate_count == 0;
            }
            else if (rec.candidate_count == 0)
                rec.estimate = prev.value_or(centroid);
        }
        else if (rec.candidate_count == 0)
            rec.estimate = prev.value_or(centroid);
        prev = rec.estimate;
        rec.error = (rec.estimate - rec.truth).norm();
        out.records.push_back(rec);
        for (auto &r : res.reports)
            out.reports.push_back(std::move(r));
        if (options.keep_candidates)
        {
            out.candidates.push_back(std::move(res.candidates));
            out.clusters.push_back(std::move(res.clusters));
        }
    }
    return out;
}

double order_statistic(std::vector<double> values, double q)
{
    if (values.empty())
        throw std::invalid_argument("order statistic of an empty set");
    if (!(q > 0.0 && q <= 1.0))
        throw std::invalid_argument("quantile must be in (0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    // Smallest k with k / n >= q, guarded against rounding in q * n.
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    return values[k - 1];
}

double pearson_correlation(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

ErrorSummary summarize(std::span<const double> errors, std::span<const double> variances)
{
    if (errors.size() != variances.size())
        throw std::invalid_argument("summarize: length mismatch");
    if (errors.size() < 2)
        throw std::invalid_argument("summarize: need at least 2 samples");
    ErrorSummary s;
    s.count = errors.size();
    s.sorted_errors.assign(errors.begin(), errors.end());
    std::sort(s.sorted_errors.begin(), s.sorted_errors.end());
    s.median = order_statistic(s.sorted_errors, 0.5);
    s.p90 = order_statistic(s.sorted_errors, 0.9);
    s.mean = std::accumulate(s.sorted_errors.begin(), s.sorted_errors.end(), 0.0) / static_cast<double>(s.count);
    // Infinite variances (no candidates) carry no ordering information for the correlation.
    std::vector<double> v, e;
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (std::isfinite(variances[i]))
        {
            v.push_back(variances[i]);
            e.push_back(errors[i]);
        }
    s.pearson = pearson_correlation(v, e);
    return s;
}

SweepDimension parse_dimension(const std::string &name)
{
    if (name == "n_bs")
        return SweepDimension::n_bs;
    if (name == "calibration_sigma")
        return SweepDimension::calibration_sigma;
    if (name == "perturbation")
        return SweepDimension::perturbation;
    throw std::invalid_argument("unknown sweep dimension '" + name + "'");
}

std::string to_string(SweepDimension d)
{
    switch (d)
    {
    case SweepDimension::n_bs:
        return "n_bs";
    case SweepDimension::calibration_sigma:
        return "calibration_sigma";
    case SweepDimension::perturbation:
        return "perturbation";
    }
    return "";
}

ExperimentConfig with_sweep_value(ExperimentConfig cfg, SweepDimension dim, double value)
{
    switch (dim)
    {
    case SweepDimension::n_bs:
        if (value < 1.0 || value != std::floor(value))
            throw std::invalid_argument("n_bs sweep values must be positive integers");
        cfg.max_base_stations = static_cast<int>(value);
        break;
    case SweepDimension::calibration_sigma:
        cfg.calibration_sigma_deg = value;
        break;
    case SweepDimension::perturbation:
        cfg.wall_sigma = value;
        break;
    }
    return cfg;
}

std::vector<SweepPoint> sweep(const Scenario &scenario, const ExperimentConfig &cfg, SweepDimension dim,
                              const std::vector<double> &values)
{
    if (values.empty())
        throw std::invalid_argument("sweep: no values");
    ExperimentConfig base = cfg;
    base.trace.carrier_frequency = scenario.carrier_frequency;
    base.validate();
    const auto points = selected_points(scenario, base);
    const TraceCache cache = build_trace_cache(scenario, points, base.trace);

    std::vector<SweepPoint> out;
    for (double value : values)
    {
        const ExperimentConfig run_cfg = with_sweep_value(base, dim, value);
        std::vector<double> errors, variances, miss_err, hit_err;
        for (auto seed : run_cfg.seeds)
        {
            const auto run = run_pipeline(scenario, run_cfg, seed, &cache);
            for (const auto &r : run.records)
            {
                errors.push_back(r.error);
                variances.push_back(r.variance);
                (r.miss ? miss_err : hit_err).push_back(r.error);
            }
        }
        SweepPoint pt;
        pt.value = value;
        pt.summary = summarize(errors, variances);
        pt.miss_rate = static_cast<double>(miss_err.size()) / static_cast<double>(errors.size());
        const auto mean = [](const std::vector<double> &v) {
            return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        pt.mean_error_miss = mean(miss_err);
        pt.mean_error_hit = mean(hit_err);
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace rtpos
