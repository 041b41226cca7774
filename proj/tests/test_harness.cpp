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

#include "rtpos/csv_io.hpp"
#include "rtpos/harness.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

using namespace rtpos;

namespace {

// Flat ground with two sites that see every track point directly.
Scenario two_site_scenario()
{
    auto sc = load_scene(test::fixture("two_ray_flat.json"));
    RruConfig second = sc.rrus[0];
    second.id = 2;
    second.position = Vec3(120, 60, 25);
    second.rotation_azimuth = RruConfig::rotation_for_boresight(deg2rad(-120.0));
    sc.rrus.push_back(second);
    return sc;
}

ExperimentConfig quick_config()
{
    ExperimentConfig cfg;
    cfg.trace.ray_count = 4000;
    return cfg;
}

bool same_records(const PipelineOutputs &a, const PipelineOutputs &b)
{
    if (a.records.size() != b.records.size())
        return false;
    for (std::size_t i = 0; i < a.records.size(); ++i)
    {
        const auto &x = a.records[i], &y = b.records[i];
        if (x.estimate != y.estimate || x.error != y.error || x.miss != y.miss || x.candidate_count != y.candidate_count ||
            !(x.variance == y.variance || (std::isinf(x.variance) && std::isinf(y.variance))))
            return false;
    }
    return true;
}

} // namespace

TEST_SUITE("harness")
{
    TEST_CASE("order statistics without interpolation")
    {
        const std::vector<double> v{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
        CHECK(order_statistic(v, 0.5) == 5.0);
        CHECK(order_statistic(v, 0.9) == 9.0);
        CHECK(order_statistic(v, 1.0) == 10.0);
        CHECK(order_statistic(v, 0.05) == 1.0);
        CHECK(order_statistic({3.0}, 0.9) == 3.0);
        CHECK_THROWS(order_statistic({}, 0.5));
    }

    TEST_CASE("pearson correlation")
    {
        std::vector<double> e{1, 2, 3, 4, 5, 6}, v;
        for (double x : e)
            v.push_back(4.0 * x);
        CHECK(pearson_correlation(v, e) == doctest::Approx(1.0));
        std::vector<double> neg;
        for (double x : e)
            neg.push_back(-x);
        CHECK(pearson_correlation(neg, e) == doctest::Approx(-1.0));
        CHECK(std::isnan(pearson_correlation(std::vector<double>(6, 2.0), e)));

        std::mt19937_64 rng(7);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> x(10000), y(10000);
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            x[i] = n(rng);
            y[i] = n(rng);
        }
        CHECK(std::abs(pearson_correlation(x, y)) < 0.05);
    }

    TEST_CASE("summaries")
    {
        const std::vector<double> e{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        const auto s = summarize(e, e);
        CHECK(s.count == 10);
        CHECK(s.median == 5.0);
        CHECK(s.p90 == 9.0);
        CHECK(s.mean == doctest::Approx(5.5));
        CHECK(s.pearson == doctest::Approx(1.0));
        CHECK(s.sorted_errors.front() == 1.0);
        CHECK_THROWS(summarize(e, std::vector<double>{1.0, 2.0}));
        CHECK_THROWS(summarize(std::vector<double>{1.0}, std::vector<double>{1.0}));
        // unbounded variances (fallback positions) stay out of the correlation
        std::vector<double> v = e;
        v[3] = std::numeric_limits<double>::infinity();
        CHECK(summarize(e, v).pearson == doctest::Approx(1.0));
    }

    TEST_CASE("strongest sites")
    {
        const std::vector<int> ids{1, 2, 3, 4};
        const std::vector<double> p{0.5, 2.0, 0.0, 2.0};
        CHECK(strongest_rrus(ids, p, 5) == std::vector<int>{2, 4, 1});
        CHECK(strongest_rrus(ids, p, 2) == std::vector<int>{2, 4});
        CHECK(strongest_rrus(ids, p, 1) == std::vector<int>{2});
    }

    TEST_CASE("reversing a path")
    {
        PathComponent p;
        p.aoa_azimuth = 0.1;
        p.aoa_elevation = 0.2;
        p.aod_azimuth = 0.3;
        p.aod_elevation = 0.4;
        p.interactions = {Interaction{InteractionKind::reflection, {1, 0, 0}, 0, 5},
                          Interaction{InteractionKind::reflection, {2, 0, 0}, 0, 6}};
        p.complex_gain = {0.5, -0.1};
        const auto r = reverse_path(p);
        CHECK(r.aoa_azimuth == 0.3);
        CHECK(r.aoa_elevation == 0.4);
        CHECK(r.aod_azimuth == 0.1);
        CHECK(r.interactions.front().face_id == 6);
        CHECK(r.complex_gain == p.complex_gain);
    }

    TEST_CASE("experiment documents")
    {
        const auto cfg = parse_experiment(R"({
          "scene": "scene.json", "seeds": [3, 4], "calibration_sigma_deg": 1.0, "max_base_stations": 2,
          "strategy": "max_posterior", "interference": {"probability": 0.2, "power_db": -3},
          "perturbation": {"wall_sigma": 1.5, "transmission_low": 0.5, "transmission_high": 2.0},
          "trace": {"ray_count": 1000, "max_reflections": 2}, "aoa": {"cfar_threshold": 5},
          "tracker": {"p": 1.5}, "height_tolerance": -1, "max_samples": 7, "threads": 2
        })",
                                         "/data/exp");
        CHECK(cfg.scene_path == std::filesystem::path("/data/exp/scene.json"));
        CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
        CHECK(cfg.max_base_stations == 2);
        CHECK(cfg.strategy == PickStrategy::max_posterior);
        CHECK(cfg.interference_probability == 0.2);
        CHECK(cfg.interference_power_db == -3.0);
        CHECK(cfg.wall_sigma == 1.5);
        CHECK(cfg.transmission_scale_high == 2.0);
        CHECK(cfg.trace.ray_count == 1000);
        CHECK(cfg.trace.max_reflections == 2);
        CHECK(cfg.aoa.cfar.threshold == 5.0);
        CHECK(cfg.tracker.p == 1.5);
        CHECK_FALSE(cfg.height_tolerance);
        CHECK(cfg.max_samples == 7u);
        CHECK(cfg.threads == 2);

        const auto defaults = parse_experiment(R"({"scene": "/abs/s.json"})");
        CHECK(defaults.scene_path == std::filesystem::path("/abs/s.json"));
        CHECK(defaults.strategy == PickStrategy::combined);
        CHECK(defaults.max_base_stations == 5);

        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "sede": 3})"));
        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "trace": {"rays": 3}})"));
        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "max_base_stations": 0})"));
        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "seeds": []})"));
        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "strategy": "best"})"));
        CHECK_THROWS(parse_experiment(R"({"scene": "s.json", "snr_db": "high"})"));
        CHECK_THROWS(parse_experiment("{"));
    }

    TEST_CASE("sweep values map onto the config")
    {
        ExperimentConfig cfg;
        CHECK(with_sweep_value(cfg, SweepDimension::n_bs, 3).max_base_stations == 3);
        CHECK(with_sweep_value(cfg, SweepDimension::calibration_sigma, 3).calibration_sigma_deg == 3.0);
        CHECK(with_sweep_value(cfg, SweepDimension::perturbation, 2).wall_sigma == 2.0);
        CHECK(parse_dimension("n_bs") == SweepDimension::n_bs);
        CHECK(to_string(parse_dimension("perturbation")) == "perturbation");
        CHECK_THROWS(parse_dimension("snr"));
    }

    TEST_CASE("parallel loop covers every index and rethrows")
    {
        std::vector<std::atomic<int>> hits(257);
        parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
        for (auto &h : hits)
            CHECK(h.load() == 1);
        CHECK_THROWS_AS(parallel_for(50, 3,
                                     [](std::size_t i) {
                                         if (i == 17)
                                             throw std::runtime_error("boom");
                                     }),
                        std::runtime_error);
    }

    TEST_CASE("noise free reports from two sites are geometrically consistent")
    {
        const auto sc = two_site_scenario();
        auto cfg = quick_config();
        cfg.d_intersect = 1.0;
        PipelineOptions opt;
        opt.oracle_reports = true;
        const auto out = run_pipeline(sc, cfg, 1, nullptr, opt);
        REQUIRE(out.records.size() == sc.tracks[0].samples.size());
        for (const auto &r : out.records)
        {
            CHECK(r.rru_count == 2);
            CHECK_FALSE(r.fallback);
            CHECK(r.error < 0.1);
        }
    }

    TEST_CASE("pipeline is deterministic across repeats and thread counts")
    {
        const auto sc = load_scene(test::fixture("canyon.json"));
        auto cfg = quick_config();
        cfg.max_samples = 6;
        cfg.calibration_sigma_deg = 1.0;
        cfg.interference_probability = 0.3;
        const auto a = run_pipeline(sc, cfg, 11);
        const auto b = run_pipeline(sc, cfg, 11);
        cfg.threads = 3;
        const auto c = run_pipeline(sc, cfg, 11);
        CHECK(same_records(a, b));
        CHECK(same_records(a, c));
        cfg.threads = 1;
        const auto d = run_pipeline(sc, cfg, 12);
        CHECK_FALSE(same_records(a, d));
        for (const auto &r : a.records)
            CHECK(r.error == doctest::Approx((r.estimate - r.truth).norm()));
    }

    TEST_CASE("report override feeds the positioning stage")
    {
        const auto sc = two_site_scenario();
        auto cfg = quick_config();
        cfg.max_samples = 2;
        PipelineOptions opt;
        opt.oracle_reports = true;
        opt.keep_reports = true;
        const auto truth = run_pipeline(sc, cfg, 1, nullptr, opt);
        REQUIRE_FALSE(truth.reports.empty());

        std::stringstream csv;
        csv::write_reports_header(csv);
        for (const auto &r : truth.reports)
            csv::write_report(csv, r);
        const auto back = csv::read_reports(csv);
        REQUIRE(back.size() == truth.reports.size());
        std::map<std::pair<std::int64_t, int>, AngleReport> table;
        for (const auto &r : back)
            table[{r.tti, r.rru_id}] = r;
        PipelineOptions replay;
        replay.reports_override = &table;
        const auto again = run_pipeline(sc, cfg, 99, nullptr, replay);
        REQUIRE(again.records.size() == truth.records.size());
        for (std::size_t i = 0; i < again.records.size(); ++i)
            CHECK((again.records[i].estimate - truth.records[i].estimate).norm() < 1e-6);
    }

    TEST_CASE("csv helpers")
    {
        CHECK(csv::format_double(0.5) == "0.5");
        CHECK(csv::format_double(std::nan("")) == "nan");
        std::stringstream cdf;
        csv::write_cdf(cdf, std::vector<double>{3.0, 1.0, 2.0});
        std::string line, last;
        std::getline(cdf, line);
        CHECK(line == "value,cumulative_probability");
        std::getline(cdf, line);
        CHECK(line.rfind("1,", 0) == 0);
        while (std::getline(cdf, line))
            last = line;
        CHECK(last == "3,1");

        std::stringstream bad("tti,rru_id,az_deg,el_deg,power,width_az_deg,width_el_deg\n1,2,3\n");
        CHECK_THROWS_WITH(csv::read_reports(bad), doctest::Contains("line 2"));
    }

    TEST_CASE("selected points honour track filters and sample caps")
    {
        const auto sc = load_scene(test::fixture("canyon.json"));
        ExperimentConfig cfg;
        CHECK(selected_points(sc, cfg).size() == 203);
        cfg.max_samples = 10;
        const auto pts = selected_points(sc, cfg);
        REQUIRE(pts.size() == 10);
        CHECK(pts.back().tti == sc.tracks[0].samples[9].tti);
        cfg.track_ids = {42};
        CHECK_THROWS(selected_points(sc, cfg));
    }
}
