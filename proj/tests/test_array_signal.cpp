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

#include "rtpos/array_signal.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

using namespace rtpos;

namespace {

constexpr double kLambda = kSpeedOfLight / 3.5e9;

RruConfig panel(double boresight_deg = 0.0, double tilt_deg = 0.0)
{
    RruConfig r;
    r.position = Vec3(0, 0, 20);
    r.rotation_azimuth = RruConfig::rotation_for_boresight(deg2rad(boresight_deg));
    r.tilt = deg2rad(tilt_deg);
    r.spacing_h = kLambda / 2.0;
    r.spacing_v = kLambda / 2.0;
    return r;
}

PathComponent arrival(double az_deg, double el_deg, double amplitude = 1e-3, double delay = 1e-6)
{
    PathComponent p;
    p.aoa_azimuth = deg2rad(az_deg);
    p.aoa_elevation = deg2rad(el_deg);
    p.complex_gain = {amplitude, 0.0};
    p.delay = delay;
    p.path_length = delay * kSpeedOfLight;
    return p;
}

Impairments clean(double snr_db = 300.0)
{
    Impairments imp;
    imp.snr_db = snr_db;
    return imp;
}

// Singular values of the snapshot matrix relative to the largest.
Eigen::VectorXd relative_singular_values(const CMatrix &data)
{
    const Eigen::VectorXd s = Eigen::JacobiSVD<CMatrix>(data).singularValues();
    return s / s[0];
}

struct Max2
{
    double az, el, power;
};

// Strict local maxima of the spectrum over the 8-neighbourhood, strongest first.
std::vector<Max2> local_maxima(const AngularSpectrum &sp)
{
    std::vector<Max2> out;
    const auto &p = sp.power;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
        {
            bool best = true;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                {
                    const Eigen::Index a = i + di, e = j + dj;
                    if ((di || dj) && a >= 0 && a < p.rows() && e >= 0 && e < p.cols() && p(a, e) >= p(i, j))
                        best = false;
                }
            if (best)
                out.push_back({sp.azimuth[i], sp.elevation[j], p(i, j)});
        }
    std::sort(out.begin(), out.end(), [](const Max2 &a, const Max2 &b) { return a.power > b.power; });
    return out;
}

AngularSpectrum flat_spectrum(Eigen::Index na, Eigen::Index ne)
{
    AngularSpectrum sp;
    sp.azimuth = Eigen::VectorXd::LinSpaced(na, -0.5, 0.5);
    sp.elevation = Eigen::VectorXd::LinSpaced(ne, -0.3, 0.1);
    sp.power = Eigen::MatrixXd::Ones(na, ne);
    return sp;
}

} // namespace

TEST_SUITE("array_signal")
{
    TEST_CASE("steering vector elements")
    {
        const auto geom = ArrayGeometry::from(panel(20.0, 10.0));
        for (double az : {-1.0, 0.0, 0.3, 2.0})
            for (double el : {-0.5, 0.0, 0.2})
            {
                const CVector a = steering_vector(geom, az, el, kLambda);
                CHECK(a.size() == 32);
                CHECK(std::abs(a[0] - 1.0) < 1e-15);
                for (Eigen::Index m = 0; m < a.size(); ++m)
                    CHECK(std::abs(std::abs(a[m]) - 1.0) <= 1e-12);
            }
        Eigen::Matrix3Xd d(3, 2);
        d << 0.0, kLambda / 2.0, 0.0, 0.0, 0.0, 0.0;
        const auto a = steering_vector<double>(d, kPi / 2.0, 0.0, kLambda);
        CHECK(std::abs(a[1] - std::complex<double>(-1.0, 0.0)) < 1e-12);
    }

    TEST_CASE("panel displacements")
    {
        auto r = panel(0.0, 0.0);
        r.rotation_azimuth = 0.0;
        r.spacing_h = 0.04;
        r.spacing_v = 0.05;
        const auto g = ArrayGeometry::from(r);
        CHECK(g.displacements.col(0).norm() == 0.0);
        CHECK((g.displacements.col(1) - Vec3(0.04, 0, 0)).norm() < 1e-15);
        CHECK((g.displacements.col(8) - Vec3(0, 0, 0.05)).norm() < 1e-15);
        // a tilted panel leans its columns back, away from the boresight
        r.tilt = deg2rad(10.0);
        const auto t = ArrayGeometry::from(r);
        CHECK(t.displacements.col(8).norm() == doctest::Approx(0.05));
        CHECK(t.boresight_elevation == doctest::Approx(-deg2rad(10.0)));
        const Vec3 bore = direction_from_angles(t.boresight_azimuth, t.boresight_elevation);
        CHECK(std::abs(bore.dot(t.displacements.col(8))) < 1e-12);
        CHECK(std::abs(bore.dot(t.displacements.col(1))) < 1e-12);
    }

    TEST_CASE("sector element pattern")
    {
        ElementPattern p;
        CHECK(p.gain_db(0.0, 0.0) == doctest::Approx(8.0));
        CHECK(p.gain_db(deg2rad(65.0), 0.0) == doctest::Approx(8.0 - 12.0));
        CHECK(p.gain_db(0.0, deg2rad(-65.0)) == doctest::Approx(8.0 - 12.0));
        CHECK(p.gain_db(kPi, 0.0) == doctest::Approx(8.0 - 30.0));
        CHECK(p.gain_db(deg2rad(100.0), deg2rad(80.0)) == doctest::Approx(8.0 - 30.0));
        CHECK(p.amplitude(0.0, 0.0) == doctest::Approx(std::pow(10.0, 0.4)));
    }

    TEST_CASE("single path gives a rank one covariance along its steering vector")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(12.0, -4.0)}, r, clean(), 1, kLambda);
        const auto sv = relative_singular_values(snaps.data);
        CHECK(sv[1] < 1e-6);
        const Eigen::SelfAdjointEigenSolver<CMatrix> es(snaps.covariance());
        const CVector v = es.eigenvectors().rightCols(1);
        const CVector a = steering_vector(ArrayGeometry::from(r), deg2rad(12.0), deg2rad(-4.0), kLambda);
        CHECK(std::abs(v.dot(a)) / a.norm() == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("two delays decorrelate two paths")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(-10.0, -3.0, 1e-3, 1.0e-6), arrival(25.0, -6.0, 0.7e-3, 1.4e-6)},
                                                r, clean(), 2, kLambda);
        const auto sv = relative_singular_values(snaps.data);
        CHECK(sv[1] > 1e-2);
        CHECK(sv[2] < 1e-6);
    }

    TEST_CASE("noise only snapshots")
    {
        Impairments imp = clean(0.0);
        imp.noise_reference_power = 1.0;
        SnapshotConfig cfg;
        cfg.subcarriers = 320; // 32 x 320 samples
        const auto snaps = synthesize_snapshots({}, panel(), imp, 3, kLambda, cfg);
        CHECK(snaps.noise_variance == doctest::Approx(1.0));
        const double var = snaps.data.cwiseAbs2().mean();
        CHECK(std::abs(var - 1.0) <= 0.05);
        CHECK(std::abs(snaps.data.mean()) < 0.05);
    }

    TEST_CASE("snapshots are reproducible per seed")
    {
        Impairments imp = clean(10.0);
        imp.calibration_sigma_deg_3sigma = 3.0;
        imp.pointing_sigma_deg_3sigma = 1.0;
        const std::vector<PathComponent> paths{arrival(5.0, -2.0)};
        const auto a = synthesize_snapshots(paths, panel(), imp, 42, kLambda);
        const auto b = synthesize_snapshots(paths, panel(), imp, 42, kLambda);
        const auto c = synthesize_snapshots(paths, panel(), imp, 43, kLambda);
        CHECK(a.data == b.data);
        CHECK(a.data != c.data);
        CHECK(a.pointing_azimuth != 0.0);
        CHECK(a.pointing_azimuth != c.pointing_azimuth);

        // a fixed calibration seed pins the per-element phases across snapshot seeds
        imp.calibration_seed = 77;
        const auto d = synthesize_snapshots(paths, panel(), imp, 1, kLambda);
        const auto e = synthesize_snapshots(paths, panel(), imp, 2, kLambda);
        CHECK(d.calibration_phase == e.calibration_phase);
        CHECK(d.calibration_phase.cwiseAbs().maxCoeff() > 0.0);
        CHECK(d.calibration_phase.cwiseAbs().maxCoeff() < deg2rad(6.0));

        const auto f = synthesize_snapshots(paths, panel(), clean(), 1, kLambda);
        CHECK(f.calibration_phase.isZero());
        CHECK(f.pointing_azimuth == 0.0);
    }

    TEST_CASE("snapshot config validation")
    {
        SnapshotConfig cfg;
        cfg.subcarriers = 16;
        CHECK_THROWS(synthesize_snapshots({}, panel(), clean(), 0, kLambda, cfg));
        cfg.subcarriers = 5000;
        CHECK_THROWS(synthesize_snapshots({}, panel(), clean(), 0, kLambda, cfg));
        Impairments imp;
        imp.calibration_sigma_deg_3sigma = -1.0;
        CHECK_THROWS(synthesize_snapshots({}, panel(), imp, 0, kLambda));
    }

    TEST_CASE("music peaks on a noiseless source at a grid point")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(7.5, -5.0)}, r, clean(), 1, kLambda);
        const auto sp = music_spectrum(snaps, ArrayGeometry::from(r), 1, GridSpec{}, kLambda);
        Eigen::Index i, j;
        sp.power.maxCoeff(&i, &j);
        CHECK(rad2deg(sp.azimuth[i]) == doctest::Approx(7.5));
        CHECK(rad2deg(sp.elevation[j]) == doctest::Approx(-5.0));
        CHECK(sp.azimuth.size() == 241);
        CHECK(sp.elevation.size() == 81);
    }

    TEST_CASE("music spectrum is finite and positive with noise")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(-20.0, -8.0)}, r, clean(20.0), 9, kLambda);
        const auto sp = music_spectrum(snaps, ArrayGeometry::from(r), 1, GridSpec{}, kLambda);
        CHECK(sp.power.allFinite());
        CHECK(sp.power.minCoeff() > 0.0);
    }

    TEST_CASE("music is invariant to a global phase")
    {
        const auto r = panel();
        auto snaps = synthesize_snapshots({arrival(3.0, -1.0), arrival(-30.0, -9.0, 5e-4, 2e-6)}, r, clean(20.0), 4, kLambda);
        const SteeringTable table(ArrayGeometry::from(r), GridSpec{}, kLambda);
        const auto a = music_spectrum(snaps, table, 2);
        snaps.data *= std::polar(1.0, 1.234);
        const auto b = music_spectrum(snaps, table, 2);
        CHECK(((a.power - b.power).cwiseAbs().array() / a.power.array()).maxCoeff() < 1e-6);
    }

    TEST_CASE("music order errors")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(3.0, -1.0)}, r, clean(), 4, kLambda);
        const SteeringTable table(ArrayGeometry::from(r), GridSpec{}, kLambda);
        CHECK_THROWS_AS(music_spectrum(snaps, table, 32), MusicError);
        CHECK_THROWS_AS(music_spectrum(snaps, table, -1), MusicError);
        // noiseless rank one covariance cannot support three sources
        SnapshotSet exact = snaps;
        exact.data = CMatrix::Zero(32, 64);
        const CVector a = steering_vector(ArrayGeometry::from(r), 0.1, -0.05, kLambda);
        for (int s = 0; s < 64; ++s)
            exact.data.col(s) = a * std::polar(1.0, 0.3 * s);
        CHECK_THROWS_AS(music_spectrum(exact, table, 3), MusicError);
        CHECK_NOTHROW(music_spectrum(exact, table, 1));
    }

    TEST_CASE("music separates two sources ten degrees apart")
    {
        const auto r = panel();
        const SteeringTable table(ArrayGeometry::from(r), GridSpec{}, kLambda);
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed)
        {
            const std::vector<PathComponent> paths{arrival(0.0, -5.0, 1e-3, 1.0e-6), arrival(10.0, -5.0, 1e-3, 1.3e-6)};
            const auto snaps = synthesize_snapshots(paths, r, clean(20.0), seed, kLambda);
            const auto maxima = local_maxima(music_spectrum(snaps, table, 2));
            if (maxima.size() < 2)
                continue;
            const double a0 = rad2deg(std::min(maxima[0].az, maxima[1].az));
            const double a1 = rad2deg(std::max(maxima[0].az, maxima[1].az));
            const bool hit = std::abs(a0 - 0.0) <= 1.0 && std::abs(a1 - 10.0) <= 1.0 &&
                             std::abs(rad2deg(maxima[0].el) + 5.0) <= 1.0 && std::abs(rad2deg(maxima[1].el) + 5.0) <= 1.0;
            ok += hit;
        }
        CHECK(ok >= 95);
    }

    TEST_CASE("model order from the eigenvalue gap")
    {
        const auto r = panel();
        Impairments imp = clean(0.0);
        imp.noise_reference_power = 1.0;
        CHECK(estimate_model_order(synthesize_snapshots({}, r, imp, 1, kLambda)) == 0);
        const std::vector<PathComponent> three{arrival(-20, -3, 1e-3, 1.0e-6), arrival(0, -6, 1e-3, 1.3e-6),
                                               arrival(25, -2, 1e-3, 1.7e-6)};
        CHECK(estimate_model_order(synthesize_snapshots(three, r, clean(25.0), 1, kLambda)) == 3);
        CHECK(estimate_model_order(synthesize_snapshots(three, r, clean(25.0), 1, kLambda), 10.0, 2) == 2);
    }

    TEST_CASE("cfar on synthetic grids")
    {
        CfarConfig cfg;
        cfg.threshold = 10.0;
        auto sp = flat_spectrum(40, 30);
        CHECK(cfar_detect(sp, cfg).empty());

        sp.power(17, 11) = 100.0;
        auto peaks = cfar_detect(sp, cfg);
        REQUIRE(peaks.size() == 1);
        CHECK(peaks[0].azimuth == sp.azimuth[17]);
        CHECK(peaks[0].elevation == sp.elevation[11]);
        CHECK(peaks[0].peak_power == 100.0);

        sp.power(3, 25) = 60.0;
        peaks = cfar_detect(sp, cfg);
        REQUIRE(peaks.size() == 2);
        CHECK(peaks[0].peak_power == 100.0);
        CHECK(peaks[1].peak_power == 60.0);

        // a spike on the grid corner is tested against the in-grid part of its window
        sp.power(0, 0) = 50.0;
        CHECK(cfar_detect(sp, cfg).size() == 3);

        cfg.max_peaks = 1;
        CHECK(cfar_detect(sp, cfg).size() == 1);
    }

    TEST_CASE("cfar detections are scale invariant")
    {
        const auto r = panel();
        const auto snaps = synthesize_snapshots({arrival(10.0, -4.0), arrival(-25.0, -8.0, 8e-4, 1.6e-6)}, r, clean(20.0), 8,
                                                kLambda);
        auto sp = music_spectrum(snaps, ArrayGeometry::from(r), 2, GridSpec{}, kLambda);
        const auto a = cfar_detect(sp, CfarConfig{});
        sp.power *= 37.5;
        const auto b = cfar_detect(sp, CfarConfig{});
        REQUIRE(a.size() == b.size());
        CHECK_FALSE(a.empty());
        for (std::size_t k = 0; k < a.size(); ++k)
        {
            CHECK(a[k].azimuth == b[k].azimuth);
            CHECK(a[k].elevation == b[k].elevation);
        }
    }

    TEST_CASE("half power widths")
    {
        auto sp = flat_spectrum(41, 21);
        sp.azimuth = Eigen::VectorXd::LinSpaced(41, 0.0, 40.0);
        sp.elevation = Eigen::VectorXd::LinSpaced(21, 0.0, 20.0);
        sp.power.setConstant(0.01);
        // triangular ridge, half power one unit either side in azimuth
        sp.power(20, 10) = 100.0;
        sp.power(19, 10) = 25.0;
        sp.power(21, 10) = 25.0;
        const auto peaks = cfar_detect(sp, CfarConfig{});
        REQUIRE(peaks.size() == 1);
        // linear interpolation crosses 50 at 2/3 of the first step on each side
        CHECK(peaks[0].width_az == doctest::Approx(2.0 * 50.0 / 75.0));
        CHECK(peaks[0].width_el == doctest::Approx(2.0 * (100.0 - 50.0) / (100.0 - 0.01)));
    }

    TEST_CASE("estimate_aoa end to end")
    {
        const auto r = panel(30.0, 10.0);
        AoaConfig cfg;
        const auto strong = estimate_aoa(r, 5, {arrival(41.3, -12.2)}, clean(30.0), cfg, kLambda, 1);
        CHECK(strong.rru_id == r.id);
        CHECK(strong.tti == 5);
        REQUIRE(strong.peaks.size() == 1);
        CHECK(std::abs(rad2deg(strong.peaks[0].azimuth) - 41.3) <= 0.5);
        CHECK(std::abs(rad2deg(strong.peaks[0].elevation) + 12.2) <= 0.5);

        Impairments noise = clean(0.0);
        noise.noise_reference_power = 1.0;
        CHECK(estimate_aoa(r, 5, {}, noise, cfg, kLambda, 1).peaks.empty());
    }

    TEST_CASE("single source bias stays within one grid step")
    {
        const auto r = panel(0.0, 10.0);
        AoaConfig cfg;
        const SteeringTable table(ArrayGeometry::from(r), cfg.grid, kLambda);
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed)
        {
            const double az = -30.0 + 0.61 * static_cast<double>(seed);
            const double el = -20.0 + 0.17 * static_cast<double>(seed);
            const auto rep = estimate_aoa(r, 0, {arrival(az, el)}, clean(40.0), cfg, kLambda, seed, &table);
            if (rep.peaks.size() == 1 && std::abs(rad2deg(rep.peaks[0].azimuth) - az) <= 0.5 &&
                std::abs(rad2deg(rep.peaks[0].elevation) - el) <= 0.5)
                ++ok;
        }
        CHECK(ok == 100);
    }

    TEST_CASE("wrap angle")
    {
        CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
        CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
        CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
        CHECK(wrap_angle(0.25) == 0.25);
    }
}
