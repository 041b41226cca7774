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

#include "rtpos/array_signal.hpp"
#include "rtpos/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

namespace rtpos {

double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi)
        a += 2.0 * kPi;
    return a;
}

ArrayGeometry ArrayGeometry::from(const RruConfig &rru)
{
    rru.validate();
    ArrayGeometry g;
    g.displacements.resize(3, rru.rows * rru.columns);
    const double ch = std::cos(rru.rotation_azimuth), sh = std::sin(rru.rotation_azimuth);
    const double cv = std::cos(rru.tilt), sv = std::sin(rru.tilt);
    for (int iv = 0; iv < rru.rows; ++iv)
        for (int ih = 0; ih < rru.columns; ++ih)
        {
            const double h = ih * rru.spacing_h;
            const double v = iv * rru.spacing_v;
            g.displacements.col(iv * rru.columns + ih) << h * ch + v * sh * sv, h * sh - v * ch * sv, v * cv;
        }
    g.boresight_azimuth = rru.boresight_azimuth();
    g.boresight_elevation = -rru.tilt;
    return g;
}

double ElementPattern::gain_db(double az_offset, double el_offset) const
{
    const double az = rad2deg(wrap_angle(az_offset));
    const double el = rad2deg(el_offset);
    const double a_h = -std::min(12.0 * std::pow(az / beamwidth_az_deg, 2), front_to_back_db);
    const double a_v = -std::min(12.0 * std::pow(el / beamwidth_el_deg, 2), front_to_back_db);
    return max_gain_dbi - std::min(-(a_h + a_v), front_to_back_db);
}

// ---------------------------------------------------------------------------------------------
// Snapshots

double SnapshotConfig::subcarrier_offset_hz(int s) const
{
    const double tone = std::floor((s + 0.5) * srs_tones / static_cast<double>(subcarriers)) - 0.5 * srs_tones;
    return tone * tone_spacing_hz;
}

void SnapshotConfig::validate(Eigen::Index elements) const
{
    if (subcarriers < elements)
        throw std::invalid_argument("snapshot count must be >= element count");
    if (subcarriers > srs_tones)
        throw std::invalid_argument("snapshot count exceeds the available SRS tones");
    if (!(tone_spacing_hz > 0.0))
        throw std::invalid_argument("tone spacing must be > 0");
}

SnapshotSet synthesize_snapshots(const std::vector<PathComponent> &paths, const RruConfig &rru,
                                 const Impairments &imp, std::uint64_t rng_seed, double lambda,
                                 const SnapshotConfig &cfg, const ElementPattern &pattern)
{
    const ArrayGeometry geom = ArrayGeometry::from(rru);
    const Eigen::Index n = geom.size();
    cfg.validate(n);
    if (imp.calibration_sigma_deg_3sigma < 0.0 || imp.pointing_sigma_deg_3sigma < 0.0)
        throw std::invalid_argument("calibration sigma must be >= 0");
    const int s_count = cfg.subcarriers;

    SnapshotSet out;
    out.data = CMatrix::Zero(n, s_count);

    if (imp.pointing_sigma_deg_3sigma > 0.0)
    {
        Rng point_rng(mix_seed({rng_seed, 0xb1a5u}));
        std::normal_distribution<double> err(0.0, deg2rad(imp.pointing_sigma_deg_3sigma) / 3.0);
        out.pointing_azimuth = err(point_rng);
        out.pointing_elevation = err(point_rng);
    }

    double signal_power = 0.0;
    for (const auto &p : paths)
    {
        const double az = p.aoa_azimuth + out.pointing_azimuth;
        const double el = p.aoa_elevation + out.pointing_elevation;
        const double amp = pattern.amplitude(az - geom.boresight_azimuth, el - geom.boresight_elevation);
        const std::complex<double> g = p.complex_gain * amp;
        signal_power += std::norm(g);
        const CVector a = steering_vector(geom, az, el, lambda);
        for (int s = 0; s < s_count; ++s)
        {
            const std::complex<double> x = std::polar(1.0, -2.0 * kPi * cfg.subcarrier_offset_hz(s) * p.delay);
            out.data.col(s) += (g * x) * a;
        }
    }

    const double reference = imp.noise_reference_power > 0.0 ? imp.noise_reference_power
                             : signal_power > 0.0          ? signal_power
                                                           : 1.0;
    out.noise_variance = reference / std::pow(10.0, imp.snr_db / 10.0);

    Rng rng(mix_seed({rng_seed, 0x5a7u}));
    std::uniform_real_distribution<double> phase(-kPi, kPi);
    for (const auto &src : imp.interference)
    {
        const double amp = std::sqrt(reference * std::pow(10.0, src.relative_power_db / 10.0)) *
                           pattern.amplitude(src.azimuth - geom.boresight_azimuth, src.elevation - geom.boresight_elevation);
        const CVector a = steering_vector(geom, src.azimuth, src.elevation, lambda);
        for (int s = 0; s < s_count; ++s)
            out.data.col(s) += std::polar(amp, phase(rng)) * a;
    }

    std::normal_distribution<double> noise(0.0, std::sqrt(out.noise_variance / 2.0));
    for (int s = 0; s < s_count; ++s)
        for (Eigen::Index m = 0; m < n; ++m)
            out.data(m, s) += std::complex<double>(noise(rng), noise(rng));

    out.calibration_phase = Eigen::VectorXd::Zero(n);
    if (imp.calibration_sigma_deg_3sigma > 0.0)
    {
        Rng cal_rng(imp.calibration_seed ? *imp.calibration_seed : mix_seed({rng_seed, 0xca1u}));
        std::normal_distribution<double> err(0.0, deg2rad(imp.calibration_sigma_deg_3sigma) / 3.0);
        for (Eigen::Index m = 0; m < n; ++m)
            out.calibration_phase[m] = err(cal_rng);
        for (Eigen::Index m = 0; m < n; ++m)
            out.data.row(m) *= std::polar(1.0, out.calibration_phase[m]);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// MUSIC

Eigen::VectorXd GridSpec::azimuths(double boresight_azimuth) const
{
    const int half = static_cast<int>(std::lround(az_half_width / az_step));
    Eigen::VectorXd az(2 * half + 1);
    for (int i = -half; i <= half; ++i)
        az[i + half] = boresight_azimuth + i * az_step;
    return az;
}

Eigen::VectorXd GridSpec::elevations() const
{
    const int count = static_cast<int>(std::lround((el_max - el_min) / el_step)) + 1;
    Eigen::VectorXd el(count);
    for (int i = 0; i < count; ++i)
        el[i] = el_min + i * el_step;
    return el;
}

SteeringTable::SteeringTable(const ArrayGeometry &geom, const GridSpec &grid, double lambda)
    : azimuth_(grid.azimuths(geom.boresight_azimuth)), elevation_(grid.elevations())
{
    vectors_.resize(geom.size(), azimuth_.size() * elevation_.size());
    for (Eigen::Index j = 0; j < elevation_.size(); ++j)
        for (Eigen::Index i = 0; i < azimuth_.size(); ++i)
            vectors_.col(j * azimuth_.size() + i) = steering_vector(geom, azimuth_[i], elevation_[j], lambda);
}

AngularSpectrum music_spectrum(const SnapshotSet &snapshots, const SteeringTable &table, int model_order)
{
    const Eigen::Index n = snapshots.data.rows();
    if (model_order < 0 || model_order >= n)
        throw MusicError("model order must be in [0, element count)");
    if (table.vectors().rows() != n)
        throw MusicError("steering table does not match the array size");

    const CMatrix r = snapshots.covariance();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
    const Eigen::VectorXd &ev = es.eigenvalues(); // ascending
    const double top = ev[n - 1];
    const Eigen::Index rank = (ev.array() > 1e-12 * std::max(top, 1e-300)).count();
    if (model_order > rank)
        throw MusicError("model order exceeds the covariance rank");

    // |V_n^H a|^2 = |a|^2 - |V_s^H a|^2 for the orthonormal eigenbasis; the signal side is cheaper.
    Eigen::VectorXd denom = table.vectors().colwise().squaredNorm().transpose();
    if (model_order > 0)
    {
        const CMatrix signal = es.eigenvectors().rightCols(model_order);
        const CMatrix proj = signal.adjoint() * table.vectors();
        denom -= proj.colwise().squaredNorm().transpose();
    }

    AngularSpectrum sp;
    sp.azimuth = table.azimuth();
    sp.elevation = table.elevation();
    sp.power.resize(sp.azimuth.size(), sp.elevation.size());
    const double floor = 1e-15 * static_cast<double>(n);
    for (Eigen::Index j = 0; j < sp.elevation.size(); ++j)
        for (Eigen::Index i = 0; i < sp.azimuth.size(); ++i)
            sp.power(i, j) = 1.0 / std::max(denom[j * sp.azimuth.size() + i], floor);
    return sp;
}

AngularSpectrum music_spectrum(const SnapshotSet &snapshots, const ArrayGeometry &geom, int model_order,
                               const GridSpec &grid, double lambda)
{
    return music_spectrum(snapshots, SteeringTable(geom, grid, lambda), model_order);
}

int estimate_model_order(const SnapshotSet &snapshots, double factor, int cap)
{
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<CMatrix>(snapshots.covariance(), Eigen::EigenvaluesOnly).eigenvalues();
    const int above = static_cast<int>((ev.array() > factor * snapshots.noise_variance).count());
    return std::min({above, cap, static_cast<int>(snapshots.data.rows()) - 1});
}

// ---------------------------------------------------------------------------------------------
// CA-CFAR

namespace {

// Interpolated half-power crossing distance from index `at`, walking in direction `dir`.
double half_power_extent(const Eigen::MatrixXd &p, Eigen::Index i, Eigen::Index j, bool along_az, int dir,
                         const Eigen::VectorXd &axis)
{
    const double half = 0.5 * p(i, j);
    const Eigen::Index n = along_az ? p.rows() : p.cols();
    Eigen::Index k = along_az ? i : j;
    const Eigen::Index start = k;
    while (true)
    {
        const Eigen::Index next = k + dir;
        if (next < 0 || next >= n)
            return std::abs(axis[k] - axis[start]);
        const double vk = along_az ? p(k, j) : p(i, k);
        const double vn = along_az ? p(next, j) : p(i, next);
        if (vn < half)
        {
            const double frac = (vk - half) / (vk - vn);
            return std::abs(axis[k] + frac * (axis[next] - axis[k]) - axis[start]);
        }
        k = next;
    }
}

} // namespace

std::vector<AnglePeak> cfar_detect(const AngularSpectrum &spectrum, const CfarConfig &cfg)
{
    const Eigen::MatrixXd &p = spectrum.power;
    const Eigen::Index na = p.rows(), ne = p.cols();
    if (!(cfg.threshold > 0.0))
        throw std::invalid_argument("CFAR threshold must be > 0");
    if (cfg.window_az > na || cfg.window_el > ne)
        throw std::invalid_argument("CFAR window larger than the spectrum grid");
    const int ha = cfg.window_az / 2, he = cfg.window_el / 2;

    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> flagged(na, ne);
    for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index j = 0; j < ne; ++j)
        {
            double sum = 0.0;
            int count = 0;
            for (Eigen::Index di = -ha; di <= ha; ++di)
                for (Eigen::Index dj = -he; dj <= he; ++dj)
                {
                    if (std::abs(di) <= cfg.guard && std::abs(dj) <= cfg.guard)
                        continue;
                    // the window is truncated at the grid border
                    const Eigen::Index a = i + di, e = j + dj;
                    if (a < 0 || a >= na || e < 0 || e >= ne)
                        continue;
                    sum += p(a, e);
                    ++count;
                }
            flagged(i, j) = count > 0 && p(i, j) > cfg.threshold * sum / count;
        }

    std::vector<AnglePeak> peaks;
    for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index j = 0; j < ne; ++j)
        {
            if (!flagged(i, j))
                continue;
            bool is_max = true;
            for (Eigen::Index di = -1; di <= 1 && is_max; ++di)
                for (Eigen::Index dj = -1; dj <= 1; ++dj)
                {
                    const Eigen::Index a = i + di, e = j + dj;
                    if ((di == 0 && dj == 0) || a < 0 || a >= na || e < 0 || e >= ne)
                        continue;
                    // ties resolve to the earlier cell
                    const bool earlier = dj < 0 || (dj == 0 && di < 0);
                    if (p(a, e) > p(i, j) || (earlier && p(a, e) == p(i, j)))
                    {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max)
                continue;
            AnglePeak pk;
            pk.azimuth = wrap_angle(spectrum.azimuth[i]);
            pk.elevation = spectrum.elevation[j];
            pk.peak_power = p(i, j);
            pk.width_az = half_power_extent(p, i, j, true, -1, spectrum.azimuth) + half_power_extent(p, i, j, true, +1, spectrum.azimuth);
            pk.width_el = half_power_extent(p, i, j, false, -1, spectrum.elevation) + half_power_extent(p, i, j, false, +1, spectrum.elevation);
            peaks.push_back(pk);
        }
    std::stable_sort(peaks.begin(), peaks.end(), [](const AnglePeak &a, const AnglePeak &b) { return a.peak_power > b.peak_power; });
    if (cfg.max_peaks > 0 && peaks.size() > cfg.max_peaks)
        peaks.resize(cfg.max_peaks);
    return peaks;
}

AngleReport estimate_aoa(const RruConfig &rru, std::int64_t tti, const std::vector<PathComponent> &paths,
                         const Impairments &impairments, const AoaConfig &cfg, double lambda, std::uint64_t rng_seed,
                         const SteeringTable *table)
{
    AngleReport report{rru.id, tti, {}};
    const SnapshotSet snaps = synthesize_snapshots(paths, rru, impairments, rng_seed, lambda, cfg.snapshots, cfg.pattern);
    const int order = estimate_model_order(snaps, cfg.order_factor, cfg.max_order);
    if (order == 0)
        return report;

    std::optional<SteeringTable> local;
    if (!table)
        table = &local.emplace(ArrayGeometry::from(rru), cfg.grid, lambda);
    const AngularSpectrum sp = music_spectrum(snaps, *table, order);
    CfarConfig cfar = cfg.cfar;
    if (cfg.limit_peaks_to_order)
        cfar.max_peaks = static_cast<std::size_t>(order);
    report.peaks = cfar_detect(sp, cfar);
    return report;
}

} // namespace rtpos
