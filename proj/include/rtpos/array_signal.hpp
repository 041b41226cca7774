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

#ifndef RTPOS_ARRAY_SIGNAL_HPP
#define RTPOS_ARRAY_SIGNAL_HPP

#include "rtpos/propagation.hpp"
#include "rtpos/scene.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

namespace rtpos {

template <typename Scalar>
using CVectorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
using CVector = CVectorT<double>;
using CMatrix = Eigen::MatrixXcd;

// Element displacements of a planar panel, one column per element. Element (i_h, i_v) sits in
// column (i_v - 1) * columns + (i_h - 1); element (1, 1) is the origin.
struct ArrayGeometry
{
    Eigen::Matrix3Xd displacements;
    double boresight_azimuth = 0.0;
    double boresight_elevation = 0.0;

    static ArrayGeometry from(const RruConfig &rru);
    Eigen::Index size() const { return displacements.cols(); }
};

// exp(i k (dx cos(el) sin(az) + dy cos(el) cos(az) + dz sin(el))) per element.
template <typename Scalar>
CVectorT<Scalar> steering_vector(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> &displacements, Scalar azimuth,
                                 Scalar elevation, Scalar lambda)
{
    const Scalar k = Scalar(2) * Scalar(kPi) / lambda;
    const Vec3T<Scalar> u = direction_from_angles(azimuth, elevation);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phase = k * (displacements.transpose() * u);
    CVectorT<Scalar> a(phase.size());
    for (Eigen::Index m = 0; m < phase.size(); ++m)
        a[m] = std::polar(Scalar(1), phase[m]);
    return a;
}

inline CVector steering_vector(const ArrayGeometry &geom, double azimuth, double elevation, double lambda)
{
    return steering_vector<double>(geom.displacements, azimuth, elevation, lambda);
}

// 3GPP-style sector element pattern relative to the panel boresight.
struct ElementPattern
{
    double max_gain_dbi = 8.0;
    double beamwidth_az_deg = 65.0;
    double beamwidth_el_deg = 65.0;
    double front_to_back_db = 30.0;

    double gain_db(double az_offset, double el_offset) const;
    double amplitude(double az_offset, double el_offset) const { return std::pow(10.0, gain_db(az_offset, el_offset) / 20.0); }
};

struct InterferenceSource
{
    double azimuth = 0.0;
    double elevation = 0.0;
    double relative_power_db = 0.0; // relative to the total received path power
};

struct Impairments
{
    double calibration_sigma_deg_3sigma = 0.0; // per-element phase error, degrees at 3 sigma
    double pointing_sigma_deg_3sigma = 0.0;    // array orientation error per axis, degrees at 3 sigma
    double snr_db = 20.0;
    std::vector<InterferenceSource> interference;
    double noise_reference_power = 0.0; // 0: the received path power sets the noise level
    std::optional<std::uint64_t> calibration_seed; // fixed per RRU; derived from the snapshot seed if absent
};

struct SnapshotConfig
{
    int subcarriers = 64;        // evenly subsampled from the SRS tones
    int srs_tones = 272 * 12 / 2; // N_RB * 12 / K_TC
    double tone_spacing_hz = 60e3; // 30 kHz subcarriers, comb 2

    double subcarrier_offset_hz(int s) const;
    void validate(Eigen::Index elements) const;
};

struct SnapshotSet
{
    CMatrix data; // elements x snapshots
    Eigen::VectorXd calibration_phase;
    double pointing_azimuth = 0.0; // orientation error applied to every path, radians
    double pointing_elevation = 0.0;
    double noise_variance = 0.0;

    CMatrix covariance() const { return data * data.adjoint() / static_cast<double>(data.cols()); }
};

SnapshotSet synthesize_snapshots(const std::vector<PathComponent> &paths, const RruConfig &rru,
                                 const Impairments &impairments, std::uint64_t rng_seed, double lambda,
                                 const SnapshotConfig &cfg = {}, const ElementPattern &pattern = {});

struct GridSpec
{
    double az_half_width = deg2rad(60.0); // around the boresight azimuth
    double az_step = deg2rad(0.5);
    double el_min = deg2rad(-30.0);
    double el_max = deg2rad(10.0);
    double el_step = deg2rad(0.5);

    Eigen::VectorXd azimuths(double boresight_azimuth) const;
    Eigen::VectorXd elevations() const;
};

struct AngularSpectrum
{
    Eigen::VectorXd azimuth;   // strictly increasing, may extend beyond (-pi, pi]
    Eigen::VectorXd elevation; // strictly increasing
    Eigen::MatrixXd power;     // azimuth x elevation
};

// Steering vectors for every grid point, one column per (az, el) with az fastest.
class SteeringTable
{
  public:
    SteeringTable(const ArrayGeometry &geom, const GridSpec &grid, double lambda);

    const Eigen::VectorXd &azimuth() const { return azimuth_; }
    const Eigen::VectorXd &elevation() const { return elevation_; }
    const CMatrix &vectors() const { return vectors_; }

  private:
    Eigen::VectorXd azimuth_, elevation_;
    CMatrix vectors_;
};

class MusicError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// MUSIC pseudo-spectrum 1 / (a^H V V^H a) with V the noise-subspace eigenvectors.
AngularSpectrum music_spectrum(const SnapshotSet &snapshots, const SteeringTable &table, int model_order);
AngularSpectrum music_spectrum(const SnapshotSet &snapshots, const ArrayGeometry &geom, int model_order,
                               const GridSpec &grid, double lambda);

// Number of covariance eigenvalues above factor * noise_variance, capped.
int estimate_model_order(const SnapshotSet &snapshots, double factor = 10.0, int cap = 8);

struct CfarConfig
{
    double threshold = 4.0; // C_threshold
    int window_az = 9;      // N_phi
    int window_el = 9;      // N_theta
    int guard = 1;          // guard ring around the cell under test
    std::size_t max_peaks = 0; // 0: unlimited
};

struct AnglePeak
{
    double azimuth = 0.0;
    double elevation = 0.0;
    double peak_power = 0.0;
    double width_az = 0.0; // half-power extent, radians
    double width_el = 0.0;
};

struct AngleReport
{
    int rru_id = 0;
    std::int64_t tti = 0;
    std::vector<AnglePeak> peaks; // descending peak_power
};

std::vector<AnglePeak> cfar_detect(const AngularSpectrum &spectrum, const CfarConfig &cfg);

struct AoaConfig
{
    SnapshotConfig snapshots;
    GridSpec grid;
    CfarConfig cfar;
    ElementPattern pattern;
    double order_factor = 10.0;
    int max_order = 8;
    bool limit_peaks_to_order = true;
};

// synthesize_snapshots -> music_spectrum -> cfar_detect. Pass a prebuilt table to skip
// recomputing steering vectors.
AngleReport estimate_aoa(const RruConfig &rru, std::int64_t tti, const std::vector<PathComponent> &paths,
                         const Impairments &impairments, const AoaConfig &cfg, double lambda, std::uint64_t rng_seed,
                         const SteeringTable *table = nullptr);

double wrap_angle(double a);

} // namespace rtpos

#endif
