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

#ifndef RTPOS_PROPAGATION_HPP
#define RTPOS_PROPAGATION_HPP

#include "rtpos/scene.hpp"

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtpos {

// Spherical wave e^(-ikr)/r, k = 2 pi / lambda. The element pattern is applied by the receiver.
template <typename Scalar>
std::complex<Scalar> free_space_field(Scalar r, Scalar lambda)
{
    if (!(r > Scalar(0)))
        throw std::domain_error("free_space_field: path length must be > 0");
    const Scalar k = Scalar(2) * Scalar(kPi) / lambda;
    return std::polar(Scalar(1) / r, -k * r);
}

template <typename Scalar>
struct FresnelCoefficients
{
    Scalar r_perp;  // power reflection coefficient, perpendicular polarization
    Scalar r_par;   // power reflection coefficient, parallel polarization
    Scalar theta_t; // transmission angle from Snell's law (pi/2 under total internal reflection)

    Scalar mean() const { return Scalar(0.5) * (r_perp + r_par); }
};

template <typename Scalar>
FresnelCoefficients<Scalar> fresnel_reflection(Scalar n1, Scalar n2, Scalar theta_i)
{
    using std::asin;
    using std::cos;
    using std::sin;
    if (!(n1 >= Scalar(1)) || !(n2 >= Scalar(1)))
        throw std::domain_error("fresnel_reflection: refractive indices must be >= 1");
    if (!(theta_i >= Scalar(0) && theta_i < Scalar(kPi) / Scalar(2)))
        throw std::domain_error("fresnel_reflection: incidence angle must be in [0, pi/2)");

    const Scalar sin_t = n1 * sin(theta_i) / n2;
    if (sin_t >= Scalar(1))
        return {Scalar(1), Scalar(1), Scalar(kPi) / Scalar(2)};
    const Scalar theta_t = asin(sin_t);
    const Scalar ci = cos(theta_i);
    const Scalar ct = cos(theta_t);
    // TE and TM amplitude ratios; the TM one vanishes at the Brewster angle.
    const Scalar perp = (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct);
    const Scalar par = (n2 * ci - n1 * ct) / (n2 * ci + n1 * ct);
    return {perp * perp, par * par, theta_t};
}

// Single-lobe directive scattering: E_S0^2 ((1 + cos psi_R) / 2)^alpha_R.
template <typename Scalar>
Scalar scattering_gain(Scalar psi_r, Scalar amplitude, Scalar exponent)
{
    using std::cos;
    using std::pow;
    return amplitude * amplitude * pow((Scalar(1) + cos(psi_r)) / Scalar(2), exponent);
}

inline double scattering_gain(double psi_r, const Material &m)
{
    return scattering_gain<double>(psi_r, m.scattering_amplitude, m.scattering_exponent);
}

struct DiffractionGeometry
{
    double h = 0.0;  // signed edge clearance, positive when the edge obstructs the direct line
    double d1 = 1.0; // transmitter to edge
    double d2 = 1.0; // edge to receiver
    double lambda = 1.0;
};

template <typename Scalar>
Scalar diffraction_v(Scalar h, Scalar d1, Scalar d2, Scalar lambda)
{
    using std::sqrt;
    return h * sqrt(Scalar(2) / lambda * (Scalar(1) / d1 + Scalar(1) / d2));
}

inline double diffraction_v(const DiffractionGeometry &g) { return diffraction_v(g.h, g.d1, g.d2, g.lambda); }

// Knife-edge loss approximation in dB; 0 dB below v = -0.7.
template <typename Scalar>
Scalar diffraction_loss_db(Scalar v)
{
    using std::log10;
    using std::sqrt;
    if (v < Scalar(-0.7))
        return Scalar(0);
    const Scalar x = v - Scalar(0.1);
    return Scalar(6.9) + Scalar(20) * log10(sqrt(x * x + Scalar(1)) + x);
}

// (1 + i)/2 * integral_v^inf exp(-i pi t^2 / 2) dt by adaptive Simpson quadrature.
std::complex<double> fresnel_integral_ratio(double v);

struct TraceConfig
{
    double carrier_frequency = 3.5e9;
    int max_reflections = 3;
    int ray_count = 20000;                  // Fibonacci-sphere launch directions
    double capture_radius_coefficient = 0.75; // r_cap = coeff * unfolded length * angular step
    double min_path_gain_db = -160.0;       // relative to 1 m free space
    bool enable_scattering = false;
    bool enable_diffraction = true;
    double scattering_tile_size = 5.0;

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }
    double angular_step() const;
    void validate() const;
};

enum class InteractionKind
{
    reflection,
    scattering,
    diffraction
};

struct Interaction
{
    InteractionKind kind = InteractionKind::reflection;
    Vec3 point = Vec3::Zero();
    std::size_t material_id = 0;
    std::size_t face_id = kNoIndex; // reflecting/scattering face, or edge index for diffraction
};

struct PathComponent
{
    std::complex<double> complex_gain;
    double delay = 0.0;
    double aoa_azimuth = 0.0, aoa_elevation = 0.0; // at the receiver
    double aod_azimuth = 0.0, aod_elevation = 0.0; // at the transmitter
    std::vector<Interaction> interactions;
    double path_length = 0.0;
    bool is_los = false;

    std::size_t reflection_count() const;
    double power() const { return std::norm(complex_gain); }
};

// All propagation paths between a transmitter point and each receiver point. Rays are launched
// once from tx and shared by every receiver. Each list is canonically ordered by
// (path_length, interaction count, interaction faces).
std::vector<std::vector<PathComponent>> trace_paths(const SceneModel &scene, const Vec3 &tx,
                                                    std::span<const Vec3> receivers, const TraceConfig &cfg);

std::vector<PathComponent> trace_paths(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx, const TraceConfig &cfg);

inline std::vector<PathComponent> trace_paths(const SceneModel &scene, const Vec3 &tx, const RruConfig &rx,
                                              const TraceConfig &cfg)
{
    return trace_paths(scene, tx, rx.position, cfg);
}

// Specular path through the given face sequence by the image method, or empty when the
// sequence has no valid unobstructed realization. Returns the interaction points.
std::optional<std::vector<Vec3>> specular_path(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx,
                                               std::span<const std::size_t> faces);

// Mirror direction d about a plane with unit normal n.
inline Vec3 reflect(const Vec3 &d, const Vec3 &n) { return d - 2.0 * d.dot(n) * n; }

} // namespace rtpos

#endif
