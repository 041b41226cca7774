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

#ifndef RTPOS_TRACKING_HPP
#define RTPOS_TRACKING_HPP

#include "rtpos/geometry.hpp"
#include "rtpos/scene.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtpos {

template <typename Scalar>
struct LineFit
{
    Scalar slope = Scalar(0);
    Scalar intercept = Scalar(0);
    Scalar objective = Scalar(0); // sum |y - slope t - intercept|^p
    int iterations = 0;
};

template <typename Scalar>
Scalar lp_objective(std::span<const Scalar> t, std::span<const Scalar> y, Scalar slope, Scalar intercept, Scalar p)
{
    Scalar acc(0);
    for (std::size_t i = 0; i < t.size(); ++i)
        acc += std::pow(std::abs(y[i] - slope * t[i] - intercept), p);
    return acc;
}

// Minimizes sum |y_i - a t_i - b|^p, 1 <= p <= 2, by iteratively reweighted least squares with
// weights max(|r|, residual_floor)^(p - 2). Only improvements are reported to on_iteration, so that
// sequence is non-increasing. p = 1 ends with an exact vertex search; p = 2 is solved in closed form.
template <typename Scalar>
LineFit<Scalar> lp_fit(std::span<const Scalar> t, std::span<const Scalar> y, Scalar p,
                       Scalar residual_floor = Scalar(1e-6), int max_iterations = 500,
                       const std::function<void(Scalar)> &on_iteration = {})
{
    if (t.size() != y.size())
        throw std::invalid_argument("lp_fit: abscissa/ordinate size mismatch");
    if (t.size() < 2)
        throw std::invalid_argument("lp_fit: need at least 2 points");
    if (!(p >= Scalar(1) && p <= Scalar(2)))
        throw std::invalid_argument("lp_fit: p must be in [1, 2]");

    const auto n = static_cast<Eigen::Index>(t.size());
    const Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> tv(t.data(), n), yv(y.data(), n);
    const Scalar t0 = tv.mean();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> tc = tv.array() - t0;
    if (tc.cwiseAbs().maxCoeff() == Scalar(0))
        throw std::invalid_argument("degenerate abscissae");

    // Weighted least squares in centered abscissa: y ~ a (t - t0) + c.
    const auto solve = [&](const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &w, Scalar &a, Scalar &c) {
        const Scalar sw = w.sum();
        const Scalar st = w.dot(tc), sy = w.dot(yv);
        const Scalar stt = (w.array() * tc.array().square()).sum();
        const Scalar sty = (w.array() * tc.array() * yv.array()).sum();
        const Scalar det = sw * stt - st * st;
        if (!(std::abs(det) > Scalar(0)))
            return false;
        a = (sw * sty - st * sy) / det;
        c = (stt * sy - st * sty) / det;
        return true;
    };

    Scalar a(0), c(0);
    solve(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Ones(n), a, c);
    LineFit<Scalar> fit;
    const auto objective = [&](Scalar aa, Scalar cc) {
        return ((yv.array() - aa * tc.array() - cc).abs().pow(p)).sum();
    };
    Scalar best = objective(a, c);
    if (on_iteration)
        on_iteration(best);

    if (p != Scalar(2))
    {
        // IRLS descends the floored objective, so single steps may raise the exact one; keep the best iterate.
        Scalar ca = a, cc = c;
        for (int it = 0; it < max_iterations; ++it)
        {
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r = yv.array() - ca * tc.array() - cc;
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = r.array().abs().max(residual_floor).pow(p - Scalar(2));
            Scalar na, nc;
            if (!solve(w, na, nc))
                break;
            const bool converged =
                std::abs(na - ca) + std::abs(nc - cc) <= Scalar(1e-13) * (Scalar(1) + std::abs(cc) + std::abs(ca));
            ca = na;
            cc = nc;
            fit.iterations = it + 1;
            if (const Scalar f = objective(ca, cc); f < best)
            {
                a = ca;
                c = cc;
                best = f;
                if (on_iteration)
                    on_iteration(best);
            }
            if (converged)
                break;
        }
        if (p == Scalar(1))
        {
            // Some L1 optimum passes through two samples; try the two closest to the IRLS line.
            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r = (yv.array() - a * tc.array() - c).abs();
            Eigen::Index i0 = 0, i1 = -1;
            for (Eigen::Index i = 1; i < n; ++i)
                if (r[i] < r[i0])
                    i0 = i;
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != i0 && tc[i] != tc[i0] && (i1 < 0 || r[i] < r[i1]))
                    i1 = i;
            // Pivot around either point of the current pair while that lowers the objective; the
            // objective is convex and piecewise linear, so a vertex without a better pivot is optimal.
            for (int guard = 0; i1 >= 0 && guard < 4 * static_cast<int>(n) * static_cast<int>(n); ++guard)
            {
                Eigen::Index bi = i0, bk = i1;
                Scalar bf = std::numeric_limits<Scalar>::infinity();
                for (Eigen::Index keep : {i0, i1})
                    for (Eigen::Index k = 0; k < n; ++k)
                    {
                        if (k == i0 || k == i1 || tc[k] == tc[keep])
                            continue;
                        const Scalar sa = (yv[k] - yv[keep]) / (tc[k] - tc[keep]);
                        const Scalar sc = yv[keep] - sa * tc[keep];
                        if (const Scalar f = objective(sa, sc); f < bf)
                        {
                            bf = f;
                            bi = keep;
                            bk = k;
                        }
                    }
                const Scalar sa = (yv[i1] - yv[i0]) / (tc[i1] - tc[i0]);
                const Scalar sc = yv[i0] - sa * tc[i0];
                const Scalar here = objective(sa, sc);
                if (here <= best)
                {
                    a = sa;
                    c = sc;
                    if (here < best && on_iteration)
                        on_iteration(here);
                    best = here;
                }
                if (!(bf < here * (Scalar(1) - Scalar(1e-15))))
                    break;
                i0 = bi;
                i1 = bk;
            }
        }
    }
    fit.slope = a;
    fit.intercept = c - a * t0;
    fit.objective = best;
    return fit;
}

struct TrendPoint
{
    std::int64_t tti;
    double value; // unwrapped angle, radians
};

struct TrendState
{
    int id = 0;
    double slope = 0.0;     // a_trend, radians per TTI
    double intercept = 0.0; // b_trend, radians
    std::deque<TrendPoint> buffer;
    double p = 1.0;
    double deviation = 0.0; // mean |residual|^p over the buffer
    std::int64_t created = 0;
    std::int64_t last_update = 0;
    int updates = 0;

    bool fitted() const { return buffer.size() >= 2; }
    // Linear extrapolation; before the first fit, the latest buffered value.
    double extrapolate(std::int64_t tti) const;
};

struct TrackerConfig
{
    double p = 1.0;
    double gate_factor = 3.0;
    double gate_min = deg2rad(1.0);
    double gate_max = deg2rad(10.0);
    std::size_t buffer_max = 32;
    std::int64_t max_idle_ttis = 20;
    double merge_threshold = deg2rad(0.5);
    double deviation_ceiling = deg2rad(5.0); // compared with deviation^(1/p)
    double residual_floor = 1e-6;
    double weight_floor = 1e-6;
    bool wrap = true; // azimuth-style (-pi, pi] wraparound

    void validate() const;
};

struct TrackerState
{
    std::vector<TrendState> trends;
    int next_id = 0;
    std::optional<std::int64_t> last_tti;

    // Longest buffer, then lowest deviation, then lowest id.
    const TrendState *dominant() const;
    const TrendState *find(int id) const;
};

struct TrendAssignment
{
    double estimate = 0.0;
    int trend_id = -1;
    bool new_trend = false;
};

struct TrackerUpdate
{
    TrackerState state;
    std::vector<TrendAssignment> assignments; // in ascending estimate order
};

double trend_gate(const TrendState &trend, const TrackerConfig &cfg);

// One TTI of multi-trend tracking: gate and assign, seed new trends, refit, drop redundant,
// idle and noisy trends. Throws std::invalid_argument when tti does not advance.
TrackerUpdate update_tracker(TrackerState state, std::int64_t tti, std::vector<double> estimates, const TrackerConfig &cfg);

struct AnglePrediction
{
    double angle = 0.0;
    double weight = 0.0; // N_buffer / sum |residual|^p
};

std::optional<AnglePrediction> predict_angle(const TrendState &trend, std::int64_t tti, const TrackerConfig &cfg);

// Single-trend tracker applied independently to x, y and z of the main-cluster center.
class CenterTracker
{
  public:
    explicit CenterTracker(TrackerConfig cfg = {});

    void update(std::int64_t tti, const Vec3 &center);
    std::optional<Vec3> predict(std::int64_t tti) const;
    const std::array<TrendState, 3> &axes() const { return axes_; }

  private:
    TrackerConfig cfg_;
    std::array<TrendState, 3> axes_;
    std::optional<std::int64_t> last_tti_;
};

struct CenterPrediction
{
    std::int64_t tti;
    std::optional<Vec3> predicted; // from the samples before tti
    Vec3 smoothed;                 // fit evaluated at tti after including the sample
};

std::vector<CenterPrediction> track_cluster_centers(std::span<const std::pair<std::int64_t, Vec3>> stream,
                                                    const TrackerConfig &cfg = {});

} // namespace rtpos

#endif
