// SPDX-License-Identifier: Apache-2.0
//
// chemu - emulator for non-stationary MIMO wireless channels
// Copyright (C) 2026 The chemu authors
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

#include "chemu/gbsm.hpp"

#include <algorithm>
#include <cmath>

namespace chemu
{

// ---- AntennaArray ----------------------------------------------------------------

Vec3 AntennaArray::velocity_at(double t) const
{
    Vec3 v = Vec3::Zero();
    for (const auto &seg : velocity)
        if (seg.t_start <= t)
            v = seg.velocity;
    return v;
}

Vec3 AntennaArray::displacement(double t) const
{
    Vec3 d = Vec3::Zero();
    for (std::size_t i = 0; i < velocity.size(); ++i)
    {
        const double start = velocity[i].t_start;
        if (start >= t)
            break;
        const double end = (i + 1 < velocity.size()) ? std::min(velocity[i + 1].t_start, t) : t;
        d += velocity[i].velocity * (end - start);
    }
    return d;
}

Vec3 AntennaArray::element_position(int element, double t) const
{
    return origin + (element * spacing) * axis + displacement(t);
}

bool AntennaArray::is_static() const
{
    return std::all_of(velocity.begin(), velocity.end(),
                       [](const VelocitySegment &s) { return s.velocity.isZero(0.0); });
}

void AntennaArray::validate(const std::string &name) const
{
    if (n_elements < 1)
        throw std::invalid_argument(name + "_elements: must be >= 1");
    if (!(spacing >= 0.0) || !std::isfinite(spacing))
        throw std::invalid_argument(name + "_spacing: must be finite and >= 0");
    if (std::abs(axis.norm() - 1.0) > 1e-12)
        throw std::invalid_argument(name + "_axis: must be a unit vector");
    if (!origin.allFinite())
        throw std::invalid_argument(name + "_origin: must be finite");
    if (velocity.empty() || velocity.front().t_start != 0.0)
        throw std::invalid_argument(name + "_velocity: first segment must start at t = 0");
    for (std::size_t i = 0; i < velocity.size(); ++i)
    {
        if (!velocity[i].velocity.allFinite())
            throw std::invalid_argument(name + "_velocity: must be finite");
        if (i > 0 && !(velocity[i].t_start > velocity[i - 1].t_start))
            throw std::invalid_argument(name + "_velocity: segment start times must increase");
    }
}

// ---- ScenarioConfig --------------------------------------------------------------

AntennaArray ScenarioConfig::default_tx_array()
{
    AntennaArray a;
    a.n_elements = 4;
    a.spacing = 0.5 * speed_of_light / 2.6e9;
    a.origin = Vec3(0.0, 0.0, 35.0);
    return a;
}

AntennaArray ScenarioConfig::default_rx_array()
{
    AntennaArray a;
    a.n_elements = 4;
    a.spacing = 0.5 * speed_of_light / 2.6e9;
    a.origin = Vec3(10.0, 0.0, 1.5);
    a.velocity = {VelocitySegment{0.0, Vec3(10.0, 0.0, 0.0)}};
    return a;
}

int ScenarioConfig::n_time_samples() const
{
    const double ratio = t_total / t_ch;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest))
        return static_cast<int>(nearest);
    return static_cast<int>(std::ceil(ratio));
}

std::vector<double> ScenarioConfig::time_axis() const
{
    std::vector<double> t(static_cast<std::size_t>(n_time_samples()));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<double>(i) * t_ch;
    return t;
}

std::vector<double> ScenarioConfig::freq_axis() const
{
    std::vector<double> f(static_cast<std::size_t>(n_freq));
    const double df = freq_spacing();
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = -0.5 * bandwidth + static_cast<double>(i) * df;
    return f;
}

void ScenarioConfig::validate() const
{
    auto require = [](bool ok, const char *key, const char *what) {
        if (!ok)
            throw std::invalid_argument(std::string(key) + ": " + what);
    };
    require(std::isfinite(f_c) && f_c > 0.0, "f_c", "must be > 0");
    require(std::isfinite(bandwidth) && bandwidth > 0.0, "B", "must be > 0");
    require(bandwidth < 2.0 * f_c, "B", "must be < 2 f_c");
    require(n_freq >= 2, "n_freq", "must be >= 2");
    require(std::isfinite(t_ch) && t_ch > 0.0, "t_ch", "must be > 0");
    require(std::isfinite(t_total) && t_total > 0.0, "t_total", "must be > 0");
    require(n_clusters_init >= 1, "n_clusters", "must be >= 1");
    require(rays_per_cluster >= 1, "rays_per_cluster", "must be >= 1");
    require(std::isfinite(birth_rate) && birth_rate >= 0.0, "birth_rate", "must be >= 0");
    require(std::isfinite(death_rate) && death_rate > 0.0, "death_rate", "must be > 0");
    require(cluster_update_period >= 0.0, "cluster_update_period", "must be >= 0");
    require(std::isfinite(r_tau) && r_tau > 1.0, "r_tau", "must be > 1");
    require(std::isfinite(delay_spread) && delay_spread > 0.0, "ds", "must be > 0");
    require(std::isfinite(gamma), "gamma", "must be finite");
    require(std::isfinite(cluster_dist_mean) && cluster_dist_mean > 0.0, "cluster_dist_mean", "must be > 0");
    require(std::isfinite(azimuth_mean), "azimuth_mean", "must be finite");
    require(std::isfinite(elevation_mean), "elevation_mean", "must be finite");
    require(std::isfinite(azimuth_std) && azimuth_std >= 0.0, "azimuth_std", "must be >= 0");
    require(std::isfinite(elevation_std) && elevation_std >= 0.0, "elevation_std", "must be >= 0");
    require(ellipsoid_stds.allFinite() && (ellipsoid_stds.array() >= 0.0).all(), "ellipsoid_stds", "must be >= 0");
    require(std::isfinite(tau_link_mean) && tau_link_mean > 0.0, "tau_link_mean", "must be > 0");
    require(cluster_speed_std >= 0.0, "cluster_speed_std", "must be >= 0");
    require(visibility_distance > 0.0, "visibility_distance", "must be > 0");
    require(min_scatterer_distance >= 0.0, "min_scatterer_distance", "must be >= 0");
    tx_array.validate("tx");
    rx_array.validate("rx");
}

// ---- ClusterPair -----------------------------------------------------------------

Vec3 ClusterPair::tx_scatterer(int m, double t) const
{
    return tx.center + tx.offsets[static_cast<std::size_t>(m)] + tx.velocity * (t - birth_time);
}

Vec3 ClusterPair::rx_scatterer(int m, double t) const
{
    return rx.center + rx.offsets[static_cast<std::size_t>(m)] + rx.velocity * (t - birth_time);
}

// ---- CtfGrid ----------------------------------------------------------------------

CtfGrid::CtfGrid(int n_rx_, int n_tx_, std::vector<double> t_axis_, std::vector<double> f_axis_, double f_c_)
    : n_rx(n_rx_), n_tx(n_tx_), t_axis(std::move(t_axis_)), f_axis(std::move(f_axis_)), f_c(f_c_),
      normalization(static_cast<std::size_t>(n_rx_) * n_tx_, 1.0),
      data(static_cast<std::size_t>(n_rx_) * n_tx_ * t_axis.size() * f_axis.size())
{
}

double CtfGrid::bandwidth() const
{
    if (f_axis.size() < 2)
        return 0.0;
    return (f_axis.back() - f_axis.front()) * static_cast<double>(f_axis.size()) /
           static_cast<double>(f_axis.size() - 1);
}

std::span<cx> CtfGrid::subchannel(int q, int p)
{
    return {data.data() + index(q, p, 0, 0), static_cast<std::size_t>(n_time()) * n_freq()};
}

std::span<const cx> CtfGrid::subchannel(int q, int p) const
{
    return {data.data() + index(q, p, 0, 0), static_cast<std::size_t>(n_time()) * n_freq()};
}

void CtfGrid::normalize()
{
    for (int q = 0; q < n_rx; ++q)
        for (int p = 0; p < n_tx; ++p)
        {
            auto h = subchannel(q, p);
            double power = 0.0;
            for (const cx &v : h)
                power += std::norm(v);
            power /= static_cast<double>(h.size());
            const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;
            for (cx &v : h)
                v *= scale;
            normalization[static_cast<std::size_t>(q) * n_tx + p] *= scale;
        }
}

// ---- rays -------------------------------------------------------------------------

namespace
{
constexpr double coincidence_tolerance = 1e-9; // m

// exp(j 2 pi cycles) with the integer part of `cycles` removed first
cx unit_phasor(double cycles)
{
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, two_pi * frac);
}
} // namespace

double ray_delay(const ScenarioConfig &config, const ClusterPair &cluster, int m, int p, int q, double t)
{
    const double d_tx = (cluster.tx_scatterer(m, t) - config.tx_array.element_position(p, t)).norm();
    const double d_rx = (cluster.rx_scatterer(m, t) - config.rx_array.element_position(q, t)).norm();
    if (d_tx <= coincidence_tolerance || d_rx <= coincidence_tolerance)
        throw std::domain_error("ray_delay: antenna and scatterer coincide (cluster " + std::to_string(cluster.id) +
                                ", ray " + std::to_string(m) + ", t = " + std::to_string(t) + " s)");
    return (d_tx + d_rx) / speed_of_light + cluster.tau_link;
}

double ray_power(double delay, double f, const ScenarioConfig &config)
{
    const double freq_factor = config.gamma == 0.0 ? 1.0 : std::pow((config.f_c + f) / config.f_c, config.gamma);
    const double decay = (config.r_tau - 1.0) / (config.r_tau * config.delay_spread);
    return freq_factor * std::exp(-decay * delay);
}

bool cluster_visible(const ScenarioConfig &config, const ClusterPair &cluster, int q, int p)
{
    const double offset = std::max(p * config.tx_array.spacing, q * config.rx_array.spacing);
    return cluster.visibility_draw < std::exp(-offset / config.visibility_distance);
}

cx ctf_sample(double f_c, double f, std::span<const RayState> rays)
{
    cx acc{0.0, 0.0};
    for (const auto &ray : rays)
        acc += std::sqrt(ray.power) * unit_phasor((f_c - f) * ray.delay);
    return acc;
}

std::vector<RayState> active_rays(const ScenarioConfig &config, std::span<const ClusterPair> clusters, int q, int p,
                                  double t, double f)
{
    std::vector<RayState> rays;
    for (const auto &cluster : clusters)
    {
        if (!cluster.alive_at(t) || !cluster_visible(config, cluster, q, p))
            continue;
        for (int m = 0; m < cluster.n_rays(); ++m)
        {
            const double tau = ray_delay(config, cluster, m, p, q, t);
            rays.push_back({tau, ray_power(tau, f, config)});
        }
    }
    return rays;
}

std::vector<Tap> cir_taps(const ScenarioConfig &config, std::span<const ClusterPair> clusters, int q, int p, double t)
{
    std::vector<Tap> taps;
    for (const auto &ray : active_rays(config, clusters, q, p, t, 0.0))
        taps.push_back({ray.delay, std::sqrt(ray.power) * unit_phasor(config.f_c * ray.delay)});
    return taps;
}

CtfGrid ctf_grid_from_clusters(const ScenarioConfig &config, std::span<const ClusterPair> clusters)
{
    config.validate();
    const int n_rx = config.rx_array.n_elements;
    const int n_tx = config.tx_array.n_elements;
    CtfGrid grid(n_rx, n_tx, config.time_axis(), config.freq_axis(), config.f_c);
    const int n_f = grid.n_freq();
    const double df = config.freq_spacing();
    const double f0 = grid.f_axis.front();

    std::vector<double> freq_amplitude(static_cast<std::size_t>(n_f));
    for (int i = 0; i < n_f; ++i)
        freq_amplitude[static_cast<std::size_t>(i)] = std::sqrt(ray_power(0.0, grid.f_axis[static_cast<std::size_t>(i)], config));

    // Bin i of a ray is anchor * step^i. step^i comes from a short serial recurrence for
    // i < block and one extra factor per block, so the error stays at a few dozen ulps.
    constexpr int block = 16;
    const std::size_t nf = static_cast<std::size_t>(n_f);
    const std::size_t pairs = static_cast<std::size_t>(n_rx) * n_tx;
    std::vector<double> acc_re(pairs * nf), acc_im(pairs * nf);
    std::vector<double> pw_re(nf), pw_im(nf);
    std::vector<Vec3> tx_pos(static_cast<std::size_t>(n_tx)), rx_pos(static_cast<std::size_t>(n_rx));
    std::vector<double> d_tx(static_cast<std::size_t>(n_tx)), d_rx(static_cast<std::size_t>(n_rx));
    std::vector<char> visible(pairs);

    for (int ti = 0; ti < grid.n_time(); ++ti)
    {
        const double t = grid.t_axis[static_cast<std::size_t>(ti)];
        for (int p = 0; p < n_tx; ++p)
            tx_pos[static_cast<std::size_t>(p)] = config.tx_array.element_position(p, t);
        for (int q = 0; q < n_rx; ++q)
            rx_pos[static_cast<std::size_t>(q)] = config.rx_array.element_position(q, t);
        std::fill(acc_re.begin(), acc_re.end(), 0.0);
        std::fill(acc_im.begin(), acc_im.end(), 0.0);

        for (const auto &cluster : clusters)
        {
            if (!cluster.alive_at(t))
                continue;
            bool any = false;
            for (int q = 0; q < n_rx; ++q)
                for (int p = 0; p < n_tx; ++p)
                {
                    const bool v = cluster_visible(config, cluster, q, p);
                    visible[static_cast<std::size_t>(q) * n_tx + p] = v;
                    any = any || v;
                }
            if (!any)
                continue;
            for (int m = 0; m < cluster.n_rays(); ++m)
            {
                const Vec3 sc_tx = cluster.tx_scatterer(m, t);
                const Vec3 sc_rx = cluster.rx_scatterer(m, t);
                for (int p = 0; p < n_tx; ++p)
                    d_tx[static_cast<std::size_t>(p)] = (sc_tx - tx_pos[static_cast<std::size_t>(p)]).norm();
                for (int q = 0; q < n_rx; ++q)
                    d_rx[static_cast<std::size_t>(q)] = (sc_rx - rx_pos[static_cast<std::size_t>(q)]).norm();
                for (int q = 0; q < n_rx; ++q)
                    for (int p = 0; p < n_tx; ++p)
                    {
                        const std::size_t pair = static_cast<std::size_t>(q) * n_tx + p;
                        if (!visible[pair])
                            continue;
                        const double dt_ = d_tx[static_cast<std::size_t>(p)];
                        const double dr_ = d_rx[static_cast<std::size_t>(q)];
                        if (dt_ <= coincidence_tolerance || dr_ <= coincidence_tolerance)
                            throw std::domain_error("ctf_grid_from_clusters: antenna and scatterer coincide (cluster " +
                                                    std::to_string(cluster.id) + ", ray " + std::to_string(m) +
                                                    ", t = " + std::to_string(t) + " s)");
                        const double tau = (dt_ + dr_) / speed_of_light + cluster.tau_link;

                        const cx step = unit_phasor(-df * tau);
                        cx s = 1.0;
                        const std::size_t head = std::min<std::size_t>(block, nf);
                        for (std::size_t i = 0; i < head; ++i)
                        {
                            pw_re[i] = s.real();
                            pw_im[i] = s.imag();
                            s *= step;
                        }
                        // s is now step^block
                        cx jump = s;
                        for (std::size_t base = block; base < nf; base += block)
                        {
                            const std::size_t end = std::min(nf, base + block);
                            for (std::size_t i = base; i < end; ++i)
                            {
                                const std::size_t j = i - base;
                                pw_re[i] = jump.real() * pw_re[j] - jump.imag() * pw_im[j];
                                pw_im[i] = jump.real() * pw_im[j] + jump.imag() * pw_re[j];
                            }
                            jump *= s;
                        }

                        const cx a = std::sqrt(ray_power(tau, 0.0, config)) * unit_phasor((config.f_c - f0) * tau);
                        const double ar = a.real(), ai = a.imag();
                        double *re = acc_re.data() + pair * nf;
                        double *im = acc_im.data() + pair * nf;
                        for (std::size_t i = 0; i < nf; ++i)
                        {
                            re[i] += ar * pw_re[i] - ai * pw_im[i];
                            im[i] += ar * pw_im[i] + ai * pw_re[i];
                        }
                    }
            }
        }
        for (int q = 0; q < n_rx; ++q)
            for (int p = 0; p < n_tx; ++p)
            {
                const std::size_t pair = static_cast<std::size_t>(q) * n_tx + p;
                for (int i = 0; i < n_f; ++i)
                    grid.at(q, p, ti, i) = freq_amplitude[static_cast<std::size_t>(i)] *
                                           cx(acc_re[pair * nf + i], acc_im[pair * nf + i]);
            }
    }
    grid.normalize();
    return grid;
}

CtfGrid generate_ctf_grid(const ScenarioConfig &config)
{
    config.validate();
    const auto timeline = simulate_cluster_timeline(config);
    return ctf_grid_from_clusters(config, timeline.clusters);
}

// ---- Doppler ----------------------------------------------------------------------

DopplerGeometry doppler_geometry(const AntennaArray &array, const Vec3 &scatterer, const Vec3 &scatterer_velocity,
                                 int element, double t_ref)
{
    DopplerGeometry geo;
    const Vec3 rel_velocity = array.velocity_at(t_ref) - scatterer_velocity;
    const Vec3 to_scatterer = scatterer - array.element_position(element, t_ref);
    const double dist = to_scatterer.norm();
    if (dist <= coincidence_tolerance)
        throw std::domain_error("doppler_geometry: antenna and scatterer coincide");
    const Vec3 dir = to_scatterer / dist;
    geo.speed = rel_velocity.norm();
    geo.cos_omega = geo.speed > 0.0 ? rel_velocity.dot(dir) / geo.speed : 0.0;
    geo.cos_theta = array.axis.dot(dir);
    geo.distance = (scatterer - array.element_position(0, t_ref)).norm();
    geo.element = element;
    geo.spacing = array.spacing;
    return geo;
}

double doppler_offset(const DopplerGeometry &geo, double wavelength)
{
    return -geo.cos_omega * geo.speed / wavelength;
}

double doppler_rate(const DopplerGeometry &geo, double wavelength)
{
    const double denom = geo.distance - geo.cos_theta * geo.element * geo.spacing;
    if (!(denom > 0.0))
        throw std::domain_error("doppler_rate: scatterer lies behind the array along its axis");
    const double sin2 = std::max(0.0, 1.0 - geo.cos_omega * geo.cos_omega);
    return sin2 * geo.speed * geo.speed / (wavelength * denom);
}

double doppler_approx(const ScenarioConfig &config, const ClusterPair &cluster, int m, int q, double t)
{
    const auto geo = doppler_geometry(config.rx_array, cluster.rx_scatterer(m, 0.0), cluster.rx.velocity, q, 0.0);
    const double lambda = config.wavelength();
    return doppler_offset(geo, lambda) + doppler_rate(geo, lambda) * t;
}

} // namespace chemu
