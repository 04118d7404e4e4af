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

#ifndef CHEMU_GBSM_HPP
#define CHEMU_GBSM_HPP

#include "chemu/common.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace chemu
{
using Rng = std::mt19937_64;

// Velocity that applies from t_start until the next segment begins
struct VelocitySegment
{
    double t_start = 0.0; // s
    Vec3 velocity = Vec3::Zero(); // m/s
};

// Uniform linear array. Element p (0-based) starts at origin + p * spacing * axis.
struct AntennaArray
{
    int n_elements = 1;
    double spacing = 0.0; // m
    Vec3 axis = Vec3::UnitY();
    Vec3 origin = Vec3::Zero(); // m
    std::vector<VelocitySegment> velocity{VelocitySegment{}};

    Vec3 velocity_at(double t) const;
    Vec3 displacement(double t) const; // integral of the velocity over [0, t]
    Vec3 element_position(int element, double t) const;
    bool is_static() const;

    // Throws std::invalid_argument naming the offending key, prefixed with `name`
    void validate(const std::string &name) const;
};

struct ScenarioConfig
{
    double f_c = 2.6e9;         // carrier, Hz
    double bandwidth = 60e6;    // Hz
    int n_freq = 128;           // frequency bins I
    double t_total = 2.0;       // s
    double t_ch = 1e-3;         // channel sample period, s

    AntennaArray tx_array = default_tx_array();
    AntennaArray rx_array = default_rx_array();

    int n_clusters_init = 23;   // N
    int rays_per_cluster = 20;  // M
    double birth_rate = 4.0;    // clusters/s
    double death_rate = 0.2;    // 1/s per cluster
    double cluster_update_period = 0.0; // s, 0 means "every t_ch"

    double r_tau = 3.0;
    double delay_spread = 100e-9; // s
    double gamma = 0.0;

    double cluster_dist_mean = 50.0; // m
    double azimuth_mean = 0.0;       // rad
    double azimuth_std = 1.0471975511965976;
    double elevation_mean = 0.0;
    double elevation_std = 0.2617993877991494;
    Vec3 ellipsoid_stds{5.0, 5.0, 5.0}; // m
    double tau_link_mean = 50e-9;       // s
    double cluster_speed_std = 0.0;     // m/s per axis
    double visibility_distance = 30.0;  // m, decay length of per-antenna-pair cluster visibility
    double min_scatterer_distance = 10.0; // m, exclusion radius around each array trajectory

    std::uint64_t rng_seed = 1;

    double wavelength() const { return speed_of_light / f_c; }
    double freq_spacing() const { return bandwidth / n_freq; }
    double update_period() const { return cluster_update_period > 0.0 ? cluster_update_period : t_ch; }
    int n_time_samples() const;
    std::vector<double> time_axis() const;
    std::vector<double> freq_axis() const; // -B/2 + i*B/I, i = 0..I-1

    void validate() const;

    static AntennaArray default_tx_array();
    static AntennaArray default_rx_array();
};

struct ClusterSide
{
    Vec3 center = Vec3::Zero();  // m, at birth
    std::vector<Vec3> offsets;   // scatterer positions relative to the center, m
    Vec3 velocity = Vec3::Zero(); // m/s
};

// Twin cluster: ray m bounces off scatterer m on the Tx side, then scatterer m on the Rx side
struct ClusterPair
{
    int id = 0;
    ClusterSide tx;
    ClusterSide rx;
    double tau_link = 0.0; // s
    double birth_time = 0.0;
    double death_time = std::numeric_limits<double>::infinity();
    double visibility_draw = 0.0; // uniform [0,1) draw deciding which antenna pairs see this cluster

    int n_rays() const { return static_cast<int>(rx.offsets.size()); }
    bool alive_at(double t) const { return birth_time <= t && t < death_time; }
    Vec3 tx_scatterer(int m, double t) const;
    Vec3 rx_scatterer(int m, double t) const;
};

struct BirthDeathRates
{
    double birth = 0.0; // clusters/s
    double death = 0.0; // 1/s per cluster
};

// Frequency-independent part of a ray at one instant
struct RayState
{
    double delay = 0.0; // s
    double power = 0.0; // linear, at the frequency it is evaluated for
};

struct Tap
{
    double delay = 0.0;
    cx amplitude;
};

// Sampled transfer function H[q][p][t][f]
struct CtfGrid
{
    int n_rx = 0;
    int n_tx = 0;
    std::vector<double> t_axis;        // s
    std::vector<double> f_axis;        // Hz, baseband offsets
    double f_c = 0.0;
    std::vector<double> normalization; // amplitude scale applied per (q,p), row-major [q][p]
    std::vector<cx> data;

    CtfGrid() = default;
    CtfGrid(int n_rx, int n_tx, std::vector<double> t_axis, std::vector<double> f_axis, double f_c);

    int n_time() const { return static_cast<int>(t_axis.size()); }
    int n_freq() const { return static_cast<int>(f_axis.size()); }
    double bandwidth() const;

    std::size_t index(int q, int p, int t, int f) const
    {
        return ((static_cast<std::size_t>(q) * n_tx + p) * n_time() + t) * n_freq() + f;
    }
    cx &at(int q, int p, int t, int f) { return data[index(q, p, t, f)]; }
    const cx &at(int q, int p, int t, int f) const { return data[index(q, p, t, f)]; }

    // Contiguous [t][f] block of one subchannel
    std::span<cx> subchannel(int q, int p);
    std::span<const cx> subchannel(int q, int p) const;

    // Scales every subchannel to unit mean power over (t,f); all-zero subchannels keep scale 1
    void normalize();
};

// ---- Cluster process -------------------------------------------------------

// Draws one twin cluster per the scenario's distributions, positioned relative to each array at birth_time
ClusterPair place_cluster(const ScenarioConfig &config, double birth_time, Rng &rng);

// One birth-death step. Survivors keep their order; newborns (from `spawn`) are appended.
// Dead clusters are not returned; use simulate_cluster_timeline to keep their death times.
template <typename Spawn>
std::vector<ClusterPair> evolve_clusters(std::vector<ClusterPair> state, double dt, const BirthDeathRates &rates,
                                         Rng &rng, Spawn &&spawn);

// Full birth-death history over [0, t_total) sampled every update_period().
// Each entry carries its birth and death time.
struct ClusterTimeline
{
    std::vector<ClusterPair> clusters;
    std::vector<double> step_times;
    std::vector<int> counts; // alive clusters after each step
};
ClusterTimeline simulate_cluster_timeline(const ScenarioConfig &config);

// ---- Ray geometry and channel ------------------------------------------------

double ray_delay(const ScenarioConfig &config, const ClusterPair &cluster, int m, int p, int q, double t);
double ray_power(double delay, double f, const ScenarioConfig &config);
bool cluster_visible(const ScenarioConfig &config, const ClusterPair &cluster, int q, int p);

// Sum of sqrt(P) * exp(j 2 pi (f_c - f) tau) over the given rays
cx ctf_sample(double f_c, double f, std::span<const RayState> rays);

// Rays seen by antenna pair (q,p) at time t with powers evaluated at baseband frequency f
std::vector<RayState> active_rays(const ScenarioConfig &config, std::span<const ClusterPair> clusters, int q, int p,
                                  double t, double f);

// One tap per active ray: amplitude sqrt(P(f=0)) * exp(j 2 pi f_c tau)
std::vector<Tap> cir_taps(const ScenarioConfig &config, std::span<const ClusterPair> clusters, int q, int p, double t);

// Grid from a fixed cluster history (no randomness); normalized
CtfGrid ctf_grid_from_clusters(const ScenarioConfig &config, std::span<const ClusterPair> clusters);

// Birth-death timeline from rng_seed, then the grid
CtfGrid generate_ctf_grid(const ScenarioConfig &config);

// ---- Linear Doppler approximation ----------------------------------------------

// Geometry of one scatterer seen from one moving array element, frozen at a reference time
struct DopplerGeometry
{
    double cos_omega = 0.0; // angle between relative velocity and element->scatterer direction
    double cos_theta = 0.0; // angle between array axis and element->scatterer direction
    double distance = 0.0;  // D: element 1 to scatterer, m
    double speed = 0.0;     // |relative velocity|, m/s
    int element = 0;        // 0-based element index q-1
    double spacing = 0.0;   // m
};

DopplerGeometry doppler_geometry(const AntennaArray &array, const Vec3 &scatterer, const Vec3 &scatterer_velocity,
                                 int element, double t_ref);

// Initial Doppler and chirp rate of the linear model; throws std::domain_error when the
// bracketed distance D - cos(theta) (q-1) delta is not positive
double doppler_offset(const DopplerGeometry &geo, double wavelength);
double doppler_rate(const DopplerGeometry &geo, double wavelength);

// Instantaneous Doppler, Hz, of Rx-side ray m of `cluster` for Rx element q at time t (geometry at t = 0)
double doppler_approx(const ScenarioConfig &config, const ClusterPair &cluster, int m, int q, double t);

// ---- template implementation ----------------------------------------------------

template <typename Spawn>
std::vector<ClusterPair> evolve_clusters(std::vector<ClusterPair> state, double dt, const BirthDeathRates &rates,
                                         Rng &rng, Spawn &&spawn)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("evolve_clusters: dt must be positive");
    if (rates.birth < 0.0 || rates.death < 0.0)
        throw std::invalid_argument("evolve_clusters: rates must be nonnegative");

    if (rates.death > 0.0)
    {
        const double survival = std::exp(-rates.death * dt);
        std::bernoulli_distribution survives(survival);
        std::erase_if(state, [&](const ClusterPair &) { return !survives(rng); });
    }
    if (rates.birth > 0.0)
    {
        std::poisson_distribution<int> births(rates.birth * dt);
        const int n_new = births(rng);
        for (int i = 0; i < n_new; ++i)
            state.push_back(spawn(rng));
    }
    return state;
}

} // namespace chemu

#endif
