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
namespace
{
constexpr int max_placement_attempts = 10000;

double distance_to_segment(const Vec3 &point, const Vec3 &a, const Vec3 &b)
{
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((point - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (point - (a + u * ab)).norm();
}

// Closest approach of `point` to any element of `array` while it moves over [t0, t1]
double distance_to_track(const AntennaArray &array, const Vec3 &point, double t0, double t1)
{
    std::vector<double> knots{t0};
    for (const auto &seg : array.velocity)
        if (seg.t_start > t0 && seg.t_start < t1)
            knots.push_back(seg.t_start);
    knots.push_back(std::max(t0, t1));

    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e < array.n_elements; ++e)
        for (std::size_t k = 0; k + 1 < knots.size(); ++k)
            best = std::min(best, distance_to_segment(point, array.element_position(e, knots[k]),
                                                      array.element_position(e, knots[k + 1])));
    return best;
}

Vec3 spherical_to_cartesian(double d, double elevation, double azimuth)
{
    return d * Vec3(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
                    std::sin(elevation));
}

ClusterSide place_side(const ScenarioConfig &config, const AntennaArray &array, double birth_time, Rng &rng)
{
    std::exponential_distribution<double> distance(1.0 / config.cluster_dist_mean);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int attempt = 0; attempt < max_placement_attempts; ++attempt)
    {
        ClusterSide side;
        const double d = distance(rng);
        const double elevation = config.elevation_mean + config.elevation_std * gauss(rng);
        const double azimuth = config.azimuth_mean + config.azimuth_std * gauss(rng);
        side.center = array.element_position(0, birth_time) + spherical_to_cartesian(d, elevation, azimuth);
        side.offsets.resize(static_cast<std::size_t>(config.rays_per_cluster));
        for (auto &o : side.offsets)
        {
            const double x = gauss(rng), y = gauss(rng), z = gauss(rng);
            o = config.ellipsoid_stds.cwiseProduct(Vec3(x, y, z));
        }
        for (int k = 0; k < 3; ++k)
            side.velocity[k] = config.cluster_speed_std * gauss(rng);

        if (config.min_scatterer_distance <= 0.0)
            return side;
        const bool clear = std::all_of(side.offsets.begin(), side.offsets.end(), [&](const Vec3 &o) {
            return distance_to_track(array, side.center + o, birth_time, config.t_total) >=
                   config.min_scatterer_distance;
        });
        if (clear)
            return side;
    }
    throw std::runtime_error("place_cluster: no placement clears min_scatterer_distance after " +
                             std::to_string(max_placement_attempts) + " attempts");
}
} // namespace

ClusterPair place_cluster(const ScenarioConfig &config, double birth_time, Rng &rng)
{
    if (!(config.cluster_dist_mean > 0.0) || !(config.tau_link_mean > 0.0))
        throw std::invalid_argument("place_cluster: distribution means must be positive");
    if (config.azimuth_std < 0.0 || config.elevation_std < 0.0 || (config.ellipsoid_stds.array() < 0.0).any() ||
        config.cluster_speed_std < 0.0)
        throw std::invalid_argument("place_cluster: standard deviations must be nonnegative");
    if (config.rays_per_cluster < 1)
        throw std::invalid_argument("place_cluster: rays_per_cluster must be >= 1");

    ClusterPair cluster;
    cluster.birth_time = birth_time;
    cluster.tx = place_side(config, config.tx_array, birth_time, rng);
    cluster.rx = place_side(config, config.rx_array, birth_time, rng);
    std::exponential_distribution<double> link(1.0 / config.tau_link_mean);
    cluster.tau_link = link(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    cluster.visibility_draw = unit(rng);
    return cluster;
}

ClusterTimeline simulate_cluster_timeline(const ScenarioConfig &config)
{
    config.validate();
    Rng rng(config.rng_seed);
    ClusterTimeline timeline;
    auto &all = timeline.clusters; // indexed by id

    std::vector<ClusterPair> alive;
    for (int n = 0; n < config.n_clusters_init; ++n)
    {
        alive.push_back(place_cluster(config, 0.0, rng));
        alive.back().id = n;
        all.push_back(alive.back());
    }
    timeline.step_times.push_back(0.0);
    timeline.counts.push_back(static_cast<int>(alive.size()));

    // Event times land exactly on the t_ch grid when the update period is a multiple of it
    const double period = config.update_period();
    const double ratio = std::round(period / config.t_ch);
    const bool on_grid = ratio >= 1.0 && std::abs(ratio * config.t_ch - period) <= 1e-9 * period;
    auto step_time = [&](long k) {
        return on_grid ? static_cast<double>(k * static_cast<long>(ratio)) * config.t_ch
                       : static_cast<double>(k) * period;
    };

    const BirthDeathRates rates{config.birth_rate, config.death_rate};
    for (long k = 1;; ++k)
    {
        const double t = step_time(k);
        if (t >= config.t_total)
            break;
        for (auto &c : alive)
            all[static_cast<std::size_t>(c.id)].death_time = t; // provisional; survivors reset below

        alive = evolve_clusters(std::move(alive), period, rates, rng, [&](Rng &r) {
            ClusterPair c = place_cluster(config, t, r);
            c.id = static_cast<int>(all.size());
            all.push_back(c);
            return c;
        });
        for (const auto &c : alive)
            all[static_cast<std::size_t>(c.id)].death_time = c.death_time;

        timeline.step_times.push_back(t);
        timeline.counts.push_back(static_cast<int>(alive.size()));
    }
    return timeline;
}

} // namespace chemu
