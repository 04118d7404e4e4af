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

#ifndef CHEMU_SUBSPACE_HPP
#define CHEMU_SUBSPACE_HPP

#include "chemu/gbsm.hpp"

#include <functional>
#include <vector>

namespace chemu
{
using CMatrix = Eigen::MatrixXcd;

struct ChirpParam
{
    double alpha = 0.0; // initial frequency, Hz
    double beta = 0.0;  // chirp rate, Hz/s

    bool operator==(const ChirpParam &) const = default;
};

struct ChirpRanges
{
    double alpha_lo = 0.0, alpha_hi = 0.0; // Hz
    double beta_lo = 0.0, beta_hi = 0.0;   // Hz/s
};

/// K chirps b_k(t) = exp(j 2 pi (alpha_k s + beta_k s^2 / 2)) on one window, where
/// s = t - t0 is the time since the window start. Sampled every window / n_time_samples.
struct ChirpBasis
{
    std::vector<ChirpParam> chirps;
    double t0 = 0.0;
    double window = 0.0; // T_w, s
    int n_time_samples = 0;

    int size() const { return static_cast<int>(chirps.size()); }
    double sample_period() const { return window / n_time_samples; }
    bool covers(double t) const;

    cx evaluate(int k, double t) const;
    CMatrix evaluate() const; // Psi, n_time_samples x K

    // First K chirps. Prefixes of one basis are nested, so projection error is non-increasing in K.
    ChirpBasis prefix(int k) const;
};

// Min/max over the snapshot's rays of the linear-Doppler offset and rate, frozen at t_ref,
// widened by 5% of the span on each side. Throws std::invalid_argument on an empty snapshot.
ChirpRanges derive_chirp_ranges(const ScenarioConfig &config, std::span<const ClusterPair> snapshot, double t_ref);

// Widens ranges too narrow for K distinct chirps. Alpha is held to at least (K_alpha - 1)/T_w
// and beta to (K_beta - 1)/T_w^2, so neighbouring grid chirps stay about a cycle apart over
// the window. Widened ranges keep their centre.
ChirpRanges ensure_resolvable(const ChirpRanges &ranges, int k, double window);

// Near-square uniform grid: ceil(sqrt(K)) alphas (inner index) by ceil(K/K_alpha) betas, truncated to K
ChirpBasis build_basis(int k, const ChirpRanges &ranges, double t0, double window, int n_time_samples);

struct Orthogonalization
{
    CMatrix phi; // n x K, pairwise orthogonal columns
    CMatrix g;   // K x K upper triangular, phi = psi * g
    std::vector<double> pivot_ratios; // |g_k| / |b_1|
};

inline constexpr double dependence_threshold = 1e-10;

// Unnormalized classical Gram-Schmidt with <u,v> = sum u conj(v).
// `passes` = 2 repeats the classical sweep on each residual (the coefficients of both
// sweeps are accumulated into the same unit upper triangular matrix).
// Throws NearDependentBasis when a pivot norm drops to dependence_threshold * |b_1|.
Orthogonalization gram_schmidt(const CMatrix &psi, int passes = 2);

// Coefficients A (K x I) of each column of h (n x I) on the chirps: A = G X, X_ji = <h_i, g_j> / <g_j, g_j>
CMatrix project(const CMatrix &h, const Orthogonalization &ortho);

struct ProjectionPackage
{
    int n_rx = 0;
    int n_tx = 0;
    ChirpBasis basis;
    std::vector<double> f_axis;        // Hz
    double f_c = 0.0;
    std::vector<double> normalization; // copied from the source grid, [q][p]
    std::vector<CMatrix> coefficients; // per (q,p), row-major [q][p], each K x I

    int n_chirps() const { return basis.size(); }
    int n_freq() const { return static_cast<int>(f_axis.size()); }
    const CMatrix &coeff(int q, int p) const { return coefficients[static_cast<std::size_t>(q) * n_tx + p]; }
    CMatrix &coeff(int q, int p) { return coefficients[static_cast<std::size_t>(q) * n_tx + p]; }

    // Bytes of coefficient payload, K * I complex doubles per subchannel
    std::size_t payload_bytes() const;

    // Whole frequency row of subchannel (q,p) at time t
    std::vector<cx> reconstruct_row(int q, int p, double t) const;
};

// Sum_k a_k(f_bin) b_k(t); any continuous t inside the window
cx reconstruct(const ProjectionPackage &package, int q, int p, double t, int f_bin);

struct Window
{
    int start = 0; // first time index
    int count = 0; // samples
};

// Contiguous windows of `samples_per_window`; a remainder shorter than `min_samples` joins the previous window
std::vector<Window> make_windows(int n_time, int samples_per_window, int min_samples = 1);

using RangeProvider = std::function<ChirpRanges(const Window &, double t0, double window_length)>;

// Ranges from the scenario's cluster history, evaluated at each window start
RangeProvider ranges_from_clusters(const ScenarioConfig &config, std::vector<ClusterPair> clusters);
RangeProvider fixed_ranges(const ChirpRanges &ranges);

struct ProjectionOptions
{
    int k = 30;
    int gram_schmidt_passes = 2;
};

std::vector<ProjectionPackage> project_grid(const CtfGrid &ctf, const std::vector<Window> &windows,
                                            const RangeProvider &ranges, const ProjectionOptions &options = {});

// Grid on the packages' own time samples, one window after another
CtfGrid reconstruct_grid(std::span<const ProjectionPackage> packages);

// Package whose window contains t; the later window wins on a shared boundary
const ProjectionPackage &package_at(std::span<const ProjectionPackage> packages, double t);

} // namespace chemu

#endif
