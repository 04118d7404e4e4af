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

#include "chemu/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace chemu
{

// ---- ChirpBasis -------------------------------------------------------------------

bool ChirpBasis::covers(double t) const
{
    const double slack = 1e-9 * std::max(window, 1e-12);
    return t >= t0 - slack && t <= t0 + window + slack;
}

cx ChirpBasis::evaluate(int k, double t) const
{
    const auto &c = chirps[static_cast<std::size_t>(k)];
    const double s = t - t0;
    const double cycles = c.alpha * s + 0.5 * c.beta * s * s;
    return std::polar(1.0, two_pi * (cycles - std::floor(cycles)));
}

CMatrix ChirpBasis::evaluate() const
{
    CMatrix psi(n_time_samples, size());
    const double dt = sample_period();
    for (int k = 0; k < size(); ++k)
        for (int n = 0; n < n_time_samples; ++n)
            psi(n, k) = evaluate(k, t0 + n * dt);
    return psi;
}

ChirpBasis ChirpBasis::prefix(int k) const
{
    if (k < 1 || k > size())
        throw std::invalid_argument("ChirpBasis::prefix: k out of range");
    ChirpBasis out = *this;
    out.chirps.resize(static_cast<std::size_t>(k));
    return out;
}

// ---- ranges and grid ----------------------------------------------------------------

ChirpRanges derive_chirp_ranges(const ScenarioConfig &config, std::span<const ClusterPair> snapshot, double t_ref)
{
    const double lambda = config.wavelength();
    double a_lo = std::numeric_limits<double>::infinity(), a_hi = -a_lo;
    double b_lo = a_lo, b_hi = -a_lo;
    bool any = false;

    for (const auto &cluster : snapshot)
    {
        if (!cluster.alive_at(t_ref))
            continue;
        for (int m = 0; m < cluster.n_rays(); ++m)
        {
            // Tx-side terms vanish for a fixed Tx and static clusters
            std::vector<std::pair<double, double>> tx_terms;
            for (int p = 0; p < config.tx_array.n_elements; ++p)
            {
                const auto geo = doppler_geometry(config.tx_array, cluster.tx_scatterer(m, t_ref), cluster.tx.velocity,
                                                  p, t_ref);
                tx_terms.emplace_back(doppler_offset(geo, lambda), geo.speed > 0.0 ? doppler_rate(geo, lambda) : 0.0);
            }
            for (int q = 0; q < config.rx_array.n_elements; ++q)
            {
                const auto geo = doppler_geometry(config.rx_array, cluster.rx_scatterer(m, t_ref), cluster.rx.velocity,
                                                  q, t_ref);
                const double alpha = doppler_offset(geo, lambda);
                const double beta = geo.speed > 0.0 ? doppler_rate(geo, lambda) : 0.0;
                for (const auto &[ta, tb] : tx_terms)
                {
                    a_lo = std::min(a_lo, alpha + ta);
                    a_hi = std::max(a_hi, alpha + ta);
                    b_lo = std::min(b_lo, beta + tb);
                    b_hi = std::max(b_hi, beta + tb);
                }
                any = true;
            }
        }
    }
    if (!any)
        throw std::invalid_argument("derive_chirp_ranges: no rays alive at t_ref");

    const double a_margin = 0.05 * (a_hi - a_lo);
    const double b_margin = 0.05 * (b_hi - b_lo);
    return {a_lo - a_margin, a_hi + a_margin, b_lo - b_margin, b_hi + b_margin};
}

ChirpRanges ensure_resolvable(const ChirpRanges &r, int k, double window)
{
    if (k < 1)
        throw std::invalid_argument("ensure_resolvable: K must be >= 1");
    ChirpRanges out = r;
    // Adjacent alpha values closer than 1/T_w, or beta values closer than 1/T_w^2, give columns
    // that differ by less than one cycle of phase over the window.
    const int k_alpha = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
    const int k_beta = (k + k_alpha - 1) / k_alpha;
    const double min_alpha = std::max(k_alpha - 1, 1) / window;
    if (!(r.alpha_hi - r.alpha_lo >= min_alpha))
    {
        const double mid = 0.5 * (r.alpha_lo + r.alpha_hi);
        out.alpha_lo = mid - 0.5 * min_alpha;
        out.alpha_hi = mid + 0.5 * min_alpha;
    }
    const double min_beta = std::max(k_beta - 1, 1) / (window * window);
    if (!(r.beta_hi - r.beta_lo >= min_beta))
    {
        const double mid = 0.5 * (r.beta_lo + r.beta_hi);
        out.beta_lo = mid - 0.5 * min_beta;
        out.beta_hi = mid + 0.5 * min_beta;
    }
    return out;
}

ChirpBasis build_basis(int k, const ChirpRanges &ranges, double t0, double window, int n_time_samples)
{
    if (k < 1)
        throw std::invalid_argument("build_basis: K must be >= 1");
    if (k > n_time_samples)
        throw std::invalid_argument("build_basis: K = " + std::to_string(k) + " exceeds the window's " +
                                    std::to_string(n_time_samples) + " time samples");
    if (!(window > 0.0))
        throw std::invalid_argument("build_basis: window length must be positive");
    for (double v : {ranges.alpha_lo, ranges.alpha_hi, ranges.beta_lo, ranges.beta_hi})
        if (!std::isfinite(v))
            throw std::invalid_argument("build_basis: ranges must be finite");

    const int k_alpha = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
    const int k_beta = (k + k_alpha - 1) / k_alpha;
    auto grid = [](double lo, double hi, int n, int i) {
        return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    };

    ChirpBasis basis;
    basis.t0 = t0;
    basis.window = window;
    basis.n_time_samples = n_time_samples;
    for (int jb = 0; jb < k_beta && basis.size() < k; ++jb)
        for (int ja = 0; ja < k_alpha && basis.size() < k; ++ja)
            basis.chirps.push_back({grid(ranges.alpha_lo, ranges.alpha_hi, k_alpha, ja),
                                    grid(ranges.beta_lo, ranges.beta_hi, k_beta, jb)});
    return basis;
}

// ---- Gram-Schmidt and projection -------------------------------------------------------

Orthogonalization gram_schmidt(const CMatrix &psi, int passes)
{
    if (psi.cols() < 1 || psi.rows() < psi.cols())
        throw std::invalid_argument("gram_schmidt: need 1 <= K <= n");
    if (passes < 1)
        throw std::invalid_argument("gram_schmidt: passes must be >= 1");

    const Eigen::Index n = psi.rows();
    const Eigen::Index k_total = psi.cols();
    Orthogonalization out;
    out.phi.resize(n, k_total);
    CMatrix c = CMatrix::Identity(k_total, k_total); // unit upper triangular, psi = phi * c
    std::vector<double> g_norm2(static_cast<std::size_t>(k_total));
    const double ref_norm = psi.col(0).norm();
    if (!(ref_norm > 0.0))
        throw NearDependentBasis("gram_schmidt: first chirp has zero norm", 0, 0.0);

    Eigen::VectorXcd coeffs(k_total);
    for (Eigen::Index k = 0; k < k_total; ++k)
    {
        Eigen::VectorXcd g = psi.col(k);
        for (int pass = 0; pass < passes && k > 0; ++pass)
        {
            // classical sweep: every coefficient from the same vector, then subtract
            const auto done = out.phi.leftCols(k);
            coeffs.head(k) = done.adjoint() * g; // <g, g_j> = g_j^H g
            for (Eigen::Index j = 0; j < k; ++j)
                coeffs(j) /= g_norm2[static_cast<std::size_t>(j)];
            g -= done * coeffs.head(k);
            c.col(k).head(k) += coeffs.head(k);
        }
        const double norm = g.norm();
        const double ratio = norm / ref_norm;
        out.pivot_ratios.push_back(ratio);
        if (!(ratio > dependence_threshold))
        {
            std::ostringstream msg;
            msg << "gram_schmidt: chirp " << k << " is numerically dependent on earlier chirps (pivot ratio "
                << ratio << ")";
            throw NearDependentBasis(msg.str(), static_cast<int>(k), ratio);
        }
        out.phi.col(k) = g;
        g_norm2[static_cast<std::size_t>(k)] = norm * norm;
    }

    // G = C^{-1} by back substitution on the unit upper triangular C
    out.g = CMatrix::Zero(k_total, k_total);
    for (Eigen::Index col = 0; col < k_total; ++col)
    {
        out.g(col, col) = 1.0;
        for (Eigen::Index row = col - 1; row >= 0; --row)
        {
            cx acc{0.0, 0.0};
            for (Eigen::Index j = row + 1; j <= col; ++j)
                acc += c(row, j) * out.g(j, col);
            out.g(row, col) = -acc;
        }
    }
    return out;
}

CMatrix project(const CMatrix &h, const Orthogonalization &ortho)
{
    if (h.rows() != ortho.phi.rows())
        throw std::invalid_argument("project: h has " + std::to_string(h.rows()) + " time samples, basis has " +
                                    std::to_string(ortho.phi.rows()));
    CMatrix x = ortho.phi.adjoint() * h; // x_ji = <h_i, g_j> before scaling
    for (Eigen::Index j = 0; j < x.rows(); ++j)
        x.row(j) /= ortho.phi.col(j).squaredNorm();
    return ortho.g * x;
}

// ---- packages ----------------------------------------------------------------------------

std::size_t ProjectionPackage::payload_bytes() const
{
    return static_cast<std::size_t>(n_rx) * n_tx * n_chirps() * n_freq() * sizeof(cx);
}

std::vector<cx> ProjectionPackage::reconstruct_row(int q, int p, double t) const
{
    if (!basis.covers(t))
        throw std::out_of_range("reconstruct: t = " + std::to_string(t) + " s outside window [" +
                                std::to_string(basis.t0) + ", " + std::to_string(basis.t0 + basis.window) + "]");
    Eigen::VectorXcd b(n_chirps());
    for (int k = 0; k < n_chirps(); ++k)
        b(k) = basis.evaluate(k, t);
    const Eigen::VectorXcd row = coeff(q, p).transpose() * b;
    return {row.data(), row.data() + row.size()};
}

cx reconstruct(const ProjectionPackage &package, int q, int p, double t, int f_bin)
{
    if (!package.basis.covers(t))
        throw std::out_of_range("reconstruct: t = " + std::to_string(t) + " s outside the package window");
    if (f_bin < 0 || f_bin >= package.n_freq())
        throw std::out_of_range("reconstruct: frequency bin out of range");
    const CMatrix &a = package.coeff(q, p);
    cx acc{0.0, 0.0};
    for (int k = 0; k < package.n_chirps(); ++k)
        acc += a(k, f_bin) * package.basis.evaluate(k, t);
    return acc;
}

std::vector<Window> make_windows(int n_time, int samples_per_window, int min_samples)
{
    if (n_time < 1 || samples_per_window < 1)
        throw std::invalid_argument("make_windows: sizes must be positive");
    std::vector<Window> windows;
    for (int start = 0; start < n_time; start += samples_per_window)
        windows.push_back({start, std::min(samples_per_window, n_time - start)});
    if (windows.size() > 1 && windows.back().count < min_samples)
    {
        const int extra = windows.back().count;
        windows.pop_back();
        windows.back().count += extra;
    }
    return windows;
}

RangeProvider ranges_from_clusters(const ScenarioConfig &config, std::vector<ClusterPair> clusters)
{
    return [config, clusters = std::move(clusters)](const Window &, double t0, double) {
        return derive_chirp_ranges(config, clusters, t0);
    };
}

RangeProvider fixed_ranges(const ChirpRanges &ranges)
{
    return [ranges](const Window &, double, double) { return ranges; };
}

std::vector<ProjectionPackage> project_grid(const CtfGrid &ctf, const std::vector<Window> &windows,
                                            const RangeProvider &ranges, const ProjectionOptions &options)
{
    if (ctf.n_time() < 2)
        throw std::invalid_argument("project_grid: grid needs at least two time samples");
    const double t_step = ctf.t_axis[1] - ctf.t_axis[0];
    int expected_start = 0;
    for (const auto &w : windows)
    {
        if (w.start != expected_start || w.count < 1)
            throw std::invalid_argument("project_grid: windows must partition the time axis contiguously");
        expected_start += w.count;
    }
    if (expected_start != ctf.n_time())
        throw std::invalid_argument("project_grid: windows do not cover the time axis");

    std::vector<ProjectionPackage> packages;
    packages.reserve(windows.size());
    for (const auto &w : windows)
    {
        const double t0 = ctf.t_axis[static_cast<std::size_t>(w.start)];
        const double length = w.count * t_step;
        const ChirpRanges r = ensure_resolvable(ranges(w, t0, length), options.k, length);
        ProjectionPackage pkg;
        pkg.n_rx = ctf.n_rx;
        pkg.n_tx = ctf.n_tx;
        pkg.basis = build_basis(options.k, r, t0, length, w.count);
        pkg.f_axis = ctf.f_axis;
        pkg.f_c = ctf.f_c;
        pkg.normalization = ctf.normalization;

        const Orthogonalization ortho = gram_schmidt(pkg.basis.evaluate(), options.gram_schmidt_passes);
        using RowMajor = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        for (int q = 0; q < ctf.n_rx; ++q)
            for (int p = 0; p < ctf.n_tx; ++p)
            {
                const cx *first = ctf.data.data() + ctf.index(q, p, w.start, 0);
                const Eigen::Map<const RowMajor> h(first, w.count, ctf.n_freq());
                pkg.coefficients.push_back(project(h, ortho));
            }
        packages.push_back(std::move(pkg));
    }
    return packages;
}

CtfGrid reconstruct_grid(std::span<const ProjectionPackage> packages)
{
    if (packages.empty())
        throw std::invalid_argument("reconstruct_grid: no packages");
    const auto &first = packages.front();
    std::vector<double> t_axis;
    for (const auto &pkg : packages)
        for (int n = 0; n < pkg.basis.n_time_samples; ++n)
            t_axis.push_back(pkg.basis.t0 + n * pkg.basis.sample_period());

    CtfGrid grid(first.n_rx, first.n_tx, t_axis, first.f_axis, first.f_c);
    grid.normalization = first.normalization;
    int ti = 0;
    for (const auto &pkg : packages)
    {
        if (pkg.n_rx != grid.n_rx || pkg.n_tx != grid.n_tx || pkg.n_freq() != grid.n_freq())
            throw std::invalid_argument("reconstruct_grid: packages disagree on dimensions");
        const CMatrix psi = pkg.basis.evaluate();
        for (int q = 0; q < grid.n_rx; ++q)
            for (int p = 0; p < grid.n_tx; ++p)
            {
                const CMatrix h = psi * pkg.coeff(q, p);
                for (int n = 0; n < pkg.basis.n_time_samples; ++n)
                    for (int f = 0; f < grid.n_freq(); ++f)
                        grid.at(q, p, ti + n, f) = h(n, f);
            }
        ti += pkg.basis.n_time_samples;
    }
    return grid;
}

const ProjectionPackage &package_at(std::span<const ProjectionPackage> packages, double t)
{
    for (auto it = packages.rbegin(); it != packages.rend(); ++it)
        if (it->basis.t0 <= t && it->basis.covers(t))
            return *it;
    if (!packages.empty() && packages.front().basis.covers(t))
        return packages.front();
    throw std::out_of_range("package_at: t = " + std::to_string(t) + " s is not covered by any window");
}

} // namespace chemu
