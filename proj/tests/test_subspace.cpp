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

#include <doctest.h>

#include <cmath>
#include <random>

using namespace chemu;

namespace
{
CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            m(i, j) = cx(g(rng), g(rng));
    return m;
}

// Least squares through the normal equations, solved in extended precision
CMatrix normal_equations(const CMatrix &psi, const CMatrix &h)
{
    using CL = std::complex<long double>;
    using ML = Eigen::Matrix<CL, Eigen::Dynamic, Eigen::Dynamic>;
    const ML a = psi.cast<CL>();
    const ML gram = a.adjoint() * a;
    const ML rhs = a.adjoint() * h.cast<CL>();
    const ML x = gram.fullPivLu().solve(rhs);
    CMatrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            out(i, j) = cx(static_cast<double>(x(i, j).real()), static_cast<double>(x(i, j).imag()));
    return out;
}

double rel(const CMatrix &a, const CMatrix &b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

ChirpBasis doppler_basis(int k, int n, double window)
{
    const ChirpRanges r = ensure_resolvable({-87.0, 87.0, 0.0, 10.0}, k, window);
    return build_basis(k, r, 0.0, window, n);
}

ScenarioConfig single_ray_scenario()
{
    ScenarioConfig cfg;
    cfg.rx_array.n_elements = 1;
    cfg.tx_array.n_elements = 1;
    cfg.rx_array.origin = Vec3::Zero();
    cfg.rx_array.velocity = {VelocitySegment{0.0, Vec3(10.0, 0.0, 0.0)}};
    return cfg;
}

ClusterPair point_cluster(const Vec3 &tx_point, const Vec3 &rx_point)
{
    ClusterPair c;
    c.tx.center = tx_point;
    c.rx.center = rx_point;
    c.tx.offsets = {Vec3::Zero()};
    c.rx.offsets = {Vec3::Zero()};
    return c;
}
} // namespace

TEST_CASE("derive_chirp_ranges: default scenario stays inside the maximum Doppler")
{
    ScenarioConfig cfg;
    cfg.t_total = 0.2;
    const auto tl = simulate_cluster_timeline(cfg);
    const ChirpRanges r = derive_chirp_ranges(cfg, tl.clusters, 0.0);
    // undo the 5% margin on each side
    const double a_span = (r.alpha_hi - r.alpha_lo) / 1.1;
    const double a_lo = r.alpha_lo + 0.05 * a_span, a_hi = r.alpha_hi - 0.05 * a_span;
    const double f_max = 10.0 / cfg.wavelength();
    CHECK(f_max == doctest::Approx(86.7266).epsilon(1e-5));
    CHECK(a_lo >= -f_max - 1e-9);
    CHECK(a_hi <= f_max + 1e-9);
    CHECK(a_lo < a_hi);
    const double b_span = (r.beta_hi - r.beta_lo) / 1.1;
    CHECK(r.beta_lo + 0.05 * b_span >= -1e-9); // sin^2 term over a positive distance
    CHECK(r.beta_lo <= r.beta_hi);
}

TEST_CASE("derive_chirp_ranges: single ray dead ahead collapses alpha at -v/lambda")
{
    ScenarioConfig cfg = single_ray_scenario();
    const std::vector<ClusterPair> set{point_cluster(Vec3(0.0, 60.0, 35.0), Vec3(300.0, 0.0, 0.0))};
    const ChirpRanges r = derive_chirp_ranges(cfg, set, 0.0);
    CHECK(r.alpha_lo == doctest::Approx(-86.7266).epsilon(1e-5));
    CHECK(r.alpha_hi == r.alpha_lo);
    CHECK(r.beta_lo == 0.0);

    // K = 30 gives a 6 x 5 grid, so alpha spans at least 5 / T_w
    const ChirpRanges w = ensure_resolvable(r, 30, 0.1);
    CHECK(w.alpha_hi - w.alpha_lo == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(0.5 * (w.alpha_hi + w.alpha_lo) == doctest::Approx(r.alpha_lo).epsilon(1e-12));
    CHECK(w.beta_hi - w.beta_lo == doctest::Approx(400.0).epsilon(1e-12));
}

TEST_CASE("derive_chirp_ranges: no live rays is an error")
{
    ScenarioConfig cfg;
    CHECK_THROWS_AS(derive_chirp_ranges(cfg, {}, 0.0), std::invalid_argument);
}

TEST_CASE("ensure_resolvable: wide ranges pass through unchanged")
{
    const ChirpRanges r{-80.0, 80.0, -500.0, 500.0};
    const ChirpRanges out = ensure_resolvable(r, 30, 0.1);
    CHECK(out.alpha_lo == r.alpha_lo);
    CHECK(out.alpha_hi == r.alpha_hi);
    CHECK(out.beta_lo == r.beta_lo);
    CHECK(out.beta_hi == r.beta_hi);
}

TEST_CASE("build_basis: K = 9 grid enumerates alpha fastest from corner to corner")
{
    const ChirpBasis b = build_basis(9, {-87.0, 87.0, 0.0, 10.0}, 0.0, 0.1, 100);
    REQUIRE(b.size() == 9);
    CHECK(b.chirps.front() == ChirpParam{-87.0, 0.0});
    CHECK(b.chirps[1] == ChirpParam{0.0, 0.0});
    CHECK(b.chirps[3] == ChirpParam{-87.0, 5.0});
    CHECK(b.chirps[4] == ChirpParam{0.0, 5.0});
    CHECK(b.chirps.back() == ChirpParam{87.0, 10.0});
}

TEST_CASE("build_basis: K = 30 uses a 6 x 5 grid; K = 1 sits at the centre")
{
    const ChirpBasis b = build_basis(30, {-60.0, 60.0, -20.0, 20.0}, 0.0, 0.1, 100);
    REQUIRE(b.size() == 30);
    CHECK(b.chirps[5] == ChirpParam{60.0, -20.0});
    CHECK(b.chirps[6] == ChirpParam{-60.0, -10.0});
    CHECK(b.chirps[29] == ChirpParam{60.0, 20.0});
    const ChirpBasis one = build_basis(1, {-60.0, 60.0, -20.0, 20.0}, 0.0, 0.1, 100);
    CHECK(one.chirps[0] == ChirpParam{0.0, 0.0});
}

TEST_CASE("build_basis: rejects K above the window length and bad ranges")
{
    CHECK_THROWS_AS(build_basis(0, {-1.0, 1.0, 0.0, 1.0}, 0.0, 0.1, 100), std::invalid_argument);
    CHECK_THROWS_AS(build_basis(101, {-1.0, 1.0, 0.0, 1.0}, 0.0, 0.1, 100), std::invalid_argument);
    CHECK_THROWS_AS(build_basis(4, {-1.0, INFINITY, 0.0, 1.0}, 0.0, 0.1, 100), std::invalid_argument);
}

TEST_CASE("ChirpBasis: columns are unit-modulus chirps in window-local time")
{
    ChirpBasis b = build_basis(4, {-10.0, 10.0, 0.0, 100.0}, 5.0, 0.1, 50);
    const CMatrix psi = b.evaluate();
    for (Eigen::Index k = 0; k < psi.cols(); ++k)
        for (Eigen::Index n = 0; n < psi.rows(); ++n)
        {
            CHECK(std::abs(psi(n, k)) == doctest::Approx(1.0).epsilon(1e-14));
            const double s = static_cast<double>(n) * 0.002;
            const auto &c = b.chirps[static_cast<std::size_t>(k)];
            const cx expected = std::exp(cx(0.0, two_pi * (c.alpha * s + 0.5 * c.beta * s * s)));
            CHECK(std::abs(psi(n, k) - expected) < 1e-12);
        }
    CHECK(b.covers(5.1));
    CHECK_FALSE(b.covers(5.2));
    CHECK(b.prefix(2).chirps == std::vector<ChirpParam>(b.chirps.begin(), b.chirps.begin() + 2));
}

TEST_CASE("gram_schmidt: K = 1 returns the column itself")
{
    const CMatrix psi = random_matrix(40, 1, 1);
    const auto o = gram_schmidt(psi);
    CHECK((o.phi - psi).norm() == 0.0);
    CHECK(o.g(0, 0) == cx(1.0, 0.0));
}

TEST_CASE("gram_schmidt: already orthogonal columns give the identity")
{
    const int n = 32;
    CMatrix psi(n, 5);
    for (int k = 0; k < 5; ++k)
        for (int i = 0; i < n; ++i)
            psi(i, k) = std::polar(1.0, two_pi * k * i / n);
    const auto o = gram_schmidt(psi);
    CHECK((o.g - CMatrix::Identity(5, 5)).norm() < 1e-13);
    CHECK(rel(o.phi, psi) < 1e-13);
}

TEST_CASE("gram_schmidt: random 256 x 8 gives orthogonal columns and phi = psi G")
{
    const CMatrix psi = random_matrix(256, 8, 42);
    const auto o = gram_schmidt(psi);
    const CMatrix gram = o.phi.adjoint() * o.phi;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            if (i != j)
                CHECK(std::abs(gram(i, j)) <= 1e-12 * std::sqrt(std::abs(gram(i, i)) * std::abs(gram(j, j))));
    CHECK(rel(psi * o.g, o.phi) < 1e-12);
    for (int i = 0; i < 8; ++i)
    {
        CHECK(o.g(i, i) == cx(1.0, 0.0));
        for (int j = 0; j < i; ++j)
            CHECK(o.g(i, j) == cx(0.0, 0.0));
    }
}

TEST_CASE("gram_schmidt: a repeated column is reported with its index")
{
    CMatrix psi = random_matrix(64, 4, 3);
    psi.col(2) = psi.col(0) * cx(2.0, -1.0);
    try
    {
        (void)gram_schmidt(psi);
        FAIL("expected NearDependentBasis");
    }
    catch (const NearDependentBasis &e)
    {
        CHECK(e.column() == 2);
        CHECK(e.pivot_ratio() <= dependence_threshold);
    }
}

TEST_CASE("gram_schmidt: a Doppler-range chirp basis stays orthogonal with two passes")
{
    const ChirpBasis b = build_basis(30, {-87.0, 87.0, -200.0, 200.0}, 0.0, 0.1, 100);
    const CMatrix psi = b.evaluate();
    const auto o = gram_schmidt(psi, 2);
    const CMatrix gram = o.phi.adjoint() * o.phi;
    double worst = 0.0;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j)
            if (i != j)
                worst = std::max(worst, std::abs(gram(i, j)) / std::sqrt(std::abs(gram(i, i) * gram(j, j))));
    CHECK(worst < 1e-10);
}

TEST_CASE("project: unit basis vectors pick out rows; zero input gives zero")
{
    const CMatrix psi = CMatrix::Identity(10, 10).leftCols(4);
    const auto o = gram_schmidt(psi);
    const CMatrix h = random_matrix(10, 3, 8);
    CHECK(rel(project(h, o), h.topRows(4)) < 1e-15);
    CHECK(project(CMatrix::Zero(10, 3), o).norm() == 0.0);
    CHECK_THROWS_AS(project(CMatrix::Zero(9, 3), o), std::invalid_argument);
}

TEST_CASE("project: matches the normal-equations oracle")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        const CMatrix psi = random_matrix(128, 12, 100 + seed);
        const CMatrix h = random_matrix(128, 5, 200 + seed);
        const CMatrix a = project(h, gram_schmidt(psi));
        CHECK(rel(a, normal_equations(psi, h)) < 1e-10);
        // residual orthogonal to every column
        const CMatrix residual = h - psi * a;
        CHECK((psi.adjoint() * residual).norm() <= 1e-10 * psi.norm() * h.norm());
    }
}

TEST_CASE("project: chirp basis on chirp-plus-noise data")
{
    const ChirpBasis b = doppler_basis(30, 100, 0.1);
    const CMatrix psi = b.evaluate();
    const CMatrix h = psi * random_matrix(30, 6, 5) + 0.1 * random_matrix(100, 6, 6);
    const CMatrix a = project(h, gram_schmidt(psi));
    CHECK(rel(a, normal_equations(psi, h)) < 1e-8);
}

TEST_CASE("project: idempotent on the span, linear in the data")
{
    const ChirpBasis b = doppler_basis(16, 80, 0.08);
    const CMatrix psi = b.evaluate();
    const auto o = gram_schmidt(psi);
    const CMatrix h1 = random_matrix(80, 4, 10), h2 = random_matrix(80, 4, 11);
    const CMatrix a = project(h1, o);
    CHECK(rel(project(psi * a, o), a) < 1e-9);
    const cx s(0.3, -1.7);
    const CMatrix lhs = project(s * h1 + h2, o);
    CHECK(rel(lhs, s * a + project(h2, o)) < 1e-12);
}

TEST_CASE("project: residual energy is non-increasing along basis prefixes")
{
    const ChirpBasis b = doppler_basis(30, 100, 0.1);
    const CMatrix h = random_matrix(100, 8, 77);
    double previous = INFINITY;
    for (int k = 1; k <= 30; ++k)
    {
        const CMatrix psi = b.prefix(k).evaluate();
        const double err = (h - psi * project(h, gram_schmidt(psi))).squaredNorm();
        CHECK(err <= previous * (1.0 + 1e-12));
        previous = err;
    }
}

TEST_CASE("reconstruct: pointwise values equal the matrix product Psi A")
{
    CtfGrid ctf(2, 2, {}, {-1.0, 0.0, 1.0}, 1e9);
    for (int n = 0; n < 60; ++n)
        ctf.t_axis.push_back(0.002 * n);
    ctf = CtfGrid(2, 2, ctf.t_axis, ctf.f_axis, 1e9);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (auto &v : ctf.data)
        v = cx(g(rng), g(rng));
    const auto pkgs = project_grid(ctf, make_windows(60, 30), fixed_ranges({-50.0, 50.0, -500.0, 500.0}), {10, 2});
    REQUIRE(pkgs.size() == 2);
    for (const auto &pkg : pkgs)
    {
        const CMatrix psi = pkg.basis.evaluate();
        for (int q = 0; q < 2; ++q)
            for (int p = 0; p < 2; ++p)
            {
                const CMatrix h = psi * pkg.coeff(q, p);
                for (int n = 0; n < 30; ++n)
                {
                    const double t = pkg.basis.t0 + n * pkg.basis.sample_period();
                    const auto row = pkg.reconstruct_row(q, p, t);
                    for (int f = 0; f < 3; ++f)
                    {
                        const double scale = std::max(1.0, std::abs(h(n, f)));
                        CHECK(std::abs(reconstruct(pkg, q, p, t, f) - h(n, f)) <= 1e-12 * scale);
                        CHECK(std::abs(row[static_cast<std::size_t>(f)] - h(n, f)) <= 1e-12 * scale);
                    }
                }
            }
        CHECK_THROWS_AS(reconstruct(pkg, 0, 0, pkg.basis.t0 + 1.0, 0), std::out_of_range);
        CHECK_THROWS_AS(reconstruct(pkg, 0, 0, pkg.basis.t0, 3), std::out_of_range);
    }
    CHECK(pkgs[0].payload_bytes() == 2u * 2u * 10u * 3u * 16u);
}

TEST_CASE("reconstruct: a full-rank window reproduces the grid")
{
    const int n = 12;
    std::vector<double> t_axis;
    for (int i = 0; i < n; ++i)
        t_axis.push_back(0.01 * i);
    CtfGrid ctf(1, 1, t_axis, {-2.0, -1.0, 0.0, 1.0}, 1e9);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (auto &v : ctf.data)
        v = cx(g(rng), g(rng));
    const auto pkgs = project_grid(ctf, make_windows(n, n), fixed_ranges({-40.0, 40.0, -300.0, 300.0}), {n, 2});
    const CtfGrid back = reconstruct_grid(pkgs);
    double worst = 0.0;
    for (std::size_t i = 0; i < ctf.data.size(); ++i)
        worst = std::max(worst, std::abs(back.data[i] - ctf.data[i]));
    CHECK(worst <= 1e-9);
    CHECK(back.t_axis.size() == t_axis.size());
}

TEST_CASE("make_windows: partitions, merges a short remainder")
{
    auto w = make_windows(1000, 100);
    REQUIRE(w.size() == 10);
    CHECK(w.back().start == 900);
    CHECK(w.back().count == 100);
    w = make_windows(1005, 100, 30);
    REQUIRE(w.size() == 10);
    CHECK(w.back().count == 105);
    w = make_windows(1050, 100, 30);
    REQUIRE(w.size() == 11);
    CHECK(w.back().count == 50);
    w = make_windows(20, 100, 30);
    REQUIRE(w.size() == 1);
    CHECK(w[0].count == 20);
}

TEST_CASE("package_at: a boundary instant belongs to the later window")
{
    std::vector<double> t_axis;
    for (int i = 0; i < 40; ++i)
        t_axis.push_back(0.01 * i);
    CtfGrid ctf(1, 1, t_axis, {0.0, 1.0}, 1e9);
    for (auto &v : ctf.data)
        v = cx(1.0, 0.0);
    const auto pkgs = project_grid(ctf, make_windows(40, 20), fixed_ranges({-10.0, 10.0, 0.0, 0.0}), {4, 2});
    CHECK(&package_at(pkgs, 0.0) == &pkgs[0]);
    CHECK(&package_at(pkgs, 0.199) == &pkgs[0]);
    CHECK(&package_at(pkgs, 0.2) == &pkgs[1]);
    CHECK(&package_at(pkgs, 0.4) == &pkgs[1]);
    CHECK_THROWS_AS(package_at(pkgs, 0.5), std::out_of_range);
}

TEST_CASE("project_grid: rejects windows that do not tile the grid")
{
    std::vector<double> t_axis{0.0, 0.01, 0.02, 0.03};
    CtfGrid ctf(1, 1, t_axis, {0.0}, 1e9);
    CHECK_THROWS_AS(project_grid(ctf, {{0, 2}}, fixed_ranges({-1.0, 1.0, 0.0, 1.0}), {1, 2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(project_grid(ctf, {{0, 2}, {1, 3}}, fixed_ranges({-1.0, 1.0, 0.0, 1.0}), {1, 2}),
                    std::invalid_argument);
}
