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

#include "chemu/iofmt.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

using namespace chemu;

namespace
{
std::vector<double> uniform_axis(int n, double start, double step)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = start + i * step;
    return v;
}

CtfGrid random_grid(int n_rx, int n_tx, int n_t, int n_f, std::uint64_t seed)
{
    CtfGrid g(n_rx, n_tx, uniform_axis(n_t, 0.0, 1e-3), uniform_axis(n_f, -3e7, 6e7 / n_f), 2.6e9);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    for (auto &v : g.data)
        v = cx(n(rng), n(rng));
    for (auto &s : g.normalization)
        s = std::abs(n(rng)) + 0.1;
    return g;
}

std::vector<ProjectionPackage> random_packages(int n_rx, int n_tx, int k, int n_t, int n_f, int spw,
                                               std::uint64_t seed)
{
    const CtfGrid g = random_grid(n_rx, n_tx, n_t, n_f, seed);
    return project_grid(g, make_windows(n_t, spw, k), fixed_ranges({-80.0, 80.0, -300.0, 300.0}), {k, 2});
}

SignalData random_signal(int channels, int n, bool single, std::uint64_t seed)
{
    SignalData s;
    s.sample_rate = 60e6;
    s.single_precision = single;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int c = 0; c < channels; ++c)
    {
        std::vector<cx> v(static_cast<std::size_t>(n));
        for (auto &x : v)
        {
            x = cx(g(rng), g(rng));
            if (single)
                x = cx(static_cast<float>(x.real()), static_cast<float>(x.imag()));
        }
        s.channels.push_back(std::move(v));
    }
    return s;
}

bool bitwise_equal(const std::vector<cx> &a, const std::vector<cx> &b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(cx)) == 0;
}

bool bitwise_equal(const CMatrix &a, const CMatrix &b)
{
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(cx)) == 0;
}

template <typename Decode>
void check_truncation_and_magic(const Bytes &bytes, Decode decode)
{
    // every prefix fails; once the magic fits, the failure is a truncation
    for (std::size_t len = 0; len < bytes.size(); len += (len < 64 ? 1 : 37))
    {
        const Bytes cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(len));
        if (len >= 8)
            CHECK_THROWS_AS(decode(cut), TruncatedPayload);
        else
            CHECK_THROWS_AS(decode(cut), FormatError);
    }
    for (std::size_t i = 0; i < 8; ++i)
    {
        Bytes bad = bytes;
        bad[i] ^= 0x20;
        CHECK_THROWS_AS(decode(bad), BadMagic);
    }
    Bytes longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(decode(longer), FormatError);
    Bytes version = bytes;
    version[8] = 2;
    CHECK_THROWS_AS(decode(version), FormatError);
}
} // namespace

TEST_CASE("ctf format: 2x2x16x8 round trip is bitwise exact")
{
    const CtfGrid g = random_grid(2, 2, 16, 8, 1);
    const Bytes bytes = encode_ctf(g);
    CHECK(bytes.size() == 11 + 16 + 8 + 8 * 16 + 8 * 8 + 8 * 4 + 16 * 2 * 2 * 16 * 8);
    CHECK(std::memcmp(bytes.data(), "CHEMUCTF", 8) == 0);
    const CtfGrid back = decode_ctf(bytes);
    CHECK(back.n_rx == 2);
    CHECK(back.n_tx == 2);
    CHECK(back.t_axis == g.t_axis);
    CHECK(back.f_axis == g.f_axis);
    CHECK(back.f_c == g.f_c);
    CHECK(back.normalization == g.normalization);
    CHECK(bitwise_equal(back.data, g.data));
    CHECK(encode_ctf(back) == bytes);
}

TEST_CASE("ctf format: truncation, bad magic, trailing bytes, wrong version")
{
    check_truncation_and_magic(encode_ctf(random_grid(1, 2, 5, 4, 2)), [](const Bytes &b) { return decode_ctf(b); });
}

TEST_CASE("package format: round trip over several windows")
{
    const auto pkgs = random_packages(2, 3, 6, 50, 8, 20, 3);
    REQUIRE(pkgs.size() == 3);
    const Bytes bytes = encode_packages(pkgs);
    CHECK(bytes.size() == package_file_size(2, 3, 6, 8, 3));
    const auto back = decode_packages(bytes);
    REQUIRE(back.size() == pkgs.size());
    for (std::size_t w = 0; w < pkgs.size(); ++w)
    {
        CHECK(back[w].basis.chirps == pkgs[w].basis.chirps);
        CHECK(back[w].basis.t0 == pkgs[w].basis.t0);
        CHECK(back[w].basis.window == pkgs[w].basis.window);
        CHECK(back[w].basis.n_time_samples == pkgs[w].basis.n_time_samples);
        CHECK(back[w].f_axis == pkgs[w].f_axis);
        CHECK(back[w].normalization == pkgs[w].normalization);
        REQUIRE(back[w].coefficients.size() == 6);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(bitwise_equal(back[w].coefficients[i], pkgs[w].coefficients[i]));
        // decoded package reconstructs identically
        const double t = pkgs[w].basis.t0 + 3 * pkgs[w].basis.sample_period();
        CHECK(back[w].reconstruct_row(1, 2, t) == pkgs[w].reconstruct_row(1, 2, t));
    }
    CHECK(encode_packages(back) == bytes);
}

TEST_CASE("package format: truncation, bad magic, trailing bytes, wrong version")
{
    check_truncation_and_magic(encode_packages(random_packages(1, 1, 4, 20, 4, 10, 4)),
                               [](const Bytes &b) { return decode_packages(b); });
}

TEST_CASE("package format: K = 30, I = 1024, 4 x 4 has the exact predicted size")
{
    const auto pkgs = random_packages(4, 4, 30, 100, 1024, 100, 5);
    const Bytes bytes = encode_packages(pkgs);
    const std::size_t expected = 11 + 20 + 8 + 8 * 1024 + 8 * 16 + (20 + 16 * 30 + 16 * 16 * 30 * 1024);
    CHECK(package_file_size(4, 4, 30, 1024, 1) == expected);
    CHECK(bytes.size() == expected);
    CHECK(pkgs[0].payload_bytes() == 16u * 30u * 1024u * 16u);
}

TEST_CASE("signal format: double and single precision round trips")
{
    for (bool single : {false, true})
    {
        const SignalData s = random_signal(3, 257, single, 6);
        const Bytes bytes = encode_signal(s);
        const std::size_t sample_bytes = single ? 8 : 16;
        CHECK(bytes.size() == 11 + 4 + 8 + 8 + 1 + 3 * 257 * sample_bytes);
        const SignalData back = decode_signal(bytes);
        CHECK(back.sample_rate == s.sample_rate);
        CHECK(back.single_precision == single);
        REQUIRE(back.channels.size() == 3);
        for (int c = 0; c < 3; ++c)
            CHECK(bitwise_equal(back.channels[static_cast<std::size_t>(c)], s.channels[static_cast<std::size_t>(c)]));
        check_truncation_and_magic(bytes, [](const Bytes &b) { return decode_signal(b); });
    }
}

TEST_CASE("formats: a file of one kind is refused by another decoder")
{
    const Bytes ctf = encode_ctf(random_grid(1, 1, 3, 2, 7));
    CHECK_THROWS_AS(decode_packages(ctf), BadMagic);
    CHECK_THROWS_AS(decode_signal(ctf), BadMagic);
}

TEST_CASE("formats: random objects round trip and mutated bytes never escape FormatError")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> small(1, 4), len(2, 12);
    int objects = 0;
    for (int i = 0; i < 400; ++i)
    {
        const CtfGrid g = random_grid(small(rng), small(rng), len(rng), len(rng), rng());
        const Bytes b = encode_ctf(g);
        CHECK(encode_ctf(decode_ctf(b)) == b);
        const SignalData s = random_signal(small(rng), len(rng), i % 2 == 1, rng());
        const Bytes sb = encode_signal(s);
        CHECK(encode_signal(decode_signal(sb)) == sb);
        const int k = small(rng);
        const auto p = random_packages(small(rng), small(rng), k, k + len(rng), len(rng), k + 3, rng());
        const Bytes pb = encode_packages(p);
        CHECK(encode_packages(decode_packages(pb)) == pb);
        objects += 3;

        // Flip a random byte past the header; decoders either succeed or throw FormatError
        for (const Bytes *src : {&b, &sb, &pb})
        {
            Bytes mutated = *src;
            std::uniform_int_distribution<std::size_t> pos(header_bytes, mutated.size() - 1);
            mutated[pos(rng)] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
            try
            {
                if (src == &b)
                    (void)decode_ctf(mutated);
                else if (src == &sb)
                    (void)decode_signal(mutated);
                else
                    (void)decode_packages(mutated);
            }
            catch (const FormatError &)
            {
            }
        }
    }
    CHECK(objects >= 1000);
}

TEST_CASE("formats: file helpers write and read back")
{
    const auto dir = std::filesystem::temp_directory_path() / "chemu_iofmt_test";
    std::filesystem::create_directories(dir);
    const CtfGrid g = random_grid(1, 1, 4, 4, 8);
    write_ctf(dir / "a.ctf", g);
    CHECK(bitwise_equal(read_ctf(dir / "a.ctf").data, g.data));
    CHECK_THROWS_AS(read_ctf(dir / "missing.ctf"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("scenario: only f_c and B given")
{
    const ScenarioConfig c = parse_scenario("f_c = 5.9e9\nB = 20e6\n");
    CHECK(c.f_c == 5.9e9);
    CHECK(c.bandwidth == 20e6);
    CHECK(c.rx_array.spacing == doctest::Approx(0.5 * speed_of_light / 5.9e9).epsilon(1e-15));
    CHECK(c.tx_array.spacing == c.rx_array.spacing);
    const ScenarioConfig d;
    CHECK(c.n_freq == d.n_freq);
    CHECK(c.r_tau == d.r_tau);
    CHECK(c.n_clusters_init == d.n_clusters_init);
}

TEST_CASE("scenario: empty file lists the missing keys")
{
    try
    {
        (void)parse_scenario("# nothing here\n\n");
        FAIL("expected FormatError");
    }
    catch (const FormatError &e)
    {
        const std::string what = e.what();
        CHECK(what.find("f_c") != std::string::npos);
        CHECK(what.find("B") != std::string::npos);
    }
}

TEST_CASE("scenario: invalid values and malformed lines name the key or line")
{
    auto message = [](const std::string &text) {
        try
        {
            (void)parse_scenario(text);
        }
        catch (const FormatError &e)
        {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("f_c = 2.6e9\nB = 60e6\nr_tau = 1\n").find("r_tau") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nB = 60e6\nwidth = 3\n").find("line 3") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nf_c = 2.7e9\nB = 1e6\n").find("duplicate") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nB = sixty\n").find("line 2: B") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nB 60e6\n").find("line 2") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nB = 60e6\nn_freq = 12.5\n").find("n_freq") != std::string::npos);
    CHECK(message("f_c = 2.6e9\nB = 60e6\nrx_velocity = 1 2\n").find("rx_velocity") != std::string::npos);
    CHECK(message("f_c = 2.6e9  # carrier\n\nB = 60e6\n").empty());
}

TEST_CASE("scenario: format then parse reproduces every field bit for bit")
{
    ScenarioConfig c;
    c.f_c = 3.5e9 + 1.0 / 3.0;
    c.bandwidth = 100e6;
    c.t_total = 0.7;
    c.cluster_update_period = 0.1;
    c.gamma = -0.37;
    c.azimuth_mean = 0.1 + 0.2;
    c.rx_array.velocity = {VelocitySegment{0.0, Vec3(10.0, 0.0, 0.0)}, VelocitySegment{0.35, Vec3(0.0, -3.3, 0.1)}};
    c.tx_array.spacing = 0.0;
    c.ellipsoid_stds = Vec3(1.0 / 7.0, 2.0, 3.0);
    c.rng_seed = 18446744073709551557ull;
    const ScenarioConfig back = parse_scenario(format_scenario(c));
    CHECK(same_scenario(c, back));
    CHECK(back.f_c == c.f_c);
    CHECK(back.azimuth_mean == c.azimuth_mean);
    CHECK(back.ellipsoid_stds == c.ellipsoid_stds);
    CHECK(back.rng_seed == c.rng_seed);
    CHECK(back.tx_array.spacing == 0.0);
    REQUIRE(back.rx_array.velocity.size() == 2);
    CHECK(back.rx_array.velocity[1].t_start == 0.35);
    CHECK(back.rx_array.velocity[1].velocity == c.rx_array.velocity[1].velocity);
    CHECK(format_scenario(back) == format_scenario(c));

    ScenarioConfig other = c;
    other.death_rate = 0.21;
    CHECK_FALSE(same_scenario(c, other));
}
