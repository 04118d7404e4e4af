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

#ifndef CHEMU_IOFMT_HPP
#define CHEMU_IOFMT_HPP

#include "chemu/subspace.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace chemu
{

// Binary layout shared by all three kinds, little-endian throughout:
//   magic    8 bytes  "CHEMU" + kind tag ("CTF", "PKG" or "SIG")
//   version  u16
//   endian   u8       always 1 (little)
//   then kind-specific dimensions, float64 axes and an interleaved (re, im) payload.
inline constexpr std::uint16_t format_version = 1;
inline constexpr std::size_t header_bytes = 11;

using Bytes = std::vector<std::uint8_t>;

// Complex sample streams, one per antenna
struct SignalData
{
    double sample_rate = 0.0; // Hz
    bool single_precision = false; // payload stored as float32 pairs
    std::vector<std::vector<cx>> channels;

    std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }
};

Bytes encode_ctf(const CtfGrid &grid);
CtfGrid decode_ctf(const Bytes &bytes);

// Several consecutive windows of one subchannel set. All windows share Q, P, K, I, f_axis,
// f_c and normalization; each carries t0, T_w, its sample count, chirp table and coefficients.
Bytes encode_packages(std::span<const ProjectionPackage> packages);
std::vector<ProjectionPackage> decode_packages(const Bytes &bytes);

Bytes encode_signal(const SignalData &signal);
SignalData decode_signal(const Bytes &bytes);

// Exact encoded size of a package file
std::size_t package_file_size(int n_rx, int n_tx, int k, int n_freq, int n_windows);

// File wrappers; writers encode fully before touching the file system
Bytes read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const Bytes &bytes);

CtfGrid read_ctf(const std::filesystem::path &path);
void write_ctf(const std::filesystem::path &path, const CtfGrid &grid);
std::vector<ProjectionPackage> read_packages(const std::filesystem::path &path);
void write_packages(const std::filesystem::path &path, std::span<const ProjectionPackage> packages);
SignalData read_signal(const std::filesystem::path &path);
void write_signal(const std::filesystem::path &path, const SignalData &signal);

// ---- scenario text files ----------------------------------------------------------
//
// One `key = value` per line, `#` starts a comment. Vectors are space separated.
// Velocities: `rx_velocity = 10 0 0` or timed segments `0: 10 0 0; 1.5: 0 10 0`.
// f_c and B are mandatory; array spacing defaults to half a wavelength at f_c.

ScenarioConfig parse_scenario(const std::string &text);
std::string format_scenario(const ScenarioConfig &config);
ScenarioConfig read_scenario(const std::filesystem::path &path);
void write_scenario(const std::filesystem::path &path, const ScenarioConfig &config);

bool same_scenario(const ScenarioConfig &a, const ScenarioConfig &b);

} // namespace chemu

#endif
