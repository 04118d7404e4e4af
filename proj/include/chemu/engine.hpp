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

#ifndef CHEMU_ENGINE_HPP
#define CHEMU_ENGINE_HPP

#include "chemu/fft.hpp"
#include "chemu/subspace.hpp"

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace chemu
{

struct EngineConfig
{
    int n_fft = 1024;            // N_H, power of two
    double tau_max = 0.0;        // longest emulated delay, s
    double sample_period = 0.0;  // T_s, s
    int n_tx = 1;                // P
    int n_rx = 1;                // Q
    bool single_precision = false;
    // Signal sampled faster than the channel band: bins outside the band carry zero gain
    bool zero_outside_band = false;

    int n_overlap() const; // N_a = floor(tau_max / T_s)
    int n_block() const { return n_fft - n_overlap(); } // N_s
    double block_period() const { return n_block() * sample_period; } // T_ch
    void validate() const;
};

// Any time-varying MIMO transfer function sampled on a uniform frequency axis
class ChannelSource
{
public:
    virtual ~ChannelSource() = default;
    virtual int n_rx() const = 0;
    virtual int n_tx() const = 0;
    virtual const std::vector<double> &f_axis() const = 0;
    virtual double t_begin() const = 0;
    virtual double t_end() const = 0;
    virtual std::vector<cx> row(int q, int p, double t) const = 0;
};

// Linear interpolation between grid rows; the last row holds for one time step
class GridSource final : public ChannelSource
{
public:
    explicit GridSource(const CtfGrid &grid);
    int n_rx() const override { return grid_.n_rx; }
    int n_tx() const override { return grid_.n_tx; }
    const std::vector<double> &f_axis() const override { return grid_.f_axis; }
    double t_begin() const override;
    double t_end() const override;
    std::vector<cx> row(int q, int p, double t) const override;

private:
    const CtfGrid &grid_;
};

class PackageSource final : public ChannelSource
{
public:
    explicit PackageSource(std::span<const ProjectionPackage> packages);
    int n_rx() const override { return packages_.front().n_rx; }
    int n_tx() const override { return packages_.front().n_tx; }
    const std::vector<double> &f_axis() const override { return packages_.front().f_axis; }
    double t_begin() const override;
    double t_end() const override;
    std::vector<cx> row(int q, int p, double t) const override;

private:
    std::span<const ProjectionPackage> packages_;
};

// Time-invariant channel, rows stored [q][p]
class StaticSource final : public ChannelSource
{
public:
    StaticSource(int n_rx, int n_tx, std::vector<double> f_axis, std::vector<std::vector<cx>> rows);
    int n_rx() const override { return n_rx_; }
    int n_tx() const override { return n_tx_; }
    const std::vector<double> &f_axis() const override { return f_axis_; }
    double t_begin() const override;
    double t_end() const override;
    std::vector<cx> row(int q, int p, double t) const override;

private:
    int n_rx_, n_tx_;
    std::vector<double> f_axis_;
    std::vector<std::vector<cx>> rows_;
};

// H[q][p][m] on the engine's DFT bins
struct Cfr
{
    int n_rx = 0;
    int n_tx = 0;
    int n_fft = 0;
    std::vector<cx> h;

    std::span<const cx> bins(int q, int p) const
    {
        return {h.data() + (static_cast<std::size_t>(q) * n_tx + p) * n_fft, static_cast<std::size_t>(n_fft)};
    }
};

// Baseband frequency of DFT bin m, wrapped to [-1/(2 T_s), 1/(2 T_s))
double bin_frequency(int m, int n_fft, double sample_period);

Cfr cfr_snapshot(const ChannelSource &source, double t, const EngineConfig &config);

struct SignalBlock
{
    std::vector<cx> samples; // N_s values
    long block_index = 0;
    int antenna = 0;
    bool partial = false; // zero padded past the end of the stream
};

struct EngineState
{
    std::vector<std::vector<cx>> tails; // per output antenna, N_a samples
    long block_index = 0;
    double t = 0.0; // channel time of the next block

    static EngineState initial(const EngineConfig &config, double t0 = 0.0);
};

struct BlockStats
{
    long block_index = 0;
    double t = 0.0;
    long transforms = 0;
    int transform_size = 0;
    long macs = 0; // complex multiply-accumulates
};

struct StreamResult
{
    std::vector<std::vector<cx>> outputs; // Q streams, input length + N_a
    std::vector<BlockStats> stats;
};

class Engine
{
public:
    explicit Engine(const EngineConfig &config);

    const EngineConfig &config() const { return config_; }

    // One overlap-add step. Advances `state`; fills `stats` when given.
    std::vector<SignalBlock> process_block(EngineState &state, std::span<const SignalBlock> inputs, const Cfr &h,
                                           BlockStats *stats = nullptr) const;

    // Splits equal-length inputs into blocks, refreshes H every block at t0 + i * T_ch, flushes the tail
    StreamResult run_stream(const ChannelSource &source, const std::vector<std::vector<cx>> &inputs,
                            double t0) const;

private:
    EngineConfig config_;
    Fft fft_;
};

// N_a from the q-quantile of absolute ray delays over the cluster history, sampled every t_step
double estimate_tau_max(const ScenarioConfig &config, std::span<const ClusterPair> clusters, double quantile = 0.999,
                        double t_step = 0.01);

void write_stats_csv(std::ostream &out, std::span<const BlockStats> stats);

} // namespace chemu

#endif
