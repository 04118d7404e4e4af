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

#include "chemu/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace chemu
{
namespace
{
cx to_float(cx v)
{
    return {static_cast<double>(static_cast<float>(v.real())), static_cast<double>(static_cast<float>(v.imag()))};
}

void quantize(std::span<cx> values, bool enabled)
{
    if (enabled)
        for (cx &v : values)
            v = to_float(v);
}

bool is_power_of_two(int n)
{
    return n > 0 && (n & (n - 1)) == 0;
}
} // namespace

int EngineConfig::n_overlap() const
{
    // Tolerate tau_max values written as an exact multiple of T_s in decimal
    return static_cast<int>(std::floor(tau_max / sample_period + 1e-9));
}

void EngineConfig::validate() const
{
    if (!is_power_of_two(n_fft))
        throw std::invalid_argument("n_fft: must be a power of two, got " + std::to_string(n_fft));
    if (!(sample_period > 0.0) || !std::isfinite(sample_period))
        throw std::invalid_argument("sample_period: must be positive");
    if (!(tau_max >= 0.0) || !std::isfinite(tau_max))
        throw std::invalid_argument("tau_max: must be finite and nonnegative");
    if (n_tx < 1 || n_rx < 1)
        throw std::invalid_argument("antenna counts must be >= 1");
    const int n_a = n_overlap();
    if (n_a < 1)
        throw std::invalid_argument("tau_max: N_a = floor(tau_max / T_s) must be >= 1");
    if (n_a >= n_fft)
        throw std::invalid_argument("tau_max: N_a = " + std::to_string(n_a) + " leaves no room in N_H = " +
                                    std::to_string(n_fft));
}

// ---- sources ------------------------------------------------------------------

GridSource::GridSource(const CtfGrid &grid) : grid_(grid)
{
    if (grid.n_time() < 1 || grid.n_freq() < 1)
        throw std::invalid_argument("GridSource: empty grid");
}

double GridSource::t_begin() const
{
    return grid_.t_axis.front();
}

double GridSource::t_end() const
{
    const auto &t = grid_.t_axis;
    return t.size() < 2 ? t.back() : t.back() + (t.back() - t[t.size() - 2]);
}

std::vector<cx> GridSource::row(int q, int p, double t) const
{
    if (q < 0 || q >= grid_.n_rx || p < 0 || p >= grid_.n_tx)
        throw std::out_of_range("GridSource: antenna index out of range");
    const auto &axis = grid_.t_axis;
    const double slack = 1e-9 * std::max(1.0, std::abs(t));
    if (t < t_begin() - slack || t > t_end() + slack)
        throw std::out_of_range("GridSource: t = " + std::to_string(t) + " outside the grid");

    const int n_f = grid_.n_freq();
    auto row_at = [&](int i) { return grid_.subchannel(q, p).subspan(static_cast<std::size_t>(i) * n_f, n_f); };

    const auto upper = std::upper_bound(axis.begin(), axis.end(), t);
    if (upper == axis.end())
    {
        const auto last = row_at(grid_.n_time() - 1);
        return {last.begin(), last.end()};
    }
    if (upper == axis.begin())
    {
        const auto first = row_at(0);
        return {first.begin(), first.end()};
    }
    const int i = static_cast<int>(upper - axis.begin()) - 1;
    const double w = (t - axis[i]) / (axis[i + 1] - axis[i]);
    const auto a = row_at(i);
    const auto b = row_at(i + 1);
    std::vector<cx> out(n_f);
    for (int f = 0; f < n_f; ++f)
        out[f] = w == 0.0 ? a[f] : (1.0 - w) * a[f] + w * b[f];
    return out;
}

PackageSource::PackageSource(std::span<const ProjectionPackage> packages) : packages_(packages)
{
    if (packages.empty())
        throw std::invalid_argument("PackageSource: no packages");
    for (const auto &pkg : packages)
        if (pkg.n_rx != packages.front().n_rx || pkg.n_tx != packages.front().n_tx ||
            pkg.f_axis != packages.front().f_axis)
            throw std::invalid_argument("PackageSource: packages disagree on dimensions or frequency axis");
}

double PackageSource::t_begin() const
{
    return packages_.front().basis.t0;
}

double PackageSource::t_end() const
{
    return packages_.back().basis.t0 + packages_.back().basis.window;
}

std::vector<cx> PackageSource::row(int q, int p, double t) const
{
    return package_at(packages_, t).reconstruct_row(q, p, t);
}

StaticSource::StaticSource(int n_rx, int n_tx, std::vector<double> f_axis, std::vector<std::vector<cx>> rows)
    : n_rx_(n_rx), n_tx_(n_tx), f_axis_(std::move(f_axis)), rows_(std::move(rows))
{
    if (n_rx < 1 || n_tx < 1 || f_axis_.empty())
        throw std::invalid_argument("StaticSource: empty channel");
    if (rows_.size() != static_cast<std::size_t>(n_rx) * n_tx)
        throw std::invalid_argument("StaticSource: need one row per antenna pair");
    for (const auto &r : rows_)
        if (r.size() != f_axis_.size())
            throw std::invalid_argument("StaticSource: row length differs from the frequency axis");
}

double StaticSource::t_begin() const
{
    return -std::numeric_limits<double>::infinity();
}

double StaticSource::t_end() const
{
    return std::numeric_limits<double>::infinity();
}

std::vector<cx> StaticSource::row(int q, int p, double) const
{
    if (q < 0 || q >= n_rx_ || p < 0 || p >= n_tx_)
        throw std::out_of_range("StaticSource: antenna index out of range");
    return rows_[static_cast<std::size_t>(q) * n_tx_ + p];
}

// ---- CFR snapshot -------------------------------------------------------------

double bin_frequency(int m, int n_fft, double sample_period)
{
    const double rate = 1.0 / sample_period;
    const double f = m * rate / n_fft;
    return 2 * m >= n_fft ? f - rate : f;
}

Cfr cfr_snapshot(const ChannelSource &source, double t, const EngineConfig &config)
{
    if (source.n_rx() != config.n_rx || source.n_tx() != config.n_tx)
        throw std::invalid_argument("cfr_snapshot: source is " + std::to_string(source.n_rx()) + "x" +
                                    std::to_string(source.n_tx()) + ", engine expects " +
                                    std::to_string(config.n_rx) + "x" + std::to_string(config.n_tx));
    const double slack = 1e-9 * std::max(1.0, std::abs(t));
    if (!(t >= source.t_begin() - slack && t <= source.t_end() + slack))
        throw std::out_of_range("cfr_snapshot: t = " + std::to_string(t) + " s outside the source coverage [" +
                                std::to_string(source.t_begin()) + ", " + std::to_string(source.t_end()) + "]");

    const auto &axis = source.f_axis();
    const int n_src = static_cast<int>(axis.size());
    const double rate = 1.0 / config.sample_period;
    const double spacing = n_src > 1 ? axis[1] - axis[0] : rate;
    const double band = spacing * n_src;
    if (rate > band * (1.0 + 1e-9) && !config.zero_outside_band)
        throw std::invalid_argument("cfr_snapshot: engine bandwidth " + std::to_string(rate) +
                                    " Hz exceeds the channel bandwidth " + std::to_string(band) + " Hz");

    // Fractional source position of every engine bin, shared by all subchannels
    const int n = config.n_fft;
    std::vector<int> lo(n);
    std::vector<double> frac(n);
    std::vector<bool> inside(n);
    for (int m = 0; m < n; ++m)
    {
        double x = (bin_frequency(m, n, config.sample_period) - axis.front()) / spacing;
        if (std::abs(x - std::round(x)) < 1e-9)
            x = std::round(x);
        inside[m] = x >= 0.0 && x < n_src;
        lo[m] = inside[m] ? static_cast<int>(std::floor(x)) : 0;
        frac[m] = inside[m] ? x - lo[m] : 0.0;
    }

    Cfr out{config.n_rx, config.n_tx, n, std::vector<cx>(static_cast<std::size_t>(config.n_rx) * config.n_tx * n)};
    for (int q = 0; q < config.n_rx; ++q)
        for (int p = 0; p < config.n_tx; ++p)
        {
            const std::vector<cx> row = source.row(q, p, t);
            cx *dst = out.h.data() + (static_cast<std::size_t>(q) * config.n_tx + p) * n;
            for (int m = 0; m < n; ++m)
            {
                if (!inside[m])
                    continue;
                // The cell past the last knot wraps to the first: the sampled spectrum is periodic in B
                const cx a = row[lo[m]];
                const cx b = row[(lo[m] + 1) % n_src];
                dst[m] = frac[m] == 0.0 ? a : (1.0 - frac[m]) * a + frac[m] * b;
            }
        }
    return out;
}

// ---- engine ---------------------------------------------------------------------

EngineState EngineState::initial(const EngineConfig &config, double t0)
{
    EngineState s;
    s.tails.assign(config.n_rx, std::vector<cx>(config.n_overlap(), cx{}));
    s.t = t0;
    return s;
}

Engine::Engine(const EngineConfig &config) : config_((config.validate(), config)), fft_(config.n_fft)
{
}

std::vector<SignalBlock> Engine::process_block(EngineState &state, std::span<const SignalBlock> inputs,
                                               const Cfr &h, BlockStats *stats) const
{
    const int n = config_.n_fft;
    const int n_a = config_.n_overlap();
    const int n_s = config_.n_block();
    const int n_tx = config_.n_tx;
    const int n_rx = config_.n_rx;
    const bool sp = config_.single_precision;

    if (static_cast<int>(inputs.size()) != n_tx)
        throw std::invalid_argument("process_block: expected " + std::to_string(n_tx) + " input blocks");
    if (h.n_rx != n_rx || h.n_tx != n_tx || h.n_fft != n)
        throw std::invalid_argument("process_block: CFR dimensions do not match the engine");
    if (static_cast<int>(state.tails.size()) != n_rx)
        throw std::invalid_argument("process_block: state has the wrong number of tails");
    for (int p = 0; p < n_tx; ++p)
    {
        const SignalBlock &b = inputs[p];
        if (static_cast<int>(b.samples.size()) != n_s)
            throw std::invalid_argument("process_block: block length must be N_s = " + std::to_string(n_s));
        if (b.block_index != state.block_index)
            throw std::invalid_argument("process_block: block index " + std::to_string(b.block_index) +
                                        " does not match state index " + std::to_string(state.block_index));
        if (b.antenna != p)
            throw std::invalid_argument("process_block: input blocks must be ordered by antenna");
    }

    std::vector<std::vector<cx>> spectra(n_tx, std::vector<cx>(n, cx{}));
    for (int p = 0; p < n_tx; ++p)
    {
        std::copy(inputs[p].samples.begin(), inputs[p].samples.end(), spectra[p].begin());
        quantize(spectra[p], sp);
        fft_.forward(spectra[p]);
        quantize(spectra[p], sp);
    }

    std::vector<SignalBlock> outputs(n_rx);
    std::vector<cx> acc(n);
    std::vector<cx> hq(n);
    long macs = 0;
    for (int q = 0; q < n_rx; ++q)
    {
        std::fill(acc.begin(), acc.end(), cx{});
        for (int p = 0; p < n_tx; ++p)
        {
            const auto bins = h.bins(q, p);
            std::copy(bins.begin(), bins.end(), hq.begin());
            quantize(hq, sp);
            for (int m = 0; m < n; ++m)
                acc[m] += spectra[p][m] * hq[m];
            macs += n;
        }
        quantize(acc, sp);
        fft_.inverse(acc);
        quantize(acc, sp);

        // Overlap-add; the tail may be longer than one block when N_a > N_s
        std::vector<cx> &tail = state.tails[q];
        SignalBlock &out = outputs[q];
        out.samples.resize(n_s);
        out.block_index = state.block_index;
        out.antenna = q;
        out.partial = inputs[0].partial;
        for (int i = 0; i < n_s; ++i)
            out.samples[i] = i < n_a ? acc[i] + tail[i] : acc[i];
        std::vector<cx> next(n_a);
        for (int i = 0; i < n_a; ++i)
            next[i] = n_s + i < n_a ? acc[n_s + i] + tail[n_s + i] : acc[n_s + i];
        tail = std::move(next);
    }

    if (stats)
        *stats = {state.block_index, state.t, static_cast<long>(n_tx + n_rx), n, macs};
    ++state.block_index;
    state.t += config_.block_period();
    return outputs;
}

StreamResult Engine::run_stream(const ChannelSource &source, const std::vector<std::vector<cx>> &inputs,
                                double t0) const
{
    const int n_tx = config_.n_tx;
    const int n_s = config_.n_block();
    const int n_a = config_.n_overlap();
    if (static_cast<int>(inputs.size()) != n_tx)
        throw std::invalid_argument("run_stream: expected " + std::to_string(n_tx) + " input streams");
    const std::size_t length = inputs.front().size();
    for (const auto &s : inputs)
        if (s.size() != length)
            throw std::invalid_argument("run_stream: input streams differ in length");

    StreamResult result;
    result.outputs.assign(config_.n_rx, {});
    for (auto &o : result.outputs)
        o.reserve(length + n_a + n_s);

    EngineState state = EngineState::initial(config_, t0);
    const std::size_t n_blocks = (length + n_s - 1) / n_s;
    std::vector<SignalBlock> blocks(n_tx);
    for (std::size_t i = 0; i < n_blocks; ++i)
    {
        const std::size_t begin = i * n_s;
        const std::size_t end = std::min(length, begin + n_s);
        for (int p = 0; p < n_tx; ++p)
        {
            SignalBlock &b = blocks[p];
            b.samples.assign(n_s, cx{});
            std::copy(inputs[p].begin() + begin, inputs[p].begin() + end, b.samples.begin());
            b.block_index = state.block_index;
            b.antenna = p;
            b.partial = end - begin < static_cast<std::size_t>(n_s);
        }
        // Channel frozen for the whole block, at the block's start time
        const Cfr h = cfr_snapshot(source, t0 + static_cast<double>(i) * config_.block_period(), config_);
        BlockStats stats;
        const auto out = process_block(state, blocks, h, &stats);
        result.stats.push_back(stats);
        for (int q = 0; q < config_.n_rx; ++q)
            result.outputs[q].insert(result.outputs[q].end(), out[q].samples.begin(), out[q].samples.end());
    }
    for (int q = 0; q < config_.n_rx; ++q)
    {
        auto &o = result.outputs[q];
        o.insert(o.end(), state.tails[q].begin(), state.tails[q].end());
        o.resize(length + n_a);
    }
    return result;
}

double estimate_tau_max(const ScenarioConfig &config, std::span<const ClusterPair> clusters, double quantile,
                        double t_step)
{
    if (!(quantile > 0.0 && quantile <= 1.0))
        throw std::invalid_argument("estimate_tau_max: quantile must be in (0, 1]");
    if (!(t_step > 0.0))
        throw std::invalid_argument("estimate_tau_max: t_step must be positive");
    std::vector<double> delays;
    for (double t = 0.0; t < config.t_total; t += t_step)
        for (int q = 0; q < config.rx_array.n_elements; ++q)
            for (int p = 0; p < config.tx_array.n_elements; ++p)
                for (const RayState &r : active_rays(config, clusters, q, p, t, 0.0))
                    delays.push_back(r.delay);
    if (delays.empty())
        throw std::invalid_argument("estimate_tau_max: no rays in the cluster history");
    const auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(delays.size()))) - 1;
    std::nth_element(delays.begin(), delays.begin() + static_cast<std::ptrdiff_t>(k), delays.end());
    return delays[k];
}

void write_stats_csv(std::ostream &out, std::span<const BlockStats> stats)
{
    out << std::setprecision(17) << "block,t,transforms,transform_size,macs\n";
    for (const auto &s : stats)
        out << s.block_index << ',' << s.t << ',' << s.transforms << ',' << s.transform_size << ',' << s.macs
            << '\n';
}

} // namespace chemu
