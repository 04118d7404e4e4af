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

#include "chemu/metrics.hpp"

#include "chemu/fft.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace chemu
{
namespace
{
double to_db(double ratio)
{
    if (ratio <= 0.0)
        return db_floor;
    return std::max(db_floor, 10.0 * std::log10(ratio));
}

// Axes rebuilt from window parameters differ from the originals in the last few ulps
bool same_axis(const std::vector<double> &a, const std::vector<double> &b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12 + 1e-9 * std::max(std::abs(a[i]), std::abs(b[i])))
            return false;
    return true;
}

void check_same_axes(const CtfGrid &a, const CtfGrid &b)
{
    if (a.n_rx != b.n_rx || a.n_tx != b.n_tx || !same_axis(a.t_axis, b.t_axis) || !same_axis(a.f_axis, b.f_axis))
        throw std::invalid_argument("ctf_error: grids have different axes");
}
} // namespace

double ErrorTrace::worst_db() const
{
    return e_power_db.empty() ? db_floor : *std::max_element(e_power_db.begin(), e_power_db.end());
}

ErrorTrace ctf_error(const CtfGrid &h, const CtfGrid &h_hat, int q, int p)
{
    check_same_axes(h, h_hat);
    if (q < 0 || q >= h.n_rx || p < 0 || p >= h.n_tx)
        throw std::out_of_range("ctf_error: antenna index out of range");
    const int n_t = h.n_time();
    const int n_f = h.n_freq();
    const auto a = h.subchannel(q, p);
    const auto b = h_hat.subchannel(q, p);

    double reference = 0.0;
    for (const cx &v : a)
        reference += std::norm(v);
    reference /= static_cast<double>(a.size());

    ErrorTrace out;
    out.t_axis = h.t_axis;
    out.e_mean.resize(n_t);
    out.e_power_db.resize(n_t);
    for (int t = 0; t < n_t; ++t)
    {
        cx sum{};
        double power = 0.0;
        for (int f = 0; f < n_f; ++f)
        {
            const cx d = a[static_cast<std::size_t>(t) * n_f + f] - b[static_cast<std::size_t>(t) * n_f + f];
            sum += d;
            power += std::norm(d);
        }
        out.e_mean[t] = sum / static_cast<double>(n_f);
        power /= n_f;
        if (reference > 0.0)
            out.e_power_db[t] = to_db(power / reference);
        else
            out.e_power_db[t] = power > 0.0 ? std::numeric_limits<double>::infinity() : db_floor;
    }
    return out;
}

double worst_error_db(const CtfGrid &h, const CtfGrid &h_hat)
{
    double worst = db_floor;
    for (int q = 0; q < h.n_rx; ++q)
        for (int p = 0; p < h.n_tx; ++p)
            worst = std::max(worst, ctf_error(h, h_hat, q, p).worst_db());
    return worst;
}

// ---- Doppler ------------------------------------------------------------------

double SpectrumWindow::weight(int lag) const
{
    switch (shape)
    {
    case WindowShape::gaussian: {
        const double sigma = length / 6.0;
        return std::exp(-0.5 * (lag / sigma) * (lag / sigma));
    }
    case WindowShape::hann:
        return 0.5 * (1.0 + std::cos(two_pi * lag / length));
    case WindowShape::rectangular:
        return 1.0;
    }
    return 1.0;
}

WindowShape parse_window_shape(const std::string &name)
{
    if (name == "gaussian")
        return WindowShape::gaussian;
    if (name == "hann")
        return WindowShape::hann;
    if (name == "rectangular" || name == "rect")
        return WindowShape::rectangular;
    throw std::invalid_argument("unknown window shape '" + name + "' (gaussian, hann, rectangular)");
}

std::string to_string(WindowShape shape)
{
    switch (shape)
    {
    case WindowShape::gaussian:
        return "gaussian";
    case WindowShape::hann:
        return "hann";
    case WindowShape::rectangular:
        return "rectangular";
    }
    return "?";
}

int SpectrumSeries::peak_bin(int t_index) const
{
    const auto &row = surface.at(t_index);
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<cx> temporal_acf(std::span<const cx> h, int t, int max_lag, int n_avg)
{
    const int n = static_cast<int>(h.size());
    if (max_lag < 0 || n_avg < 0)
        throw std::invalid_argument("temporal_acf: lags and neighbourhood must be nonnegative");
    if (t < 0 || t + max_lag >= n)
        throw std::out_of_range("temporal_acf: t + max lag beyond the series");

    std::vector<cx> r(max_lag + 1);
    for (int d = 0; d <= max_lag; ++d)
    {
        const int lo = std::max(0, t - n_avg);
        const int hi = std::min(n - 1 - d, t + n_avg);
        cx sum{};
        for (int j = lo; j <= hi; ++j)
            sum += h[j + d] * std::conj(h[j]);
        r[d] = sum / static_cast<double>(hi - lo + 1);
    }
    return r;
}

SpectrumSeries doppler_psd(std::span<const cx> h, double t_step, std::span<const int> t_indices,
                           const SpectrumWindow &window, int n_avg)
{
    const int len = window.length;
    if (len < 2 || len % 2 != 0)
        throw std::invalid_argument("doppler_psd: window length must be even and >= 2");
    if (len / 2 >= static_cast<int>(h.size()))
        throw std::invalid_argument("doppler_psd: window longer than the series");
    if (!(t_step > 0.0))
        throw std::invalid_argument("doppler_psd: t_step must be positive");

    SpectrumSeries out;
    out.kind = SpectrumSeries::Kind::doppler;
    out.window = window;
    out.bin_axis.resize(len);
    for (int k = 0; k < len; ++k)
        out.bin_axis[k] = (k - len / 2) / (len * t_step);

    const int half = len / 2;
    const Fft fft(len);
    std::vector<cx> x(len);
    for (const int t : t_indices)
    {
        const std::vector<cx> r = temporal_acf(h, t, half, n_avg);
        // x[n] holds lag n - L/2
        for (int n = 0; n < len; ++n)
        {
            const int lag = n - half;
            const cx v = lag >= 0 ? r[lag] : std::conj(r[-lag]);
            x[n] = v * window.weight(lag);
        }
        fft.forward(x);
        // The lag offset only adds a linear phase, so bin k of the centred axis is DFT bin (k - L/2) mod L
        std::vector<double> row(len);
        for (int k = 0; k < len; ++k)
            row[k] = std::abs(x[(k - half + len) % len]);
        out.surface.push_back(std::move(row));
        out.t_axis.push_back(t * t_step);
    }
    return out;
}

std::vector<cx> zero_frequency_series(const CtfGrid &grid, int q, int p)
{
    const auto it = std::min_element(grid.f_axis.begin(), grid.f_axis.end(),
                                     [](double a, double b) { return std::abs(a) < std::abs(b); });
    const int f0 = static_cast<int>(it - grid.f_axis.begin());
    std::vector<cx> out(grid.n_time());
    for (int t = 0; t < grid.n_time(); ++t)
        out[t] = grid.at(q, p, t, f0);
    return out;
}

// ---- delay ---------------------------------------------------------------------

std::vector<cx> freq_corr(std::span<const cx> row, int n_lags)
{
    const int n = static_cast<int>(row.size());
    if (n_lags < 1 || n_lags > n)
        throw std::out_of_range("freq_corr: lag beyond the band");
    std::vector<cx> r(n_lags);
    for (int d = 0; d < n_lags; ++d)
    {
        cx sum{};
        for (int f = 0; f < n; ++f)
            sum += row[(f + d) % n] * std::conj(row[f]);
        r[d] = sum / static_cast<double>(n);
    }
    return r;
}

SpectrumSeries delay_psd(const CtfGrid &grid, int q, int p)
{
    const int n_f = grid.n_freq();
    if (n_f < 2)
        throw std::invalid_argument("delay_psd: need at least two frequency bins");
    const double bandwidth = grid.bandwidth();

    SpectrumSeries out;
    out.kind = SpectrumSeries::Kind::delay;
    out.window = {WindowShape::rectangular, n_f};
    out.t_axis = grid.t_axis;
    out.bin_axis.resize(n_f);
    for (int n = 0; n < n_f; ++n)
        out.bin_axis[n] = n / bandwidth;

    const Fft fft(n_f);
    const double unitary = std::sqrt(static_cast<double>(n_f)); // inverse() already divides by I
    const auto sub = grid.subchannel(q, p);
    for (int t = 0; t < grid.n_time(); ++t)
    {
        std::vector<cx> r = freq_corr(sub.subspan(static_cast<std::size_t>(t) * n_f, n_f), n_f);
        fft.inverse(r);
        std::vector<double> row(n_f);
        for (int n = 0; n < n_f; ++n)
            row[n] = std::abs(r[n]) * unitary;
        out.surface.push_back(std::move(row));
    }
    return out;
}

// ---- CSV ----------------------------------------------------------------------------

void write_error_csv(std::ostream &out, const ErrorTrace &trace)
{
    out << std::setprecision(17) << "t,e_mean_re,e_mean_im,e_power_db\n";
    for (std::size_t i = 0; i < trace.t_axis.size(); ++i)
        out << trace.t_axis[i] << ',' << trace.e_mean[i].real() << ',' << trace.e_mean[i].imag() << ','
            << trace.e_power_db[i] << '\n';
}

void write_spectrum_csv(std::ostream &out, const SpectrumSeries &series)
{
    out << std::setprecision(17) << "t,bin,value\n";
    for (std::size_t t = 0; t < series.surface.size(); ++t)
        for (std::size_t k = 0; k < series.bin_axis.size(); ++k)
            out << series.t_axis[t] << ',' << series.bin_axis[k] << ',' << series.surface[t][k] << '\n';
}

} // namespace chemu
