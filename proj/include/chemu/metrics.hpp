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

#ifndef CHEMU_METRICS_HPP
#define CHEMU_METRICS_HPP

#include "chemu/gbsm.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace chemu
{

inline constexpr double db_floor = -300.0;

struct ErrorTrace
{
    std::vector<cx> e_mean;          // (1/B) sum_f (H - H_hat) df
    std::vector<double> e_power_db;  // mean_f |H - H_hat|^2 over mean_{t,f} |H|^2, dB
    std::vector<double> t_axis;

    double worst_db() const;
};

// Subchannel (q,p) of two grids on identical axes
ErrorTrace ctf_error(const CtfGrid &h, const CtfGrid &h_hat, int q, int p);

// Largest e_power_db over every subchannel and time
double worst_error_db(const CtfGrid &h, const CtfGrid &h_hat);

enum class WindowShape
{
    gaussian, // sigma = length / 6
    hann,
    rectangular
};

struct SpectrumWindow
{
    WindowShape shape = WindowShape::gaussian;
    int length = 256; // lags, even

    double weight(int lag) const; // centred on lag 0
};

WindowShape parse_window_shape(const std::string &name);
std::string to_string(WindowShape shape);

struct SpectrumSeries
{
    enum class Kind
    {
        doppler,
        delay
    };
    Kind kind = Kind::doppler;
    std::vector<std::vector<double>> surface; // [t][bin], nonnegative
    std::vector<double> t_axis;               // s
    std::vector<double> bin_axis;             // Hz or s, strictly increasing
    SpectrumWindow window;

    int peak_bin(int t_index) const;
};

// Local-average ACF at sample t: R(t, d) = mean_j h[j + d] conj(h[j]) over j in [t - n_avg, t + n_avg],
// clamped so that every product stays inside the series. Lags 0..max_lag.
std::vector<cx> temporal_acf(std::span<const cx> h, int t, int max_lag, int n_avg = 16);

// |STFT| of the ACF over lags -L/2 .. L/2-1 (negative lags by Hermitian symmetry), one row per
// requested sample index. Bin k sits at (k - L/2) / (L t_step).
SpectrumSeries doppler_psd(std::span<const cx> h, double t_step, std::span<const int> t_indices,
                           const SpectrumWindow &window = {}, int n_avg = 16);

// Series of subchannel (q,p) at the bin nearest f = 0
std::vector<cx> zero_frequency_series(const CtfGrid &grid, int q, int p);

// Circular frequency correlation R(d) = mean_f row[(f + d) mod I] conj(row[f]), lags 0..n_lags-1
std::vector<cx> freq_corr(std::span<const cx> row, int n_lags);

// |unitary inverse DFT over lag of R(t, df)|; delay bin n is n / B
SpectrumSeries delay_psd(const CtfGrid &grid, int q, int p);

void write_error_csv(std::ostream &out, const ErrorTrace &trace);
void write_spectrum_csv(std::ostream &out, const SpectrumSeries &series); // long format t,bin,value

} // namespace chemu

#endif
