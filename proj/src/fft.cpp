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

#include "chemu/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace chemu
{
namespace
{
std::mutex planner_mutex; // FFTW's planner is not thread safe
}

struct Fft::Plans
{
    fftw_complex *buffer = nullptr;
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;

    explicit Plans(int n)
    {
        std::lock_guard lock(planner_mutex);
        buffer = fftw_alloc_complex(static_cast<std::size_t>(n));
        fwd = fftw_plan_dft_1d(n, buffer, buffer, FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_1d(n, buffer, buffer, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Plans()
    {
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
        fftw_free(buffer);
    }
};

Fft::Fft(int n) : n_(n)
{
    if (n < 1)
        throw std::invalid_argument("Fft: size must be positive");
    plans_ = std::make_unique<Plans>(n);
}

Fft::~Fft() = default;
Fft::Fft(Fft &&) noexcept = default;
Fft &Fft::operator=(Fft &&) noexcept = default;

void Fft::forward(std::span<cx> data) const
{
    if (static_cast<int>(data.size()) != n_)
        throw std::invalid_argument("Fft::forward: length mismatch");
    std::memcpy(plans_->buffer, data.data(), data.size() * sizeof(cx));
    fftw_execute(plans_->fwd);
    std::memcpy(static_cast<void *>(data.data()), plans_->buffer, data.size() * sizeof(cx));
}

void Fft::inverse(std::span<cx> data) const
{
    if (static_cast<int>(data.size()) != n_)
        throw std::invalid_argument("Fft::inverse: length mismatch");
    std::memcpy(plans_->buffer, data.data(), data.size() * sizeof(cx));
    fftw_execute(plans_->inv);
    const double scale = 1.0 / n_;
    std::memcpy(static_cast<void *>(data.data()), plans_->buffer, data.size() * sizeof(cx));
    for (cx &v : data)
        v *= scale;
}

} // namespace chemu
