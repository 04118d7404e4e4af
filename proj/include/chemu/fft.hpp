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

#ifndef CHEMU_FFT_HPP
#define CHEMU_FFT_HPP

#include "chemu/common.hpp"

#include <memory>
#include <span>

namespace chemu
{

// Complex DFT of one fixed size backed by FFTW.
// forward: X[m] = sum_n x[n] exp(-j 2 pi m n / N); inverse includes the 1/N factor.
class Fft
{
public:
    explicit Fft(int n);
    ~Fft();
    Fft(const Fft &) = delete;
    Fft &operator=(const Fft &) = delete;
    Fft(Fft &&) noexcept;
    Fft &operator=(Fft &&) noexcept;

    int size() const noexcept { return n_; }
    void forward(std::span<cx> data) const;
    void inverse(std::span<cx> data) const;

private:
    struct Plans;
    int n_;
    std::unique_ptr<Plans> plans_;
};

} // namespace chemu

#endif
