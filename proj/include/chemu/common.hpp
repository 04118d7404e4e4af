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

#ifndef CHEMU_COMMON_HPP
#define CHEMU_COMMON_HPP

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chemu
{
using cx = std::complex<double>;
using Vec3 = Eigen::Vector3d;

inline constexpr double speed_of_light = 299792458.0; // m/s
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Errors raised while reading or validating on-disk data (CLI exit code 2)
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class BadMagic : public FormatError
{
public:
    using FormatError::FormatError;
};

class TruncatedPayload : public FormatError
{
public:
    using FormatError::FormatError;
};

// Numeric failures inside the pipeline (CLI exit code 3)
class NumericError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Gram-Schmidt pivot fell below the dependence threshold: the chirp grid is too dense for the window
class NearDependentBasis : public NumericError
{
public:
    NearDependentBasis(const std::string &what, int column, double pivot_ratio)
        : NumericError(what), column_(column), pivot_ratio_(pivot_ratio) {}
    int column() const noexcept { return column_; }
    double pivot_ratio() const noexcept { return pivot_ratio_; }

private:
    int column_;
    double pivot_ratio_;
};

} // namespace chemu

#endif
