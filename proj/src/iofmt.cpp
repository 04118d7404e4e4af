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

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

static_assert(std::endian::native == std::endian::little, "chemu file formats assume a little-endian host");

namespace chemu
{
namespace
{
constexpr char magic_prefix[5] = {'C', 'H', 'E', 'M', 'U'};

class Writer
{
public:
    explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }

    template <typename T>
    void put(T value)
    {
        const auto *p = reinterpret_cast<const std::uint8_t *>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_doubles(std::span<const double> values)
    {
        for (double v : values)
            put(v);
    }
    void put_complex(std::span<const cx> values)
    {
        for (const cx &v : values)
        {
            put(v.real());
            put(v.imag());
        }
    }
    void header(const char (&kind)[4])
    {
        bytes_.insert(bytes_.end(), magic_prefix, magic_prefix + 5);
        bytes_.insert(bytes_.end(), kind, kind + 3);
        put(format_version);
        put(std::uint8_t{1});
    }
    Bytes take() { return std::move(bytes_); }

private:
    Bytes bytes_;
};

class Reader
{
public:
    explicit Reader(const Bytes &bytes) : bytes_(bytes) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::vector<double> get_doubles(std::size_t n)
    {
        need_elements(n, sizeof(double));
        std::vector<double> out(n);
        std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return out;
    }
    void get_complex(std::span<cx> out)
    {
        need_elements(out.size(), 2 * sizeof(double));
        std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(cx));
        pos_ += out.size() * sizeof(cx);
    }
    void header(const char (&kind)[4])
    {
        // Magic and version are checked before anything else is read
        if (bytes_.size() < 8 || std::memcmp(bytes_.data(), magic_prefix, 5) != 0 ||
            std::memcmp(bytes_.data() + 5, kind, 3) != 0)
            throw BadMagic(std::string("not a CHEMU ") + kind + " file (bad magic)");
        pos_ = 8;
        const auto version = get<std::uint16_t>();
        if (version != format_version)
            throw FormatError("unsupported format version " + std::to_string(version));
        if (get<std::uint8_t>() != 1)
            throw FormatError("unsupported endianness flag");
    }
    // Refuses to allocate for a payload the file cannot hold
    void need_elements(std::size_t n, std::size_t size) const
    {
        if (n > (bytes_.size() - pos_) / size)
            throw TruncatedPayload("payload truncated: need " + std::to_string(n) + " elements of " +
                                   std::to_string(size) + " bytes, " + std::to_string(bytes_.size() - pos_) +
                                   " bytes left");
    }
    void finish() const
    {
        if (pos_ != bytes_.size())
            throw FormatError("length mismatch: " + std::to_string(bytes_.size() - pos_) +
                              " bytes after the declared payload");
    }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw TruncatedPayload("file truncated at byte " + std::to_string(pos_));
    }

    const Bytes &bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t checked_dim(std::int64_t v, const char *what)
{
    if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument(std::string("dimension out of range: ") + what);
    return static_cast<std::uint32_t>(v);
}

int positive_dim(std::uint32_t v, const char *what)
{
    if (v == 0 || v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        throw FormatError(std::string("invalid dimension ") + what + " = " + std::to_string(v));
    return static_cast<int>(v);
}

// Product of dims, rejecting anything beyond what a file could hold
std::size_t product(std::initializer_list<std::size_t> dims)
{
    std::size_t out = 1;
    for (std::size_t d : dims)
    {
        if (d != 0 && out > std::numeric_limits<std::size_t>::max() / 64 / d)
            throw FormatError("declared dimensions overflow");
        out *= d;
    }
    return out;
}
} // namespace

// ---- CTF ---------------------------------------------------------------------------

Bytes encode_ctf(const CtfGrid &grid)
{
    const std::size_t n_pairs = static_cast<std::size_t>(grid.n_rx) * grid.n_tx;
    if (grid.data.size() != n_pairs * grid.t_axis.size() * grid.f_axis.size() || grid.normalization.size() != n_pairs)
        throw std::invalid_argument("encode_ctf: grid buffers do not match its dimensions");
    Writer w(header_bytes + 24 + 8 * (grid.t_axis.size() + grid.f_axis.size() + n_pairs) + 16 * grid.data.size());
    w.header("CTF");
    w.put(checked_dim(grid.n_rx, "n_rx"));
    w.put(checked_dim(grid.n_tx, "n_tx"));
    w.put(checked_dim(grid.n_time(), "n_time"));
    w.put(checked_dim(grid.n_freq(), "n_freq"));
    w.put(grid.f_c);
    w.put_doubles(grid.t_axis);
    w.put_doubles(grid.f_axis);
    w.put_doubles(grid.normalization);
    w.put_complex(grid.data);
    return w.take();
}

CtfGrid decode_ctf(const Bytes &bytes)
{
    Reader r(bytes);
    r.header("CTF");
    const int n_rx = positive_dim(r.get<std::uint32_t>(), "n_rx");
    const int n_tx = positive_dim(r.get<std::uint32_t>(), "n_tx");
    const int n_t = positive_dim(r.get<std::uint32_t>(), "n_time");
    const int n_f = positive_dim(r.get<std::uint32_t>(), "n_freq");
    const double f_c = r.get<double>();
    const std::size_t n_data = product({std::size_t(n_rx), std::size_t(n_tx), std::size_t(n_t), std::size_t(n_f)});
    auto t_axis = r.get_doubles(n_t);
    auto f_axis = r.get_doubles(n_f);
    auto normalization = r.get_doubles(static_cast<std::size_t>(n_rx) * n_tx);
    r.need_elements(n_data, 16);
    CtfGrid grid(n_rx, n_tx, std::move(t_axis), std::move(f_axis), f_c);
    grid.normalization = std::move(normalization);
    r.get_complex(grid.data);
    r.finish();
    return grid;
}

// ---- packages ----------------------------------------------------------------------

std::size_t package_file_size(int n_rx, int n_tx, int k, int n_freq, int n_windows)
{
    const std::size_t pairs = static_cast<std::size_t>(n_rx) * n_tx;
    const std::size_t fixed = header_bytes + 5 * 4 + 8 + 8 * static_cast<std::size_t>(n_freq) + 8 * pairs;
    const std::size_t per_window = 8 + 8 + 4 + 16 * static_cast<std::size_t>(k) +
                                   16 * pairs * static_cast<std::size_t>(k) * n_freq;
    return fixed + per_window * static_cast<std::size_t>(n_windows);
}

Bytes encode_packages(std::span<const ProjectionPackage> packages)
{
    if (packages.empty())
        throw std::invalid_argument("encode_packages: no packages");
    const ProjectionPackage &first = packages.front();
    const int k = first.n_chirps();
    const int n_f = first.n_freq();
    const std::size_t pairs = static_cast<std::size_t>(first.n_rx) * first.n_tx;
    for (const auto &pkg : packages)
    {
        if (pkg.n_rx != first.n_rx || pkg.n_tx != first.n_tx || pkg.n_chirps() != k || pkg.f_axis != first.f_axis ||
            pkg.f_c != first.f_c || pkg.normalization != first.normalization)
            throw std::invalid_argument("encode_packages: windows disagree on shared fields");
        if (pkg.coefficients.size() != pairs)
            throw std::invalid_argument("encode_packages: coefficient count does not match the antenna pairs");
        for (const CMatrix &a : pkg.coefficients)
            if (a.rows() != k || a.cols() != n_f)
                throw std::invalid_argument("encode_packages: coefficient matrix must be K x I");
    }
    if (first.normalization.size() != pairs)
        throw std::invalid_argument("encode_packages: normalization needs one entry per antenna pair");

    Writer w(package_file_size(first.n_rx, first.n_tx, k, n_f, static_cast<int>(packages.size())));
    w.header("PKG");
    w.put(checked_dim(first.n_rx, "n_rx"));
    w.put(checked_dim(first.n_tx, "n_tx"));
    w.put(checked_dim(k, "K"));
    w.put(checked_dim(n_f, "n_freq"));
    w.put(checked_dim(static_cast<std::int64_t>(packages.size()), "n_windows"));
    w.put(first.f_c);
    w.put_doubles(first.f_axis);
    w.put_doubles(first.normalization);
    for (const auto &pkg : packages)
    {
        w.put(pkg.basis.t0);
        w.put(pkg.basis.window);
        w.put(checked_dim(pkg.basis.n_time_samples, "n_time_samples"));
        for (const ChirpParam &c : pkg.basis.chirps)
        {
            w.put(c.alpha);
            w.put(c.beta);
        }
        for (const CMatrix &a : pkg.coefficients)
            for (int row = 0; row < k; ++row)
                for (int col = 0; col < n_f; ++col)
                {
                    w.put(a(row, col).real());
                    w.put(a(row, col).imag());
                }
    }
    return w.take();
}

std::vector<ProjectionPackage> decode_packages(const Bytes &bytes)
{
    Reader r(bytes);
    r.header("PKG");
    const int n_rx = positive_dim(r.get<std::uint32_t>(), "n_rx");
    const int n_tx = positive_dim(r.get<std::uint32_t>(), "n_tx");
    const int k = positive_dim(r.get<std::uint32_t>(), "K");
    const int n_f = positive_dim(r.get<std::uint32_t>(), "n_freq");
    const int n_windows = positive_dim(r.get<std::uint32_t>(), "n_windows");
    const double f_c = r.get<double>();
    const std::size_t pairs = static_cast<std::size_t>(n_rx) * n_tx;
    const std::size_t per_window = product({pairs, std::size_t(k), std::size_t(n_f)});
    auto f_axis = r.get_doubles(n_f);
    auto normalization = r.get_doubles(pairs);
    r.need_elements(product({std::size_t(n_windows), per_window}), 16);

    std::vector<ProjectionPackage> out(n_windows);
    std::vector<cx> buffer(per_window);
    for (auto &pkg : out)
    {
        pkg.n_rx = n_rx;
        pkg.n_tx = n_tx;
        pkg.f_axis = f_axis;
        pkg.f_c = f_c;
        pkg.normalization = normalization;
        pkg.basis.t0 = r.get<double>();
        pkg.basis.window = r.get<double>();
        pkg.basis.n_time_samples = positive_dim(r.get<std::uint32_t>(), "n_time_samples");
        const auto table = r.get_doubles(2 * static_cast<std::size_t>(k));
        pkg.basis.chirps.resize(k);
        for (int i = 0; i < k; ++i)
            pkg.basis.chirps[i] = {table[2 * i], table[2 * i + 1]};
        r.get_complex(buffer);
        pkg.coefficients.resize(pairs);
        for (std::size_t s = 0; s < pairs; ++s)
        {
            // Payload is [k][i] row-major
            pkg.coefficients[s] = Eigen::Map<const Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                buffer.data() + s * k * n_f, k, n_f);
        }
    }
    r.finish();
    return out;
}

// ---- signals -----------------------------------------------------------------------

Bytes encode_signal(const SignalData &signal)
{
    const std::size_t n = signal.n_samples();
    for (const auto &c : signal.channels)
        if (c.size() != n)
            throw std::invalid_argument("encode_signal: channels differ in length");
    const std::size_t element = signal.single_precision ? 8 : 16;
    Writer w(header_bytes + 4 + 8 + 8 + 1 + element * n * signal.channels.size());
    w.header("SIG");
    w.put(checked_dim(static_cast<std::int64_t>(signal.channels.size()), "n_channels"));
    w.put(static_cast<std::uint64_t>(n));
    w.put(signal.sample_rate);
    w.put(static_cast<std::uint8_t>(signal.single_precision ? 1 : 0));
    for (const auto &c : signal.channels)
    {
        if (signal.single_precision)
            for (const cx &v : c)
            {
                w.put(static_cast<float>(v.real()));
                w.put(static_cast<float>(v.imag()));
            }
        else
            w.put_complex(c);
    }
    return w.take();
}

SignalData decode_signal(const Bytes &bytes)
{
    Reader r(bytes);
    r.header("SIG");
    SignalData out;
    const auto n_channels = r.get<std::uint32_t>();
    const auto n = r.get<std::uint64_t>();
    out.sample_rate = r.get<double>();
    const auto precision = r.get<std::uint8_t>();
    if (precision > 1)
        throw FormatError("unknown sample precision flag " + std::to_string(precision));
    out.single_precision = precision == 1;
    if (n > std::numeric_limits<std::size_t>::max() / 64)
        throw FormatError("declared sample count overflows");
    r.need_elements(product({std::size_t(n_channels), static_cast<std::size_t>(n)}), out.single_precision ? 8 : 16);
    out.channels.assign(n_channels, std::vector<cx>(n));
    for (auto &c : out.channels)
    {
        if (out.single_precision)
            for (auto &v : c)
            {
                const float re = r.get<float>();
                const float im = r.get<float>();
                v = {re, im};
            }
        else
            r.get_complex(c);
    }
    r.finish();
    return out;
}

// ---- files --------------------------------------------------------------------------

Bytes read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path &path, const Bytes &bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw FormatError("write failed: " + path.string());
}

CtfGrid read_ctf(const std::filesystem::path &path)
{
    return decode_ctf(read_file(path));
}

void write_ctf(const std::filesystem::path &path, const CtfGrid &grid)
{
    write_file(path, encode_ctf(grid));
}

std::vector<ProjectionPackage> read_packages(const std::filesystem::path &path)
{
    return decode_packages(read_file(path));
}

void write_packages(const std::filesystem::path &path, std::span<const ProjectionPackage> packages)
{
    write_file(path, encode_packages(packages));
}

SignalData read_signal(const std::filesystem::path &path)
{
    return decode_signal(read_file(path));
}

void write_signal(const std::filesystem::path &path, const SignalData &signal)
{
    write_file(path, encode_signal(signal));
}

} // namespace chemu
