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

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace chemu
{
namespace
{
std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string &s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;)
        out.push_back(tok);
    return out;
}

double to_double(const std::string &s)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

template <typename Int>
Int to_int(const std::string &s)
{
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument("not an integer: '" + s + "'");
    return v;
}

std::string fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Vec3 to_vec3(const std::string &s)
{
    const auto tok = split_ws(s);
    if (tok.size() != 3)
        throw std::invalid_argument("expected three numbers");
    return {to_double(tok[0]), to_double(tok[1]), to_double(tok[2])};
}

std::string fmt(const Vec3 &v)
{
    return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

std::vector<VelocitySegment> to_segments(const std::string &s)
{
    std::vector<VelocitySegment> out;
    if (s.find(':') == std::string::npos)
        return {VelocitySegment{0.0, to_vec3(s)}};
    std::istringstream in(s);
    for (std::string part; std::getline(in, part, ';');)
    {
        part = trim(part);
        if (part.empty())
            continue;
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("velocity segment needs 't: vx vy vz'");
        out.push_back({to_double(trim(part.substr(0, colon))), to_vec3(part.substr(colon + 1))});
    }
    if (out.empty())
        throw std::invalid_argument("no velocity segments");
    return out;
}

std::string fmt(const std::vector<VelocitySegment> &segments)
{
    if (segments.size() == 1 && segments.front().t_start == 0.0)
        return fmt(segments.front().velocity);
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i)
        out += (i ? "; " : "") + fmt(segments[i].t_start) + ": " + fmt(segments[i].velocity);
    return out;
}

struct Field
{
    std::function<void(ScenarioConfig &, const std::string &)> parse;
    std::function<std::string(const ScenarioConfig &)> format;
};

Field real(double ScenarioConfig::*member)
{
    return {[member](ScenarioConfig &c, const std::string &v) { c.*member = to_double(v); },
            [member](const ScenarioConfig &c) { return fmt(c.*member); }};
}

Field integer(int ScenarioConfig::*member)
{
    return {[member](ScenarioConfig &c, const std::string &v) { c.*member = to_int<int>(v); },
            [member](const ScenarioConfig &c) { return std::to_string(c.*member); }};
}

void add_array(std::vector<std::pair<std::string, Field>> &fields, const std::string &prefix,
               AntennaArray ScenarioConfig::*array)
{
    fields.push_back({prefix + "_elements",
                      {[array](ScenarioConfig &c, const std::string &v) { (c.*array).n_elements = to_int<int>(v); },
                       [array](const ScenarioConfig &c) { return std::to_string((c.*array).n_elements); }}});
    fields.push_back({prefix + "_spacing",
                      {[array](ScenarioConfig &c, const std::string &v) { (c.*array).spacing = to_double(v); },
                       [array](const ScenarioConfig &c) { return fmt((c.*array).spacing); }}});
    fields.push_back({prefix + "_axis",
                      {[array](ScenarioConfig &c, const std::string &v) { (c.*array).axis = to_vec3(v); },
                       [array](const ScenarioConfig &c) { return fmt((c.*array).axis); }}});
    fields.push_back({prefix + "_origin",
                      {[array](ScenarioConfig &c, const std::string &v) { (c.*array).origin = to_vec3(v); },
                       [array](const ScenarioConfig &c) { return fmt((c.*array).origin); }}});
    fields.push_back({prefix + "_velocity",
                      {[array](ScenarioConfig &c, const std::string &v) { (c.*array).velocity = to_segments(v); },
                       [array](const ScenarioConfig &c) { return fmt((c.*array).velocity); }}});
}

// Ordered as written by format_scenario
const std::vector<std::pair<std::string, Field>> &fields()
{
    static const auto table = [] {
        std::vector<std::pair<std::string, Field>> f;
        f.push_back({"f_c", real(&ScenarioConfig::f_c)});
        f.push_back({"B", real(&ScenarioConfig::bandwidth)});
        f.push_back({"n_freq", integer(&ScenarioConfig::n_freq)});
        f.push_back({"t_total", real(&ScenarioConfig::t_total)});
        f.push_back({"t_ch", real(&ScenarioConfig::t_ch)});
        add_array(f, "tx", &ScenarioConfig::tx_array);
        add_array(f, "rx", &ScenarioConfig::rx_array);
        f.push_back({"n_clusters", integer(&ScenarioConfig::n_clusters_init)});
        f.push_back({"rays_per_cluster", integer(&ScenarioConfig::rays_per_cluster)});
        f.push_back({"birth_rate", real(&ScenarioConfig::birth_rate)});
        f.push_back({"death_rate", real(&ScenarioConfig::death_rate)});
        f.push_back({"cluster_update_period", real(&ScenarioConfig::cluster_update_period)});
        f.push_back({"r_tau", real(&ScenarioConfig::r_tau)});
        f.push_back({"ds", real(&ScenarioConfig::delay_spread)});
        f.push_back({"gamma", real(&ScenarioConfig::gamma)});
        f.push_back({"cluster_dist_mean", real(&ScenarioConfig::cluster_dist_mean)});
        f.push_back({"azimuth_mean", real(&ScenarioConfig::azimuth_mean)});
        f.push_back({"azimuth_std", real(&ScenarioConfig::azimuth_std)});
        f.push_back({"elevation_mean", real(&ScenarioConfig::elevation_mean)});
        f.push_back({"elevation_std", real(&ScenarioConfig::elevation_std)});
        f.push_back({"ellipsoid_stds",
                     {[](ScenarioConfig &c, const std::string &v) { c.ellipsoid_stds = to_vec3(v); },
                      [](const ScenarioConfig &c) { return fmt(c.ellipsoid_stds); }}});
        f.push_back({"tau_link_mean", real(&ScenarioConfig::tau_link_mean)});
        f.push_back({"cluster_speed_std", real(&ScenarioConfig::cluster_speed_std)});
        f.push_back({"visibility_distance", real(&ScenarioConfig::visibility_distance)});
        f.push_back({"min_scatterer_distance", real(&ScenarioConfig::min_scatterer_distance)});
        f.push_back({"seed",
                     {[](ScenarioConfig &c, const std::string &v) { c.rng_seed = to_int<std::uint64_t>(v); },
                      [](const ScenarioConfig &c) { return std::to_string(c.rng_seed); }}});
        return f;
    }();
    return table;
}

const std::vector<std::string> mandatory_keys{"f_c", "B"};
} // namespace

ScenarioConfig parse_scenario(const std::string &text)
{
    std::map<std::string, const Field *> lookup;
    for (const auto &[name, field] : fields())
        lookup[name] = &field;

    ScenarioConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    int line_no = 0;
    for (std::string line; std::getline(in, line);)
    {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (eq == std::string::npos)
            throw FormatError(where + "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto it = lookup.find(key);
        if (it == lookup.end())
            throw FormatError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw FormatError(where + "duplicate key '" + key + "'");
        if (value.empty())
            throw FormatError(where + key + ": missing value");
        try
        {
            it->second->parse(config, value);
        }
        catch (const std::invalid_argument &e)
        {
            throw FormatError(where + key + ": " + e.what());
        }
    }

    std::string missing;
    for (const auto &k : mandatory_keys)
        if (!seen.count(k))
            missing += (missing.empty() ? "" : ", ") + k;
    if (!missing.empty())
        throw FormatError("missing mandatory keys: " + missing);

    // Half-wavelength spacing at the configured carrier unless given explicitly
    if (!seen.count("tx_spacing"))
        config.tx_array.spacing = 0.5 * config.wavelength();
    if (!seen.count("rx_spacing"))
        config.rx_array.spacing = 0.5 * config.wavelength();

    try
    {
        config.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw FormatError(std::string("invalid scenario: ") + e.what());
    }
    return config;
}

std::string format_scenario(const ScenarioConfig &config)
{
    std::string out = "# chemu scenario\n";
    for (const auto &[name, field] : fields())
        out += name + " = " + field.format(config) + "\n";
    return out;
}

ScenarioConfig read_scenario(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try
    {
        return parse_scenario(text.str());
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_scenario(const std::filesystem::path &path, const ScenarioConfig &config)
{
    const std::string text = format_scenario(config);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw FormatError("cannot write " + path.string());
    out << text;
    if (!out)
        throw FormatError("write failed: " + path.string());
}

bool same_scenario(const ScenarioConfig &a, const ScenarioConfig &b)
{
    return format_scenario(a) == format_scenario(b);
}

} // namespace chemu
