/* Copyright 2026 The optofluid Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Run configuration. Grammar, one statement per line:
//
//   # comment                     (also ';'; '#' after a value starts a comment)
//   [section]                     following keys live in `section`
//   key = value                   -> section.key
//   section.key = value           explicit, allowed anywhere
//   key = [v1, v2, ...]           inline array
//   key = 2*pi*10e6 rad/s         products/quotients of numbers and `pi`,
//                                 optional trailing SI unit
//
// Top-level keys: stage, units (natural | SI), seed. With units = SI every
// dimensional value is read in SI and converted to natural units (hbar = 1)
// fixed by units.frequency_scale [rad/s] and units.length_scale [m].
// Every key must be consumed by the selected stage; leftovers are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "optofluid/constants.hpp"
#include "optofluid/error.hpp"

namespace optofluid::cli {

using json = nlohmann::ordered_json;

enum class Units { natural, si };

/// Physical dimension of a configuration value.
enum class Dim { none, frequency, time, length, mass, coupling, velocity, density, wavenumber, circulation, flux, temperature };

inline const char* si_unit(Dim d)
{
    switch (d) {
    case Dim::frequency: return "rad/s";
    case Dim::time: return "s";
    case Dim::length: return "m";
    case Dim::mass: return "kg";
    case Dim::coupling: return "J*m^2";
    case Dim::velocity: return "m/s";
    case Dim::density: return "1/m^2";
    case Dim::wavenumber: return "1/m";
    case Dim::circulation: return "m^2/s";
    case Dim::flux: return "1/(m*s)";
    case Dim::temperature: return "K";
    default: return "";
    }
}

/// Natural units: frequency f0 [rad/s], length l0 [m], hbar = 1. Mass unit
/// hbar / (f0 l0^2), interaction unit hbar f0 l0^2.
struct UnitScale {
    double frequency = 1.0;
    double length = 1.0;

    double factor(Dim d) const   // SI value = natural value * factor
    {
        const double f0 = frequency, l0 = length;
        switch (d) {
        case Dim::frequency: return f0;
        case Dim::time: return 1.0 / f0;
        case Dim::length: return l0;
        case Dim::mass: return si::hbar / (f0 * l0 * l0);
        case Dim::coupling: return si::hbar * f0 * l0 * l0;
        case Dim::velocity: return f0 * l0;
        case Dim::density: return 1.0 / (l0 * l0);
        case Dim::wavenumber: return 1.0 / l0;
        case Dim::circulation: return f0 * l0 * l0;
        case Dim::flux: return f0 / l0;
        default: return 1.0;
        }
    }
    double to_natural(double v, Dim d) const { return v / factor(d); }
    double to_si(double v, Dim d) const { return v * factor(d); }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_key(std::string_view k)
{
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    return true;
}

inline std::optional<double> parse_factor(std::string_view s)
{
    if (s == "pi") return pi;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

/// "2*pi*1e6", "-0.5", "1/3". No spaces inside the expression.
inline std::optional<double> parse_number(std::string_view s)
{
    if (s.empty()) return std::nullopt;
    double v = 1.0;
    char op = '*';
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        // 'e-3' exponents are not operators; only * and / split factors.
        if (i < s.size() && s[i] != '*' && s[i] != '/') continue;
        const auto f = parse_factor(s.substr(start, i - start));
        if (!f) return std::nullopt;
        v = op == '*' ? v * *f : v / *f;
        if (i < s.size()) op = s[i];
        start = i + 1;
    }
    return v;
}

}  // namespace detail

class Config {
public:
    struct Entry {
        std::string raw;
        std::size_t line = 0;
        bool used = false;
    };

    Config() = default;

    /// Parses the text; units are resolved immediately, stage presence is
    /// checked by `stage()`.
    static Config parse(std::string_view text)
    {
        Config c;
        std::string section;
        std::size_t lineno = 0;
        std::istringstream in{std::string(text)};
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view s = detail::trim(line);
            if (s.empty() || s.front() == '#' || s.front() == ';') continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError(lineno, "unterminated section header");
                section = std::string(detail::trim(s.substr(1, s.size() - 2)));
                if (!detail::valid_key(section) || section.find('.') != std::string::npos)
                    throw ConfigError(lineno, "invalid section name '" + section + "'");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string_view::npos) throw ConfigError(lineno, "expected 'key = value'");
            const std::string key(detail::trim(s.substr(0, eq)));
            std::string_view val = detail::trim(s.substr(eq + 1));
            if (!detail::valid_key(key)) throw ConfigError(lineno, "invalid key '" + key + "'");
            if (!val.empty() && val.front() == '"') {
                const auto close = val.find('"', 1);
                if (close == std::string_view::npos) throw ConfigError(lineno, "unterminated string");
                const auto rest = detail::trim(val.substr(close + 1));
                if (!rest.empty() && rest.front() != '#') throw ConfigError(lineno, "text after string value");
                val = val.substr(0, close + 1);
            } else if (const auto h = val.find('#'); h != std::string_view::npos) {
                val = detail::trim(val.substr(0, h));
            }
            const std::string full = section.empty() || key.find('.') != std::string::npos ? key : section + "." + key;
            c.set(full, std::string(val), lineno);
        }
        c.resolve_units();
        return c;
    }

    static Config load(const std::string& path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ConfigError(0, "cannot open config file '" + path + "'");
        std::ostringstream ss;
        ss << f.rdbuf();
        Config c = parse(ss.str());
        c.text_ = ss.str();
        return c;
    }

    /// Command-line overrides "a.b=1,c=2"; keys without a section go to
    /// `default_section`.
    void apply_overrides(std::string_view list, const std::string& default_section)
    {
        std::size_t start = 0;
        while (start <= list.size()) {
            auto end = list.find(',', start);
            if (end == std::string_view::npos) end = list.size();
            const auto item = detail::trim(list.substr(start, end - start));
            start = end + 1;
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw ConfigError(0, "override '" + std::string(item) + "' is not key=value");
            std::string key(detail::trim(item.substr(0, eq)));
            if (!detail::valid_key(key)) throw ConfigError(0, "invalid override key '" + key + "'");
            if (key.find('.') == std::string::npos && !default_section.empty()) key = default_section + "." + key;
            entries_[key] = Entry{std::string(detail::trim(item.substr(eq + 1))), 0, false};
            overrides_ += std::string(item) + "\n";
        }
        resolve_units();
    }

    const std::string& stage()
    {
        if (!stage_) {
            auto it = entries_.find("stage");
            if (it == entries_.end() || unquote(it->second.raw).empty()) throw ConfigError(0, "stage required");
            it->second.used = true;
            stage_ = unquote(it->second.raw);
            static const char* known[] = {"rdr", "kernel", "lattice", "nlse", "metric", "kg", "pipeline"};
            bool ok = false;
            for (const char* k : known) ok = ok || *stage_ == k;
            if (!ok) throw ConfigError(it->second.line, "unknown stage '" + *stage_ + "'");
            echo_["stage"] = *stage_;
        }
        return *stage_;
    }

    Units units() const noexcept { return units_; }
    const UnitScale& scale() const noexcept { return scale_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::size_t line_of(const std::string& key) const
    {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    /// Dimensional scalar in natural units.
    double number(const std::string& key, Dim dim, std::optional<double> fallback = std::nullopt)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (!fallback) throw ConfigError(0, "missing required key '" + key + "'");
            echo_[key] = *fallback;
            return *fallback;
        }
        it->second.used = true;
        const double v = convert(it->second.raw, dim, key, it->second.line);
        echo_[key] = v;
        return v;
    }

    std::vector<double> numbers(const std::string& key, Dim dim, std::optional<std::vector<double>> fallback = std::nullopt)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (!fallback) throw ConfigError(0, "missing required key '" + key + "'");
            echo_[key] = *fallback;
            return *fallback;
        }
        it->second.used = true;
        const std::string& raw = it->second.raw;
        if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
            throw ConfigError(it->second.line, "'" + key + "' must be an array [a, b, ...]");
        std::vector<double> out;
        const std::string_view body = detail::trim(std::string_view(raw).substr(1, raw.size() - 2));
        std::size_t start = 0;
        while (!body.empty() && start <= body.size()) {
            auto end = body.find(',', start);
            if (end == std::string_view::npos) end = body.size();
            out.push_back(convert(std::string(detail::trim(body.substr(start, end - start))), dim, key, it->second.line));
            start = end + 1;
        }
        echo_[key] = out;
        return out;
    }

    long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (!fallback) throw ConfigError(0, "missing required key '" + key + "'");
            echo_[key] = *fallback;
            return *fallback;
        }
        it->second.used = true;
        long long v = 0;
        const std::string& r = it->second.raw;
        const auto [p, ec] = std::from_chars(r.data(), r.data() + r.size(), v);
        if (ec != std::errc() || p != r.data() + r.size())
            throw ConfigError(it->second.line, "'" + key + "' must be an integer, got '" + r + "'");
        echo_[key] = v;
        return v;
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt)
    {
        const long long v = integer(key, fallback ? std::optional<long long>(static_cast<long long>(*fallback)) : std::nullopt);
        if (v < 0) throw ConfigError(line_of(key), "'" + key + "' must be >= 0");
        return static_cast<std::size_t>(v);
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt)
    {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            if (!fallback) throw ConfigError(0, "missing required key '" + key + "'");
            echo_[key] = *fallback;
            return *fallback;
        }
        it->second.used = true;
        const std::string v = unquote(it->second.raw);
        echo_[key] = v;
        return v;
    }

    std::string choice(const std::string& key, const std::vector<std::string>& allowed, const std::string& fallback)
    {
        const std::string v = text(key, fallback);
        for (const auto& a : allowed)
            if (v == a) return v;
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(line_of(key), "'" + key + "' must be one of {" + list + "}, got '" + v + "'");
    }

    bool flag(const std::string& key, bool fallback)
    {
        const std::string v = text(key, fallback ? "true" : "false");
        if (v == "true") return echo_[key] = true, true;
        if (v == "false") return echo_[key] = false, false;
        throw ConfigError(line_of(key), "'" + key + "' must be true or false");
    }

    /// Strictness: every key must have been read by the stage.
    void require_all_used() const
    {
        for (const auto& [k, e] : entries_)
            if (!e.used) throw ConfigError(e.line, "unknown key '" + k + "'");
    }

    /// Every value the run used, defaults included, in natural units.
    const json& echo() const noexcept { return echo_; }
    /// Source text plus overrides, the input of the config hash.
    std::string canonical_text() const { return text_ + "\n#overrides\n" + overrides_; }
    void set_text(std::string t) { text_ = std::move(t); }

private:
    void set(const std::string& key, std::string raw, std::size_t line)
    {
        if (entries_.count(key)) throw ConfigError(line, "duplicate key '" + key + "'");
        entries_[key] = Entry{std::move(raw), line, false};
    }

    static std::string unquote(const std::string& r)
    {
        if (r.size() >= 2 && r.front() == '"' && r.back() == '"') return r.substr(1, r.size() - 2);
        return r;
    }

    void resolve_units()
    {
        units_ = Units::natural;
        if (auto it = entries_.find("units"); it != entries_.end()) {
            it->second.used = true;
            const std::string u = unquote(it->second.raw);
            if (u == "SI" || u == "si") units_ = Units::si;
            else if (u != "natural") throw ConfigError(it->second.line, "units must be natural or SI, got '" + u + "'");
        }
        echo_["units"] = units_ == Units::si ? "SI" : "natural";
        // The scales themselves are always given in SI.
        scale_ = UnitScale{};
        for (auto [k, dst] : {std::pair{"units.frequency_scale", &scale_.frequency}, std::pair{"units.length_scale", &scale_.length}}) {
            auto it = entries_.find(k);
            if (it == entries_.end()) {
                echo_[k] = *dst;
                continue;
            }
            it->second.used = true;
            const auto v = detail::parse_number(strip_unit(it->second.raw, k == std::string("units.frequency_scale") ? Dim::frequency : Dim::length, k, it->second.line, true));
            if (!v || !(*v > 0.0) || !std::isfinite(*v)) throw ConfigError(it->second.line, std::string(k) + " must be a positive number");
            *dst = *v;
            echo_[k] = *v;
        }
    }

    // Splits "<expr> <unit>" and validates the unit against `dim`.
    std::string strip_unit(const std::string& raw, Dim dim, const std::string& key, std::size_t line, bool si_values) const
    {
        const auto sp = raw.find_first_of(" \t");
        if (sp == std::string::npos) return raw;
        const std::string unit(detail::trim(std::string_view(raw).substr(sp)));
        if (!si_values)
            throw ConfigError(line, "unit mismatch: '" + key + "' carries unit '" + unit + "' but units = natural");
        if (dim == Dim::none || unit != si_unit(dim))
            throw ConfigError(line, "unit mismatch: '" + key + "' expects " +
                                        (dim == Dim::none ? std::string("no unit") : std::string(si_unit(dim))) + ", got '" + unit + "'");
        return raw.substr(0, sp);
    }

    double convert(const std::string& raw, Dim dim, const std::string& key, std::size_t line) const
    {
        const bool si_mode = units_ == Units::si;
        const std::string expr = strip_unit(raw, dim, key, line, si_mode || dim == Dim::temperature);
        const auto v = detail::parse_number(expr);
        if (!v || !std::isfinite(*v)) throw ConfigError(line, "'" + key + "' is not a number: '" + raw + "'");
        return si_mode ? scale_.to_natural(*v, dim) : *v;
    }

    std::map<std::string, Entry> entries_;
    std::optional<std::string> stage_;
    Units units_ = Units::natural;
    UnitScale scale_;
    json echo_ = json::object();
    std::string text_, overrides_;
};

inline Config parse_config(std::string_view text)
{
    Config c = Config::parse(text);
    c.set_text(std::string(text));
    return c;
}

}  // namespace optofluid::cli
