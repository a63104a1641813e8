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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "optofluid/error.hpp"
#include "optofluid/field_io.hpp"

#ifndef OPTOFLUID_VERSION
#define OPTOFLUID_VERSION "0.0.0"
#endif

namespace optofluid::cli {

using json = nlohmann::ordered_json;

inline std::string sha256_hex(std::span<const std::uint8_t> data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    std::ostringstream s;
    for (unsigned i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return s.str();
}

inline std::string sha256_hex(std::string_view text)
{
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string sha256_file(const std::filesystem::path& p)
{
    std::ifstream f(p, std::ios::binary);
    if (!f) throw Error("sha256: cannot read '" + p.string() + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return sha256_hex(std::span<const std::uint8_t>(buf));
}

inline std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char b[32];
    std::strftime(b, sizeof b, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return b;
}

/// Writes via a temporary sibling and rename, so readers never see a
/// partial file.
inline void write_atomic(const std::filesystem::path& path, std::string_view bytes)
{
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write '" + tmp + "'");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw Error("write failed for '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

/// Fixed-format CSV; doubles with 17 significant digits so files are
/// reproducible and lossless.
class Csv {
public:
    explicit Csv(const std::vector<std::string>& header)
    {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }
    Csv& row(const std::vector<double>& values)
    {
        char b[40];
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::snprintf(b, sizeof b, "%.17g", values[i]);
            out_ << (i ? "," : "") << b;
        }
        out_ << "\n";
        return *this;
    }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

/// Output directory, artifact registry and manifest of one run.
class Run {
public:
    Run(std::filesystem::path out, std::string stage, std::string config_hash, std::uint64_t seed, unsigned threads)
        : out_(std::move(out))
    {
        std::filesystem::create_directories(out_);
        m_["tool"] = "optofluid";
        m_["version"] = OPTOFLUID_VERSION;
        m_["stage"] = std::move(stage);
        m_["config_hash"] = std::move(config_hash);
        m_["seed"] = seed;
        m_["threads"] = threads;
        m_["started"] = utc_now();
        m_["status"] = "running";
        m_["stages"] = json::array();
        m_["derived"] = json::object();
        m_["artifacts"] = json::array();
    }

    const std::filesystem::path& dir() const noexcept { return out_; }
    json& derived() { return m_["derived"]; }
    json& manifest() { return m_; }

    void stage_status(const std::string& name, const std::string& status, const std::string& reason = {})
    {
        json s{{"stage", name}, {"status", status}};
        if (!reason.empty()) s["reason"] = reason;
        m_["stages"].push_back(std::move(s));
    }

    void write_text(const std::string& name, std::string_view text)
    {
        write_atomic(out_ / name, text);
        record(name, text.size(), sha256_hex(text));
    }
    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

    template <class T>
    void write_field(const std::string& name, const Field2D<T>& f, const json& sidecar = json::object())
    {
        std::vector<std::uint8_t> bytes;
        if constexpr (std::is_same_v<T, cplx>) bytes = encode_field(f);
        else bytes = encode_field(to_complex(f));
        write_atomic(out_ / name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        record(name, bytes.size(), sha256_hex(std::span<const std::uint8_t>(bytes)));
        json sc = sidecar;
        sc["file"] = name;
        sc["nx"] = f.nx();
        sc["ny"] = f.ny();
        sc["dx"] = f.dx();
        sc["dy"] = f.dy();
        write_json(name + ".json", sc);
    }

    /// Terminal state; the manifest is the last file written.
    void finish(const std::string& status, const std::string& error = {})
    {
        m_["status"] = status;
        if (!error.empty()) m_["error"] = error;
        m_["finished"] = utc_now();
        write_atomic(out_ / "manifest.json", m_.dump(2) + "\n");
    }

private:
    void record(const std::string& name, std::size_t bytes, const std::string& sha)
    {
        for (auto& a : m_["artifacts"])
            if (a["path"] == name) {
                a["bytes"] = bytes;
                a["sha256"] = sha;
                return;
            }
        m_["artifacts"].push_back({{"path", name}, {"bytes", bytes}, {"sha256", sha}});
    }

    std::filesystem::path out_;
    json m_;
};

}  // namespace optofluid::cli
