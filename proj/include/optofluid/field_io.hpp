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

// Binary field files.
//
//   offset  size  content
//        0     4  magic "PFLD"
//        4     4  u32 format version (1)
//        8     4  u32 endianness marker 0x01020304
//       12     4  u32 unit tag
//       16     8  u64 nx
//       24     8  u64 ny
//       32     8  f64 dx
//       40     8  f64 dy
//       48     8  u64 FNV-1a hash of the payload bytes
//       56     8  reserved (zero)
//       64        nx*ny complex128 values, x fastest, little endian

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "optofluid/error.hpp"
#include "optofluid/field.hpp"

namespace optofluid {

inline constexpr std::uint32_t field_format_version = 1;
inline constexpr std::size_t field_header_size = 64;

static_assert(std::endian::native == std::endian::little, "field files assume a little-endian host");

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

template <class T>
void put(unsigned char* dst, T v)
{
    std::memcpy(dst, &v, sizeof v);
}

template <class T>
T get(const unsigned char* src)
{
    T v;
    std::memcpy(&v, src, sizeof v);
    return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_field(const ComplexField2D& f)
{
    std::vector<unsigned char> buf(field_header_size + f.size() * sizeof(cplx), 0);
    unsigned char* h = buf.data();
    std::memcpy(h, "PFLD", 4);
    detail::put<std::uint32_t>(h + 4, field_format_version);
    detail::put<std::uint32_t>(h + 8, 0x01020304u);
    detail::put<std::uint32_t>(h + 12, static_cast<std::uint32_t>(f.unit()));
    detail::put<std::uint64_t>(h + 16, f.nx());
    detail::put<std::uint64_t>(h + 24, f.ny());
    detail::put<double>(h + 32, f.dx());
    detail::put<double>(h + 40, f.dy());
    std::memcpy(h + field_header_size, f.values().data(), f.size() * sizeof(cplx));
    detail::put<std::uint64_t>(h + 48, fnv1a(h + field_header_size, f.size() * sizeof(cplx)));
    return buf;
}

inline ComplexField2D decode_field(const std::vector<unsigned char>& buf)
{
    if (buf.size() < field_header_size) throw FormatError("field file truncated: header incomplete");
    const unsigned char* h = buf.data();
    if (std::memcmp(h, "PFLD", 4) != 0) throw FormatError("bad magic");
    if (detail::get<std::uint32_t>(h + 8) != 0x01020304u) throw FormatError("wrong endianness marker");
    const auto version = detail::get<std::uint32_t>(h + 4);
    if (version != field_format_version) throw FormatError("unsupported version " + std::to_string(version));
    const auto unit = detail::get<std::uint32_t>(h + 12);
    if (unit > 1) throw FormatError("unknown unit tag " + std::to_string(unit));
    const auto nx = detail::get<std::uint64_t>(h + 16), ny = detail::get<std::uint64_t>(h + 24);
    const double dx = detail::get<double>(h + 32), dy = detail::get<double>(h + 40);
    if (nx == 0 || ny == 0 || nx > (1ULL << 20) || ny > (1ULL << 20)) throw FormatError("implausible grid size");
    const std::size_t payload = static_cast<std::size_t>(nx * ny) * sizeof(cplx);
    if (buf.size() < field_header_size + payload) throw FormatError("field file truncated: payload incomplete");
    if (buf.size() > field_header_size + payload) throw FormatError("trailing bytes after payload");
    if (fnv1a(h + field_header_size, payload) != detail::get<std::uint64_t>(h + 48))
        throw FormatError("checksum mismatch");
    ComplexField2D f;
    try {
        f = ComplexField2D(nx, ny, dx, dy, static_cast<UnitTag>(unit));
    } catch (const PreconditionError& e) {
        throw FormatError(std::string("invalid header: ") + e.what());
    }
    std::memcpy(f.values().data(), h + field_header_size, payload);
    return f;
}

inline void write_field(const std::filesystem::path& path, const ComplexField2D& f)
{
    const auto buf = encode_field(f);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw Error("write failed: " + path.string());
}

inline ComplexField2D read_field(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_field(buf);
}

/// Real fields are stored as complex files with zero imaginary part.
inline ComplexField2D to_complex(const RealField2D& r)
{
    auto c = ComplexField2D::like(r);
    for (std::size_t i = 0; i < r.size(); ++i) c[i] = r[i];
    return c;
}

}  // namespace optofluid
