// Copyright (C) 2026 The partlat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "partlat/binary_io.hpp"
#include "partlat/error.hpp"
#include "partlat/geometry.hpp"

namespace partlat {

namespace detail {

inline double parse_double(const std::string& tok, const std::string& where) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw InputError(where + ": not a number: '" + tok + "'");
    return v;
}

inline std::vector<std::string> whitespace_fields(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

}  // namespace detail

/// ASCII XYZ: "x y z" or "x y z nx ny nz" per line; blank lines and lines
/// starting with '#' are skipped.
inline PointCloud parse_xyz(std::string_view text, const std::string& name = "xyz") {
    PointCloud cloud;
    std::vector<Point3> normals;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = detail::whitespace_fields(line);
        if (fields.empty() || fields.front().starts_with('#')) continue;
        const std::string where = name + ":" + std::to_string(line_no);
        if (fields.size() != 3 && fields.size() != 6)
            throw InputError(where + ": expected 3 or 6 fields, got " + std::to_string(fields.size()));
        Point3 p(detail::parse_double(fields[0], where), detail::parse_double(fields[1], where),
                 detail::parse_double(fields[2], where));
        cloud.points.push_back(p);
        if (fields.size() == 6)
            normals.emplace_back(detail::parse_double(fields[3], where), detail::parse_double(fields[4], where),
                                 detail::parse_double(fields[5], where));
    }
    if (!normals.empty()) {
        if (normals.size() != cloud.points.size()) throw InputError(name + ": normals given on only some lines");
        cloud.normals = std::move(normals);
    }
    return cloud;
}

inline std::string format_xyz(const PointCloud& cloud) {
    std::string out;
    char buf[128];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        out += buf;
    }
    return out;
}

/// Binary little-endian PLY; only x, y, z of the vertex element are read.
inline PointCloud parse_ply(std::string_view bytes, const std::string& name = "ply") {
    const auto end_header = bytes.find("end_header\n");
    if (!bytes.starts_with("ply\n") || end_header == std::string_view::npos)
        throw InputError(name + ": not a PLY file");
    std::istringstream header{std::string(bytes.substr(0, end_header))};
    std::string line;
    std::size_t vertex_count = 0;
    bool in_vertex = false, seen_vertex = false, format_ok = false;
    struct Property {
        std::string name;
        std::size_t size;
        bool is_double;
    };
    std::vector<Property> props;
    auto type_size = [&](const std::string& t) -> std::size_t {
        if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
        if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
        if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
        if (t == "double" || t == "float64") return 8;
        throw InputError(name + ": unsupported PLY property type '" + t + "'");
    };
    while (std::getline(header, line)) {
        const auto f = detail::whitespace_fields(line);
        if (f.empty()) continue;
        if (f[0] == "format") {
            if (f.size() < 2 || f[1] != "binary_little_endian")
                throw InputError(name + ": only binary_little_endian PLY is supported");
            format_ok = true;
        } else if (f[0] == "element") {
            if (f.size() != 3) throw InputError(name + ": malformed element line");
            if (seen_vertex) break;  // later elements are not read
            in_vertex = f[1] == "vertex";
            if (!in_vertex) throw InputError(name + ": vertex element must come first");
            seen_vertex = true;
            vertex_count = static_cast<std::size_t>(detail::parse_double(f[2], name));
        } else if (f[0] == "property" && in_vertex) {
            if (f.size() != 3) throw InputError(name + ": list properties on vertices are not supported");
            props.push_back({f[2], type_size(f[1]), f[1] == "double" || f[1] == "float64"});
            if ((f[2] == "x" || f[2] == "y" || f[2] == "z") && f[1] != "float" && f[1] != "float32" &&
                !props.back().is_double)
                throw InputError(name + ": coordinates must be float or double");
        }
    }
    if (!format_ok || !seen_vertex) throw InputError(name + ": PLY header lacks format or vertex element");
    std::size_t stride = 0;
    int offsets[3] = {-1, -1, -1};
    bool doubles[3] = {false, false, false};
    for (const auto& p : props) {
        const int axis = p.name == "x" ? 0 : p.name == "y" ? 1 : p.name == "z" ? 2 : -1;
        if (axis >= 0) {
            offsets[axis] = static_cast<int>(stride);
            doubles[axis] = p.is_double;
        }
        stride += p.size;
    }
    if (offsets[0] < 0 || offsets[1] < 0 || offsets[2] < 0) throw InputError(name + ": vertex lacks x, y or z");
    const std::string_view body = bytes.substr(end_header + std::strlen("end_header\n"));
    if (body.size() < vertex_count * stride) throw InputError(name + ": truncated vertex data");
    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    for (std::size_t v = 0; v < vertex_count; ++v) {
        Point3 p;
        for (int a = 0; a < 3; ++a) {
            const char* src = body.data() + v * stride + static_cast<std::size_t>(offsets[a]);
            if (doubles[a]) {
                ByteReader r(std::string_view(src, 8), name);
                const std::uint64_t lo = r.u32();
                const std::uint64_t hi = r.u32();
                p(a) = std::bit_cast<double>(lo | (hi << 32));
            } else {
                ByteReader r(std::string_view(src, 4), name);
                p(a) = static_cast<double>(r.f32());
            }
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

/// Binary little-endian PLY with float vertex positions.
inline std::string format_ply(const PointCloud& cloud) {
    ByteWriter w;
    w.raw("ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(cloud.size()) +
          "\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
    for (const auto& p : cloud.points)
        for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(p(a)));
    return w.bytes();
}

/// Reads PLY when the file starts with the PLY magic, XYZ otherwise.
inline PointCloud read_point_cloud(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.starts_with("ply\n")) return parse_ply(bytes, path.string());
    return parse_xyz(bytes, path.string());
}

/// One integer part id per point line.
inline std::vector<int> read_part_indices(const std::filesystem::path& path) {
    std::vector<int> ids;
    const auto lines = read_lines(path);
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string tok = trim(lines[k]);
        if (tok.empty() || tok.starts_with('#')) continue;
        int v = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw InputError(path.string() + ":" + std::to_string(k + 1) + ": not a part id: '" + tok + "'");
        ids.push_back(v);
    }
    return ids;
}

}  // namespace partlat
