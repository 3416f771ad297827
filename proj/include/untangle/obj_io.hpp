#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "untangle/error.hpp"
#include "untangle/mesh.hpp"

namespace untangle {

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t')
            ++i;
        if (i > start)
            tokens.push_back(s.substr(start, i - start));
    }
    return tokens;
}

} // namespace detail

/// Reads the `v` / triangular `f` subset of Wavefront OBJ. Normals, texture
/// coordinates, groups and materials are skipped. Negative (relative) indices
/// are accepted. Polygons with more than three corners are rejected.
inline TriMesh parse_obj(std::istream& in)
{
    TriMesh mesh;
    std::string raw;
    std::size_t line_no = 0;
    std::vector<std::size_t> face_lines;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = detail::trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = detail::trim(line.substr(0, hash));
        if (line.empty())
            continue;
        const auto tokens = detail::split_ws(line);
        if (tokens[0] == "v") {
            if (tokens.size() < 4)
                throw ParseError("vertex record needs three coordinates", line_no);
            Vec3 p;
            for (int k = 0; k < 3; ++k) {
                // std::from_chars for double is not available on every libstdc++ we target.
                const std::string tok(tokens[k + 1]);
                char* end = nullptr;
                p[k] = std::strtod(tok.c_str(), &end);
                if (end != tok.c_str() + tok.size())
                    throw ParseError("malformed coordinate '" + tok + "'", line_no);
            }
            mesh.vertices.push_back(p);
        } else if (tokens[0] == "f") {
            if (tokens.size() != 4)
                throw ParseError("non-triangular face", line_no);
            Face f{};
            for (int k = 0; k < 3; ++k) {
                const std::string_view tok = tokens[k + 1].substr(0, tokens[k + 1].find('/'));
                long long idx = 0;
                const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
                if (ec != std::errc{} || ptr != tok.data() + tok.size() || idx == 0)
                    throw ParseError("malformed face index '" + std::string(tokens[k + 1]) + "'", line_no);
                const auto count = static_cast<long long>(mesh.vertices.size());
                const long long zero_based = idx > 0 ? idx - 1 : count + idx;
                if (zero_based < 0 || zero_based >= count)
                    throw ParseError("face index " + std::to_string(idx) + " out of range", line_no);
                f[k] = static_cast<int>(zero_based);
            }
            mesh.faces.push_back(f);
        }
        // vn, vt, o, g, s, usemtl, mtllib: ignored
    }
    return mesh;
}

inline TriMesh load_obj(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    return parse_obj(in);
}

inline void write_obj(std::ostream& out, const TriMesh& mesh)
{
    out << "# " << mesh.num_vertices() << " vertices, " << mesh.num_faces() << " faces\n";
    char buf[96];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const Face& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void save_obj(const TriMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write '" + path.string() + "'");
    write_obj(out, mesh);
    if (!out)
        throw Error("I/O error while writing '" + path.string() + "'");
}

} // namespace untangle
