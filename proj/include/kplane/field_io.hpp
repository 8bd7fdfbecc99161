#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kplane/errors.hpp"
#include "kplane/fields.hpp"

namespace kplane {

// Flat binary layout, little-endian:
//   int64 n | int64 dims[n] | float64 h | float64 lo[n] | float64 hi[n] |
//   float64 values[prod(dims)]   (row major, axis 0 slowest)

inline void write_grid_binary(const GridData& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParameterError("cannot open for writing: " + path);
    const auto put_i64 = [&](std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    const auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    put_i64(g.n);
    for (int d : g.dims) put_i64(d);
    put_f64(g.h);
    for (double v : g.lo) put_f64(v);
    for (double v : g.hi()) put_f64(v);
    for (double v : g.values) put_f64(v);
}

inline GridData read_grid_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open for reading: " + path);
    const auto get_i64 = [&]() {
        std::int64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const auto get_f64 = [&]() {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    GridData g;
    g.n = static_cast<int>(get_i64());
    if (g.n < 1 || g.n > 16) throw ParameterError("grid file corrupt: bad dimension");
    g.dims.resize(g.n);
    std::size_t total = 1;
    for (int& d : g.dims) {
        d = static_cast<int>(get_i64());
        if (d < 1 || d > 1 << 20) throw ParameterError("grid file corrupt: bad axis size");
        total *= d;
    }
    g.h = get_f64();
    g.lo.resize(g.n);
    for (double& v : g.lo) v = get_f64();
    for (int i = 0; i < g.n; ++i) get_f64(); // hi is derived, skip
    g.values.resize(total);
    in.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(total * 8));
    if (!in) throw ParameterError("grid file corrupt: truncated payload");
    return g;
}

// Portable text form for small grids: header line then whitespace values.
inline void write_grid_text(const GridData& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open for writing: " + path);
    out.precision(17);
    out << g.n;
    for (int d : g.dims) out << ' ' << d;
    out << ' ' << g.h;
    for (double v : g.lo) out << ' ' << v;
    out << '\n';
    for (std::size_t i = 0; i < g.values.size(); ++i)
        out << g.values[i] << ((i + 1) % 8 == 0 ? '\n' : ' ');
    out << '\n';
}

inline GridData read_grid_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open for reading: " + path);
    GridData g;
    in >> g.n;
    if (!in || g.n < 1 || g.n > 16) throw ParameterError("grid text corrupt: bad dimension");
    g.dims.resize(g.n);
    std::size_t total = 1;
    for (int& d : g.dims) {
        in >> d;
        total *= d;
    }
    in >> g.h;
    g.lo.resize(g.n);
    for (double& v : g.lo) in >> v;
    g.values.resize(total);
    for (double& v : g.values) in >> v;
    if (!in) throw ParameterError("grid text corrupt: truncated payload");
    return g;
}

/// Sample any field onto a centered cubic grid.
inline GridData sample_to_grid(const Field& f, const Vec& lo, const Vec& hi, int cells_per_axis) {
    std::vector<int> dims(f.n, cells_per_axis);
    return detail::resample_to_grid(f.eval, f.n, lo, hi, dims);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string::npos ? next : next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

inline std::vector<double> parse_csv_numbers(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

} // namespace detail

/// Field specification grammar used by the CLI:
///   builtin:extremizer[:c=..][:scale=..][:cx=..]
///   builtin:gaussian[:width=..]
///   builtin:indicator:box:lo1,hi1,lo2,hi2,...
///   builtin:indicator:ball:r[,c1,c2,...]
///   file:<path>          (binary grid; .txt reads the text form)
inline Field parse_field_spec(const std::string& spec, int n, int k) {
    const auto parts = detail::split(spec, ':');
    if (parts.empty()) throw ParameterError("empty field spec");
    if (parts[0] == "file") {
        if (parts.size() < 2) throw ParameterError("file: spec needs a path");
        std::string path = spec.substr(5);
        const bool text = path.size() > 4 && path.substr(path.size() - 4) == ".txt";
        GridData g = text ? read_grid_text(path) : read_grid_binary(path);
        if (g.n != n) throw ParameterError("grid file dimension does not match --n");
        return make_grid_field(std::move(g));
    }
    if (parts[0] != "builtin") throw ParameterError("unknown field spec: " + spec);
    if (parts.size() < 2) throw ParameterError("builtin: spec needs a name");
    const std::string& name = parts[1];
    if (name == "extremizer") {
        double c = 1.0, scale = 1.0, cx = 0.0;
        for (std::size_t i = 2; i < parts.size(); ++i) {
            const auto kv = detail::split(parts[i], '=');
            if (kv.size() != 2) throw ParameterError("bad extremizer parameter: " + parts[i]);
            if (kv[0] == "c")
                c = std::stod(kv[1]);
            else if (kv[0] == "scale")
                scale = std::stod(kv[1]);
            else if (kv[0] == "cx")
                cx = std::stod(kv[1]);
            else
                throw ParameterError("unknown extremizer parameter: " + kv[0]);
        }
        Matrix lin = Matrix::identity(n);
        for (int i = 0; i < n; ++i) lin(i, i) = scale;
        Vec t(n, 0.0);
        t[0] = -scale * cx; // phi(x) = scale*(x - center e_1)
        return extremizer_field(n, k, AffineMap::make(std::move(lin), std::move(t)), c);
    }
    if (name == "gaussian") {
        double width = 1.0;
        for (std::size_t i = 2; i < parts.size(); ++i) {
            const auto kv = detail::split(parts[i], '=');
            if (kv.size() == 2 && kv[0] == "width")
                width = std::stod(kv[1]);
            else
                throw ParameterError("unknown gaussian parameter: " + parts[i]);
        }
        return gaussian_field(n, width);
    }
    if (name == "indicator") {
        if (parts.size() < 4) throw ParameterError("indicator spec needs a shape and parameters");
        const std::string& shape = parts[2];
        const std::vector<double> nums = detail::parse_csv_numbers(parts[3]);
        if (shape == "box") {
            if (static_cast<int>(nums.size()) != 2 * n)
                throw ParameterError("indicator box needs lo,hi per axis");
            Vec lo(n), hi(n);
            for (int a = 0; a < n; ++a) {
                lo[a] = nums[2 * a];
                hi[a] = nums[2 * a + 1];
            }
            return indicator_box_field(std::move(lo), std::move(hi));
        }
        if (shape == "ball") {
            if (nums.empty()) throw ParameterError("indicator ball needs a radius");
            Vec c(n, 0.0);
            for (int a = 0; a < n && a + 1 < static_cast<int>(nums.size()); ++a) c[a] = nums[a + 1];
            return indicator_ball_field(std::move(c), nums[0]);
        }
        throw ParameterError("unknown indicator shape: " + shape);
    }
    throw ParameterError("unknown builtin field: " + name);
}

} // namespace kplane
