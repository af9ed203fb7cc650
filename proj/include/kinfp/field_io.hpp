#pragma once

#include <cstring>
#include <fstream>
#include <ostream>
#include <string>

#include "kinfp/field.hpp"
#include "kinfp/util.hpp"

namespace kinfp {

// Binary field file: "KFP1", u32 {version=1, d, nt, nx, nv},
// f64 {t_min, t_max, L, V}, then the row-major payload. Little endian.
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    os.write(b, 4);
}

inline void put_f64(std::ostream& os, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    os.write(b, 8);
}

}  // namespace detail

inline void write_field(const Field& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_field: cannot open " + path);
    os.write("KFP1", 4);
    detail::put_u32(os, 1u);
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid.d));
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid.nt));
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid.nx));
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid.nv));
    detail::put_f64(os, f.grid.t_min);
    detail::put_f64(os, f.grid.t_max);
    detail::put_f64(os, f.grid.L);
    detail::put_f64(os, f.grid.V);
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write_field: short write to " + path);
}

inline Field read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_field: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "KFP1", 4) != 0)
        throw std::runtime_error("read_field: bad magic in " + path);

    std::uint32_t head[5];
    char hb[20];
    is.read(hb, 20);
    if (is.gcount() != 20) throw std::runtime_error("read_field: malformed header in " + path);
    std::memcpy(head, hb, 20);
    if (head[0] != 1u) throw std::runtime_error("read_field: unsupported version");

    double geo[4];
    char gb[32];
    is.read(gb, 32);
    if (is.gcount() != 32) throw std::runtime_error("read_field: malformed header in " + path);
    std::memcpy(geo, gb, 32);

    Grid g(static_cast<int>(head[1]), static_cast<int>(head[2]), static_cast<int>(head[3]),
           static_cast<int>(head[4]), geo[0], geo[1], geo[2], geo[3]);
    Field f(g);
    const std::streamsize want =
        static_cast<std::streamsize>(f.data.size() * sizeof(double));
    is.read(reinterpret_cast<char*>(f.data.data()), want);
    if (is.gcount() != want)
        throw std::runtime_error("read_field: truncated payload in " + path + ": expected " +
                                 std::to_string(want) + " bytes, got " +
                                 std::to_string(is.gcount()));
    return f;
}

// One-dimensional slice along a chosen axis with all other indices held
// fixed. axis: 0 = t, 1..d = x_i, d+1..2d = v_i.
inline void write_csv_slice(const Field& f, std::ostream& os, int axis, int it_fix,
                            const int* ix_fix, const int* iv_fix) {
    const Grid& g = f.grid;
    if (axis < 0 || axis > 2 * g.d) throw std::invalid_argument("write_csv_slice: bad axis");
    if (g.d == 1)
        os << "t,x,v,value\n";
    else
        os << "t,x0,x1,v0,v1,value\n";

    const int n = axis == 0 ? g.nt : (axis <= g.d ? g.nx : g.nv);
    for (int s = 0; s < n; ++s) {
        int it = it_fix, ix[2] = {ix_fix[0], g.d == 2 ? ix_fix[1] : 0},
            iv[2] = {iv_fix[0], g.d == 2 ? iv_fix[1] : 0};
        if (axis == 0)
            it = s;
        else if (axis <= g.d)
            ix[axis - 1] = s;
        else
            iv[axis - g.d - 1] = s;
        os << format_double(g.t(it));
        for (int a = 0; a < g.d; ++a) os << ',' << format_double(g.x(ix[a]));
        for (int a = 0; a < g.d; ++a) os << ',' << format_double(g.v(iv[a]));
        os << ',' << format_double(f.at(it, ix, iv)) << '\n';
    }
}

}  // namespace kinfp
