#pragma once
// Grid file format (graymap-style, binary payload):
//
//   OMPG\n
//   <width> <height>\n
//   <resolution> <origin_x> <origin_y>\n      (%.17g, exact round trip)
//   width*height bytes, row-major, {0 = Free, 1 = Occupied, 2 = Unknown}

#include "ompnav/gridmap.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ompnav {

inline void write_grid(std::ostream& os, const OccupancyGrid& g) {
    char header[256];
    std::snprintf(header, sizeof header, "OMPG\n%d %d\n%.17g %.17g %.17g\n", g.width(), g.height(),
                  g.resolution(), g.origin().x(), g.origin().y());
    os << header;
    os.write(reinterpret_cast<const char*>(g.cells().data()), static_cast<std::streamsize>(g.size()));
    if (!os) throw Error(ErrorCode::Io, "failed writing grid");
}

inline OccupancyGrid read_grid(std::istream& is) {
    std::string magic;
    if (!std::getline(is, magic) || magic != "OMPG") throw Error(ErrorCode::BadMagic, "not a grid file");
    std::string dims, geo;
    if (!std::getline(is, dims) || !std::getline(is, geo))
        throw Error(ErrorCode::TruncatedFile, "grid header truncated");
    int w = 0, h = 0;
    double res = 0, ox = 0, oy = 0;
    std::istringstream ds(dims), gs(geo);
    if (!(ds >> w >> h) || !(gs >> res >> ox >> oy) || w < 0 || h < 0 || !(res > 0))
        throw Error(ErrorCode::ShapeMismatch, "malformed grid header");
    OccupancyGrid g(w, h, res, Vec2(ox, oy));
    is.read(reinterpret_cast<char*>(g.cells().data()), static_cast<std::streamsize>(g.size()));
    if (static_cast<std::size_t>(is.gcount()) != g.size())
        throw Error(ErrorCode::TruncatedFile, "grid payload truncated");
    for (Cell c : g.cells())
        if (static_cast<std::uint8_t>(c) > 2) throw Error(ErrorCode::ShapeMismatch, "cell value out of range");
    return g;
}

inline void save_grid(const std::string& path, const OccupancyGrid& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
    write_grid(os, g);
}

inline OccupancyGrid load_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
    return read_grid(is);
}

}  // namespace ompnav
