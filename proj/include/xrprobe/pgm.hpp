#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "xrprobe/error.hpp"

namespace xrprobe {

/// 8-bit single-channel raster, row-major. Used for segmentation masks.
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::size_t size() const noexcept { return pixels.size(); }
};

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

inline std::size_t read_pnm_int(std::istream& in, const std::string& path) {
  skip_pnm_space(in);
  std::size_t v = 0;
  if (!(in >> v)) throw DataError("malformed PGM header in '" + path + "'");
  return v;
}

}  // namespace detail

/// Reads a binary (P5) PGM with maxval <= 255.
inline Raster read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mask '" + path + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') throw DataError("'" + path + "' is not a binary PGM (P5)");
  Raster r;
  r.width = detail::read_pnm_int(in, path);
  r.height = detail::read_pnm_int(in, path);
  const std::size_t maxval = detail::read_pnm_int(in, path);
  if (maxval == 0 || maxval > 255) throw DataError("'" + path + "': only 8-bit PGM is supported");
  if (r.width == 0 || r.height == 0) throw DataError("'" + path + "': empty raster");
  in.get();  // single whitespace byte before the payload
  r.pixels.resize(r.width * r.height);
  in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(r.pixels.size())) throw DataError("'" + path + "': truncated pixel data");
  return r;
}

inline void write_pgm(const Raster& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "P5\n" << r.width << ' ' << r.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!os) throw DataError("write failed for '" + path + "'");
}

}  // namespace xrprobe
