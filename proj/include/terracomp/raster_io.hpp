#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "terracomp/raster.hpp"

namespace terracomp {

// Two on-disk containers:
//   - binary portable graymap ("P5"), maxval <= 65535, big-endian samples,
//     two bytes per sample when maxval > 255, one byte otherwise;
//   - "R32" rasters for wide-range images: ASCII header
//     "R32 <width> <height> <max_value>\n" followed by width*height
//     little-endian 4-byte unsigned values, row-major.

inline void write_pgm(const Raster& r, const std::string& path) {
  r.validate();
  if (r.max_value < 1 || r.max_value > 65535)
    throw std::invalid_argument(
        "write_pgm: max_value " + std::to_string(r.max_value) +
        " outside [1, 65535]; use the R32 container");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << r.width << " " << r.height << "\n" << r.max_value << "\n";
  const bool wide = r.max_value > 255;
  std::string payload;
  payload.reserve(r.size() * (wide ? 2 : 1));
  for (std::uint32_t v : r.data) {
    if (wide) payload.push_back(static_cast<char>((v >> 8) & 0xff));
    payload.push_back(static_cast<char>(v & 0xff));
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write_pgm: write failed for " + path);
}

inline void write_r32(const Raster& r, const std::string& path) {
  r.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_r32: cannot open " + path);
  out << "R32 " << r.width << " " << r.height << " " << r.max_value << "\n";
  std::string payload;
  payload.reserve(r.size() * 4);
  for (std::uint32_t v : r.data) {
    payload.push_back(static_cast<char>(v & 0xff));
    payload.push_back(static_cast<char>((v >> 8) & 0xff));
    payload.push_back(static_cast<char>((v >> 16) & 0xff));
    payload.push_back(static_cast<char>((v >> 24) & 0xff));
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write_r32: write failed for " + path);
}

/// Writes to the graymap container when the declared range fits 16 bits
/// and is nonzero, to the R32 container otherwise.
inline void write_raster(const Raster& r, const std::string& path) {
  if (r.max_value >= 1 && r.max_value <= 65535)
    write_pgm(r, path);
  else
    write_r32(r, path);
}

namespace detail {

// Skips PGM whitespace and '#' comments, then parses one unsigned token.
inline std::uint64_t pgm_token(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF && (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF || c < '0' || c > '9')
    throw std::runtime_error("read_raster: malformed graymap header in " + path);
  std::uint64_t v = 0;
  while (c >= '0' && c <= '9') {
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > 0xffffffffull)
      throw std::runtime_error("read_raster: header value out of range in " + path);
    c = in.get();
  }
  if (c != EOF) in.unget();
  return v;
}

}  // namespace detail

inline Raster read_pgm(std::istream& in, const std::string& path) {
  const auto w = detail::pgm_token(in, path);
  const auto h = detail::pgm_token(in, path);
  const auto maxv = detail::pgm_token(in, path);
  if (w == 0 || h == 0 || maxv == 0 || maxv > 65535)
    throw std::runtime_error("read_raster: bad graymap dimensions in " + path);
  in.get();  // single whitespace byte after maxval
  Raster r(static_cast<int>(w), static_cast<int>(h),
           static_cast<std::uint32_t>(maxv));
  const bool wide = maxv > 255;
  std::string payload(r.size() * (wide ? 2 : 1), '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw std::runtime_error("read_raster: truncated graymap payload in " + path);
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::uint32_t v;
    if (wide) {
      v = (static_cast<std::uint32_t>(static_cast<unsigned char>(payload[2 * i])) << 8) |
          static_cast<std::uint32_t>(static_cast<unsigned char>(payload[2 * i + 1]));
    } else {
      v = static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i]));
    }
    if (v > r.max_value)
      throw std::runtime_error("read_raster: sample exceeds declared max in " + path);
    r.data[i] = v;
  }
  return r;
}

inline Raster read_r32(std::istream& in, const std::string& path) {
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("read_raster: missing R32 header in " + path);
  long long w = 0, h = 0;
  unsigned long long maxv = 0;
  if (std::sscanf(header.c_str(), "R32 %lld %lld %llu", &w, &h, &maxv) != 3 ||
      w <= 0 || h <= 0 || maxv > 0xffffffffull)
    throw std::runtime_error("read_raster: malformed R32 header in " + path);
  Raster r(static_cast<int>(w), static_cast<int>(h),
           static_cast<std::uint32_t>(maxv));
  std::string payload(r.size() * 4, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size())
    throw std::runtime_error("read_raster: truncated R32 payload in " + path);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto b = [&](std::size_t k) {
      return static_cast<std::uint32_t>(static_cast<unsigned char>(payload[4 * i + k]));
    };
    const std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
    if (v > r.max_value)
      throw std::runtime_error("read_raster: sample exceeds declared max in " + path);
    r.data[i] = v;
  }
  return r;
}

/// Reads either container, dispatching on the magic bytes.
inline Raster read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_raster: cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5')
    return read_pgm(in, path);
  if (in.gcount() == 2 && magic[0] == 'R' && magic[1] == '3') {
    in.seekg(0);
    return read_r32(in, path);
  }
  throw std::runtime_error("read_raster: unrecognized format in " + path);
}

/// Emits "x y gray" triples, one per line, row-major, for external surface
/// plotting.
inline void export_surface(const Raster& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_surface: cannot open " + path);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      out << x << " " << y << " " << r.at(x, y) << "\n";
  if (!out) throw std::runtime_error("export_surface: write failed for " + path);
}

}  // namespace terracomp
