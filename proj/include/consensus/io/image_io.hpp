#ifndef CONSENSUS_IO_IMAGE_IO_HPP
#define CONSENSUS_IO_IMAGE_IO_HPP

#include "consensus/grid.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace consensus::io {

/// Malformed or unreadable input data (maps to CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw samples of a decoded image before luma conversion.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;  // interleaved, row-major
};

inline Image to_gray(const RawImage& raw) {
  Image out(raw.width, raw.height);
  const int c = raw.channels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint16_t* s = &raw.samples[i * c];
    if (c >= 3) {
      out[i] = static_cast<float>(0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2]);
    } else {
      out[i] = static_cast<float>(s[0]);
    }
  }
  return out;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline bool has_png_signature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// libpng reports errors by longjmp; everything with a destructor lives in
// the caller's frame, constructed before setjmp.
inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

struct PngReadState {
  std::string error;
  std::vector<unsigned char> buf;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0, depth = 0;
  std::size_t rowbytes = 0;
};

inline bool png_decode(std::FILE* fp, PngReadState& st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st.error,
                                           png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian uint16 in memory
  png_read_update_info(png, info);
  st.width = png_get_image_width(png, info);
  st.height = png_get_image_height(png, info);
  st.channels = png_get_channels(png, info);
  st.depth = png_get_bit_depth(png, info);
  st.rowbytes = png_get_rowbytes(png, info);
  st.buf.resize(st.rowbytes * st.height);
  st.rows.resize(st.height);
  for (png_uint_32 y = 0; y < st.height; ++y) st.rows[y] = st.buf.data() + y * st.rowbytes;
  png_read_image(png, st.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline RawImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path);
  PngReadState st;
  if (!png_decode(fp.get(), st)) {
    throw DataError("png: " + (st.error.empty() ? std::string("decode failed") : st.error) +
                    " in " + path);
  }
  RawImage raw;
  raw.width = static_cast<int>(st.width);
  raw.height = static_cast<int>(st.height);
  raw.channels = st.channels;
  raw.bit_depth = st.depth;
  if (raw.width == 0 || raw.height == 0) throw DataError("zero-size image: " + path);
  const std::size_t per_row = static_cast<std::size_t>(raw.width) * raw.channels;
  raw.samples.resize(per_row * raw.height);
  for (int y = 0; y < raw.height; ++y) {
    const unsigned char* r = st.rows[y];
    for (std::size_t i = 0; i < per_row; ++i) {
      std::uint16_t v = r[i];
      if (raw.bit_depth == 16) std::memcpy(&v, r + 2 * i, 2);
      raw.samples[y * per_row + i] = v;
    }
  }
  return raw;
}

struct PngWriteState {
  std::string error;
  std::vector<unsigned char> buf;
};

inline bool png_encode(std::FILE* fp, int width, int height, int bit_depth,
                       PngWriteState& st) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st.error,
                                            png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * (bit_depth / 8);
  for (int y = 0; y < height; ++y) png_write_row(png, st.buf.data() + y * rowbytes);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline void write_png(const std::string& path, int width, int height,
                      int bit_depth, const std::vector<std::uint16_t>& gray) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path);
  PngWriteState st;
  const int bpp = bit_depth / 8;
  st.buf.resize(gray.size() * bpp);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (bpp == 2) std::memcpy(&st.buf[2 * i], &gray[i], 2);
    else st.buf[i] = static_cast<unsigned char>(gray[i]);
  }
  if (!png_encode(fp.get(), width, height, bit_depth, st)) {
    throw DataError("png: " + st.error + " writing " + path);
  }
}

inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw DataError("pnm: truncated header");
}

inline RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::string magic = next_pnm_token(in);
  int channels = 0;
  bool binary = true;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else if (magic == "P2") { channels = 1; binary = false; }
  else if (magic == "P3") { channels = 3; binary = false; }
  else throw DataError("unsupported image format: " + path);

  RawImage raw;
  raw.channels = channels;
  try {
    raw.width = std::stoi(next_pnm_token(in));
    raw.height = std::stoi(next_pnm_token(in));
    const int maxval = std::stoi(next_pnm_token(in));
    if (maxval <= 0 || maxval > 65535) throw DataError("pnm: bad maxval");
    raw.bit_depth = maxval > 255 ? 16 : 8;
  } catch (const std::logic_error&) {
    throw DataError("pnm: malformed header in " + path);
  }
  if (raw.width <= 0 || raw.height <= 0) throw DataError("zero-size image: " + path);
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * channels;
  raw.samples.resize(n);
  if (!binary) {
    for (std::size_t i = 0; i < n; ++i) {
      long v = 0;
      if (!(in >> v)) throw DataError("pnm: truncated data in " + path);
      raw.samples[i] = static_cast<std::uint16_t>(v);
    }
    return raw;
  }
  in.get();  // single whitespace after maxval
  const int bpp = raw.bit_depth / 8;
  std::vector<unsigned char> buf(n * bpp);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw DataError("pnm: truncated data in " + path);
  }
  for (std::size_t i = 0; i < n; ++i) {
    raw.samples[i] = bpp == 2 ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1])
                              : buf[i];
  }
  return raw;
}

}  // namespace detail

/// Decodes a PNG or PGM/PPM file without any value conversion.
inline RawImage read_raw(const std::string& path) {
  if (detail::has_png_signature(path)) return detail::read_png(path);
  return detail::read_pnm(path);
}

/// Grayscale image with raw sample values (0..255 or 0..65535). Colour
/// inputs are reduced with Rec. 601 luma weights.
inline Image load_image(const std::string& path) { return to_gray(read_raw(path)); }

inline void write_png16(const std::string& path, const Grid<std::uint16_t>& img) {
  detail::write_png(path, img.width(), img.height(), 16, img.values());
}

inline void write_png8(const std::string& path, const Grid<std::uint8_t>& img) {
  std::vector<std::uint16_t> v(img.begin(), img.end());
  detail::write_png(path, img.width(), img.height(), 8, v);
}

inline void write_pgm(const std::string& path, const Grid<std::uint16_t>& img,
                      int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  for (std::uint16_t v : img) {
    if (maxval > 255) {
      out.put(static_cast<char>(v >> 8));
      out.put(static_cast<char>(v & 0xff));
    } else {
      out.put(static_cast<char>(v));
    }
  }
}

/// 16-bit disparity encoding: round(d * 256), 0 reserved for invalid.
/// Values above the 16-bit range are clamped; the number of clamped pixels
/// is returned.
inline std::size_t encode_disparity(const Grid<float>& d,
                                    const Grid<std::uint8_t>* valid,
                                    Grid<std::uint16_t>& out) {
  out = Grid<std::uint16_t>(d.width(), d.height(), 0);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    const double v = std::round(static_cast<double>(d[i]) * 256.0);
    if (!(v >= 0.0)) continue;
    if (v > 65535.0) {
      ++clamped;
      out[i] = 65535;
    } else {
      out[i] = static_cast<std::uint16_t>(v);
    }
  }
  return clamped;
}

inline void write_disparity(const Grid<float>& d, const std::string& path,
                            const Grid<std::uint8_t>* valid = nullptr) {
  Grid<std::uint16_t> enc;
  const std::size_t clamped = encode_disparity(d, valid, enc);
  if (clamped > 0) {
    std::cerr << "warning: " << clamped
              << " disparities exceed 255.996 px and were clamped in " << path
              << '\n';
  }
  write_png16(path, enc);
}

/// Reads a 16-bit disparity PNG (value / 256, 0 = no data). Returns the
/// disparities and the validity mask.
inline std::pair<Grid<float>, Grid<std::uint8_t>> load_disparity(
    const std::string& path) {
  const RawImage raw = read_raw(path);
  if (raw.channels != 1) throw DataError("disparity image must be single-channel: " + path);
  Grid<float> d(raw.width, raw.height, 0.0f);
  Grid<std::uint8_t> valid(raw.width, raw.height, 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (raw.samples[i] == 0) continue;
    d[i] = static_cast<float>(raw.samples[i] / 256.0);
    valid[i] = 1;
  }
  return {std::move(d), std::move(valid)};
}

/// Confidence map as raw 16-bit counts (saturating).
inline void write_confidence(const Grid<std::int32_t>& count,
                             const std::string& path) {
  Grid<std::uint16_t> out(count.width(), count.height(), 0);
  for (std::size_t i = 0; i < count.size(); ++i)
    out[i] = static_cast<std::uint16_t>(std::clamp(count[i], 0, 65535));
  write_png16(path, out);
}

inline Grid<std::int32_t> load_confidence(const std::string& path) {
  const RawImage raw = read_raw(path);
  if (raw.channels != 1) throw DataError("confidence image must be single-channel: " + path);
  Grid<std::int32_t> c(raw.width, raw.height, 0);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = raw.samples[i];
  return c;
}

}  // namespace consensus::io

#endif  // CONSENSUS_IO_IMAGE_IO_HPP
