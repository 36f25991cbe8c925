#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "mfkl/errors.hpp"
#include "mfkl/image.hpp"

namespace mfkl::img {

namespace {

unsigned char to_byte(double p) {
  double v = std::clamp(p, 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::lround(v));
}

// Skips PGM whitespace and '#' comment lines between header tokens.
int next_pgm_token(std::istream& in, std::string& token) {
  token.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return -1;
  do {
    token.push_back(static_cast<char>(ch));
  } while ((ch = in.get()) != EOF && !std::isspace(ch));
  return 0;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_pgm: cannot open " + path);
  std::string tok;
  if (next_pgm_token(in, tok) != 0 || tok != "P5")
    throw DataError("read_pgm: not a binary P5 PGM: " + path);
  long dims[3];
  for (long& d : dims) {
    if (next_pgm_token(in, tok) != 0)
      throw DataError("read_pgm: truncated header: " + path);
    try {
      d = std::stol(tok);
    } catch (const std::exception&) {
      throw DataError("read_pgm: bad header token '" + tok + "' in " + path);
    }
  }
  long w = dims[0], h = dims[1], maxval = dims[2];
  if (w <= 0 || h <= 0) throw DataError("read_pgm: bad dimensions in " + path);
  if (maxval != 255)
    throw DataError("read_pgm: only 8-bit (maxval 255) supported: " + path);

  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw DataError("read_pgm: truncated pixel data in " + path);

  GrayImage im;
  im.width = static_cast<int>(w);
  im.height = static_cast<int>(h);
  im.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) im.pixels[i] = raw[i] / 255.0;
  return im;
}

void write_pgm(const GrayImage& image, const std::string& path) {
  if (!image.valid()) throw DataError("write_pgm: invalid image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_pgm: cannot open " + path + " for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(image.pixels[i]);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("write_pgm: write failed for " + path);
}

GrayImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("read_png: cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("read_png: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw NumericError("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw NumericError("read_png: png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: decode error in " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: only 8-bit grayscale PNG supported: " + path);
  }

  GrayImage im;
  im.width = static_cast<int>(w);
  im.height = static_cast<int>(h);
  im.pixels.resize(static_cast<std::size_t>(w) * h);
  std::vector<unsigned char> raw(im.pixels.size());
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = raw.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  for (std::size_t i = 0; i < raw.size(); ++i) im.pixels[i] = raw[i] / 255.0;
  return im;
}

void write_png(const GrayImage& image, const std::string& path) {
  if (!image.valid()) throw DataError("write_png: invalid image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("write_png: cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw NumericError("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw NumericError("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png: encode error for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(image.pixels[i]);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    row_ptrs[static_cast<std::size_t>(y)] =
        raw.data() + static_cast<std::size_t>(y) * image.width;
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("read_image: cannot open " + path);
  char magic[2] = {0, 0};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P')
    return read_png(path);
  throw DataError("read_image: unsupported format (need P5 PGM or PNG): " + path);
}

}  // namespace mfkl::img
