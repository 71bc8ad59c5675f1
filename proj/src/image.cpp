#include "deeppt/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace dpt {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

// ---- PGM ----

int pgm_next_int(std::istream& in, const std::string& path) {
  // skips whitespace and '#' comments
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) fail(path, "malformed PGM header");
  return v;
}

GrayImage load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char p, n;
  in.get(p);
  in.get(n);
  if (p != 'P' || (n != '5' && n != '2')) fail(path, "not a PGM file");
  const int w = pgm_next_int(in, path);
  const int h = pgm_next_int(in, path);
  const int maxval = pgm_next_int(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) fail(path, "unsupported PGM header");
  GrayImage img(w, h);
  if (n == '5') {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
      fail(path, "truncated PGM pixel data");
  } else {
    for (auto& px : img.pixels) {
      int v;
      if (!(in >> v)) fail(path, "truncated PGM pixel data");
      px = static_cast<uint8_t>(v);
    }
  }
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) fail(path, "write failed");
}

// ---- PNG ----

struct PngReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriteCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void png_begin_read(PngReadCtx& ctx, std::FILE* f, const std::string& path) {
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail(path, "png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG decode error");
  png_init_io(ctx.png, f);
  png_read_info(ctx.png, ctx.info);
}

GrayImage load_png_gray(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(path, "cannot open");
  PngReadCtx ctx;
  png_begin_read(ctx, f.get(), path);
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG decode error");

  const png_byte color = png_get_color_type(ctx.png, ctx.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (png_get_bit_depth(ctx.png, ctx.info) == 16) png_set_strip_16(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(ctx.png, ctx.info) < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3) fail(path, "unsupported PNG channel layout");

  std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    if (channels == 1) {
      std::memcpy(&img.at(0, y), row.data(), static_cast<size_t>(w));
    } else {
      for (int x = 0; x < w; ++x)
        img.at(x, y) = rgb_to_luma(row[x * 3], row[x * 3 + 1], row[x * 3 + 2]);
    }
  }
  png_read_end(ctx.png, nullptr);
  return img;
}

// ---- BMP (uncompressed 8-bit palette or 24/32-bit) ----

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

GrayImage load_bmp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 54 || buf[0] != 'B' || buf[1] != 'M') fail(path, "not a BMP file");
  const uint32_t data_offset = rd_u32(&buf[10]);
  const uint32_t header_size = rd_u32(&buf[14]);
  if (header_size < 40) fail(path, "unsupported BMP header");
  const int32_t w = static_cast<int32_t>(rd_u32(&buf[18]));
  const int32_t h_raw = static_cast<int32_t>(rd_u32(&buf[22]));
  const bool top_down = h_raw < 0;
  const int32_t h = top_down ? -h_raw : h_raw;
  const uint16_t bpp = rd_u16(&buf[28]);
  const uint32_t compression = rd_u32(&buf[30]);
  if (w < 1 || h < 1) fail(path, "bad BMP extents");
  if (compression != 0) fail(path, "compressed BMP not supported");
  if (bpp != 8 && bpp != 24 && bpp != 32) fail(path, "unsupported BMP bit depth");

  std::vector<uint8_t> palette_luma;
  if (bpp == 8) {
    uint32_t colors = rd_u32(&buf[46]);
    if (colors == 0) colors = 256;
    const size_t pal_off = 14 + header_size;
    if (pal_off + colors * 4 > buf.size()) fail(path, "truncated BMP palette");
    palette_luma.resize(colors);
    for (uint32_t i = 0; i < colors; ++i) {
      const uint8_t* c = &buf[pal_off + i * 4];  // b,g,r,reserved
      palette_luma[i] = rgb_to_luma(c[2], c[1], c[0]);
    }
  }

  const size_t row_bytes = (static_cast<size_t>(w) * bpp / 8 + 3) & ~size_t{3};
  if (data_offset + row_bytes * static_cast<size_t>(h) > buf.size())
    fail(path, "truncated BMP pixel data");

  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    const int src_y = top_down ? y : h - 1 - y;
    const uint8_t* row = &buf[data_offset + row_bytes * static_cast<size_t>(src_y)];
    for (int x = 0; x < w; ++x) {
      if (bpp == 8) {
        const uint8_t idx = row[x];
        img.at(x, y) = idx < palette_luma.size() ? palette_luma[idx] : idx;
      } else {
        const uint8_t* px = row + x * (bpp / 8);  // b,g,r[,a]
        img.at(x, y) = rgb_to_luma(px[2], px[1], px[0]);
      }
    }
  }
  return img;
}

}  // namespace

uint8_t rgb_to_luma(uint8_t r, uint8_t g, uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<uint8_t>(std::lround(y));
}

RgbImage RgbImage::from_gray(const GrayImage& g) {
  RgbImage img(g.width, g.height);
  for (size_t i = 0; i < g.pixels.size(); ++i) {
    img.pixels[i * 3] = g.pixels[i];
    img.pixels[i * 3 + 1] = g.pixels[i];
    img.pixels[i * 3 + 2] = g.pixels[i];
  }
  return img;
}

GrayImage load_gray_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(path, "cannot open");
  uint8_t head[8] = {};
  probe.read(reinterpret_cast<char*>(head), sizeof(head));
  probe.close();

  static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (std::memcmp(head, png_sig, 8) == 0) return load_png_gray(path);
  if (head[0] == 'P' && (head[1] == '5' || head[1] == '2')) return load_pgm(path);
  if (head[0] == 'B' && head[1] == 'M') return load_bmp(path);
  fail(path, "unsupported image format (expected PNG, PGM, or BMP)");
}

void save_pgm(const GrayImage& img, const std::string& path) { write_pgm(img, path); }

namespace {

void png_begin_write(PngWriteCtx& ctx, std::FILE* f, const std::string& path, int w, int h,
                     int bit_depth, int color_type) {
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) fail(path, "png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) fail(path, "png_create_info_struct failed");
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG encode error");
  png_init_io(ctx.png, f);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
}

}  // namespace

void save_png_gray8(const GrayImage& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");
  PngWriteCtx ctx;
  png_begin_write(ctx, f.get(), path, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY);
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG encode error");
  for (int y = 0; y < img.height; ++y)
    png_write_row(ctx.png, const_cast<png_bytep>(&img.pixels[static_cast<size_t>(y) * img.width]));
  png_write_end(ctx.png, nullptr);
}

void save_png_rgb8(const RgbImage& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");
  PngWriteCtx ctx;
  png_begin_write(ctx, f.get(), path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB);
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG encode error");
  for (int y = 0; y < img.height; ++y)
    png_write_row(ctx.png,
                  const_cast<png_bytep>(&img.pixels[static_cast<size_t>(y) * img.width * 3]));
  png_write_end(ctx.png, nullptr);
}

void save_png_rgb16(const Rgb16Image& img, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");
  PngWriteCtx ctx;
  png_begin_write(ctx, f.get(), path, img.width, img.height, 16, PNG_COLOR_TYPE_RGB);
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG encode error");
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 6);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const uint16_t v = img.at(x, y, c);
        row[(static_cast<size_t>(x) * 3 + c) * 2] = static_cast<uint8_t>(v >> 8);
        row[(static_cast<size_t>(x) * 3 + c) * 2 + 1] = static_cast<uint8_t>(v & 0xff);
      }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

Rgb16Image load_png_rgb16(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(path, "cannot open");
  PngReadCtx ctx;
  png_begin_read(ctx, f.get(), path);
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "PNG decode error");

  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  const int channels = png_get_channels(ctx.png, ctx.info);
  if (bit_depth != 16)
    throw std::invalid_argument(path + ": expected 16-bit PNG, got " +
                                std::to_string(bit_depth) + "-bit");
  if (channels != 3)
    throw std::invalid_argument(path + ": expected 3 channels, got " + std::to_string(channels));

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  Rgb16Image img(w, h);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 6);
  for (int y = 0; y < h; ++y) {
    png_read_row(ctx.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        // PNG 16-bit samples are big-endian
        const size_t o = (static_cast<size_t>(x) * 3 + c) * 2;
        img.at(x, y, c) = static_cast<uint16_t>((row[o] << 8) | row[o + 1]);
      }
  }
  png_read_end(ctx.png, nullptr);
  return img;
}

void save_bmp_gray8(const GrayImage& img, const std::string& path) {
  const size_t row_bytes = (static_cast<size_t>(img.width) + 3) & ~size_t{3};
  const uint32_t data_offset = 14 + 40 + 256 * 4;
  const uint32_t file_size =
      data_offset + static_cast<uint32_t>(row_bytes * static_cast<size_t>(img.height));
  std::vector<uint8_t> buf(file_size, 0);
  auto wr_u16 = [&buf](size_t off, uint16_t v) {
    buf[off] = static_cast<uint8_t>(v & 0xff);
    buf[off + 1] = static_cast<uint8_t>(v >> 8);
  };
  auto wr_u32 = [&buf](size_t off, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf[off + i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
  };
  buf[0] = 'B';
  buf[1] = 'M';
  wr_u32(2, file_size);
  wr_u32(10, data_offset);
  wr_u32(14, 40);
  wr_u32(18, static_cast<uint32_t>(img.width));
  wr_u32(22, static_cast<uint32_t>(img.height));
  wr_u16(26, 1);
  wr_u16(28, 8);
  wr_u32(46, 256);
  for (int i = 0; i < 256; ++i) {
    buf[54 + i * 4] = buf[54 + i * 4 + 1] = buf[54 + i * 4 + 2] = static_cast<uint8_t>(i);
  }
  for (int y = 0; y < img.height; ++y) {
    const int src_y = img.height - 1 - y;  // bottom-up
    std::memcpy(&buf[data_offset + row_bytes * static_cast<size_t>(y)],
                &img.pixels[static_cast<size_t>(src_y) * img.width],
                static_cast<size_t>(img.width));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(path, "write failed");
}

}  // namespace dpt
