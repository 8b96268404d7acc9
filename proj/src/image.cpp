#include "plastisort/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <png.h>

#include "plastisort/errors.hpp"

namespace plastisort {

bool operator==(const RasterImage& a, const RasterImage& b) {
  return a.width == b.width && a.height == b.height && a.channels == b.channels &&
         a.data == b.data;
}

namespace {

// Reads the next whitespace/comment-separated integer token of a PNM header.
int read_pnm_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = in.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    break;
  }
  if (c == EOF || !std::isdigit(c))
    throw FormatError("malformed PNM header in " + path.string());
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1 << 30) throw FormatError("absurd PNM header value in " + path.string());
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(v);
}

RasterImage load_pnm(std::ifstream& in, const std::filesystem::path& path, int channels) {
  int w = read_pnm_int(in, path);
  int h = read_pnm_int(in, path);
  int maxval = read_pnm_int(in, path);
  if (w < 1 || h < 1) throw FormatError("non-positive PNM dimensions in " + path.string());
  if (maxval > 255)
    throw FormatError("unsupported 16-bit PNM (maxval " + std::to_string(maxval) + ") in " +
                      path.string());
  if (maxval < 1) throw FormatError("invalid PNM maxval in " + path.string());
  int sep = in.get();
  if (sep == EOF || !std::isspace(sep))
    throw FormatError("missing whitespace before PNM payload in " + path.string());
  RasterImage img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (static_cast<size_t>(in.gcount()) != img.data.size())
    throw FormatError("truncated PNM payload in " + path.string());
  return img;
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

RasterImage load_png(const std::filesystem::path& path) {
  PngReader r;
  r.fp = std::fopen(path.string().c_str(), "rb");
  if (!r.fp) throw IoError("cannot open " + path.string());
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("libpng init failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("libpng init failed");
  if (setjmp(png_jmpbuf(r.png))) throw FormatError("corrupt PNG " + path.string());

  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  int depth = png_get_bit_depth(r.png, r.info);
  int color = png_get_color_type(r.png, r.info);
  int interlace = png_get_interlace_type(r.png, r.info);

  if (interlace != PNG_INTERLACE_NONE)
    throw FormatError("interlaced PNG not supported: " + path.string());
  if (depth == 16) throw FormatError("16-bit PNG not supported: " + path.string());
  if (color == PNG_COLOR_TYPE_PALETTE)
    throw FormatError("palette PNG not supported: " + path.string());
  if (color & PNG_COLOR_MASK_ALPHA)
    throw FormatError("PNG alpha channel not supported: " + path.string());
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)
    throw FormatError("unsupported PNG color type in " + path.string());

  if (depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  png_read_update_info(r.png, r.info);

  int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  RasterImage img(static_cast<int>(w), static_cast<int>(h), channels);
  size_t stride = static_cast<size_t>(w) * channels;
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + y * stride;
  png_read_image(r.png, rows.data());
  return img;
}

} // namespace

RasterImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2) throw FormatError("file too short: " + path.string());
  if (magic[0] == 'P' && magic[1] == '5') return load_pnm(in, path, 1);
  if (magic[0] == 'P' && magic[1] == '6') return load_pnm(in, path, 3);
  if (magic[0] == 'P' && (magic[1] == '1' || magic[1] == '2' || magic[1] == '3'))
    throw FormatError("ASCII PNM not supported: " + path.string());
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
    in.close();
    return load_png(path);
  }
  throw FormatError("unrecognized image format: " + path.string());
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("save_image: channels must be 1 or 3");
  if (img.width < 1 || img.height < 1)
    throw ValidationError("save_image: empty image");
  if (img.data.size() != img.pixel_count() * img.channels)
    throw ValidationError("save_image: data length mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ValidationError("to_grayscale: channels must be 1 or 3");
  RasterImage out(img.width, img.height, 1);
  const size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const uint8_t* p = &img.data[static_cast<size_t>(i) * 3];
    double y = 0.2989 * p[0] + 0.5870 * p[1] + 0.1140 * p[2];
    double r = std::floor(y + 0.5); // round half away from zero (y >= 0)
    out.data[static_cast<size_t>(i)] = static_cast<uint8_t>(r > 255.0 ? 255.0 : r);
  }
  return out;
}

} // namespace plastisort
