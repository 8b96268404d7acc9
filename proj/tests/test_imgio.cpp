#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "plastisort/errors.hpp"
#include "plastisort/image.hpp"
#include "plastisort/rng.hpp"

using namespace plastisort;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path dir = fs::temp_directory_path() / "plastisort_imgio_test";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const unsigned char* data, size_t n) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

// goldens produced once with an external encoder
const unsigned char kGrayPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x00, 0x00, 0x00, 0x00, 0x57,
    0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00, 0x0e, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60,
    0xf8, 0xcf, 0xd0, 0xc0, 0x0e, 0x00, 0x05, 0x09, 0x01, 0x87, 0x11, 0xf6, 0xd8, 0x28, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};
const unsigned char kRgbPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x94,
    0x82, 0x83, 0xe3, 0x00, 0x00, 0x00, 0x12, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8,
    0xcf, 0xc0, 0xc0, 0xf0, 0x9f, 0x81, 0x81, 0xe1, 0x3f, 0x00, 0x0e, 0xfb, 0x02, 0xfe, 0x53,
    0xc9, 0xac, 0x11, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};
const unsigned char kGray16Png[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x10, 0x00, 0x00, 0x00, 0x00, 0x07,
    0x4d, 0x8e, 0xbb, 0x00, 0x00, 0x00, 0x12, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60,
    0x60, 0xf8, 0xff, 0x9f, 0xa1, 0xd4, 0x80, 0x81, 0x1d, 0x00, 0x0f, 0x68, 0x02, 0xab, 0x69,
    0xa2, 0x43, 0x24, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};
const unsigned char kPalettePng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x01, 0x03, 0x00, 0x00, 0x00, 0x48,
    0x78, 0x9f, 0x67, 0x00, 0x00, 0x00, 0x06, 0x50, 0x4c, 0x54, 0x45, 0x00, 0x00, 0x00, 0xff,
    0xff, 0xff, 0xa5, 0xd9, 0x9f, 0xdd, 0x00, 0x00, 0x00, 0x0c, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x70, 0x60, 0x72, 0x00, 0x00, 0x01, 0x08, 0x00, 0x83, 0x18, 0x86, 0x8b, 0xce,
    0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};

} // namespace

TEST_CASE("P5 load passes bytes through") {
  fs::path p = temp_dir() / "t.pgm";
  const unsigned char bytes[] = {'P', '5', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n',
                                 0, 255, 128, 7};
  write_bytes(p, bytes, sizeof(bytes));
  RasterImage img = load_image(p);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  CHECK(img.data == std::vector<uint8_t>{0, 255, 128, 7});
}

TEST_CASE("P6 load keeps interleaved channel order") {
  fs::path p = temp_dir() / "t.ppm";
  const unsigned char bytes[] = {'P', '6', '\n', '3', ' ', '1', '\n', '2', '5', '5', '\n',
                                 255, 0, 0, 0, 255, 0, 0, 0, 255};
  write_bytes(p, bytes, sizeof(bytes));
  RasterImage img = load_image(p);
  CHECK(img.channels == 3);
  CHECK(img.data == std::vector<uint8_t>{255, 0, 0, 0, 255, 0, 0, 0, 255});
}

TEST_CASE("16-bit PGM is a format error") {
  fs::path p = temp_dir() / "t16.pgm";
  const unsigned char bytes[] = {'P', '5', '\n', '1', ' ', '1', '\n', '6', '5', '5', '3',
                                 '5', '\n', 0, 0};
  write_bytes(p, bytes, sizeof(bytes));
  CHECK_THROWS_AS(load_image(p), FormatError);
  try {
    load_image(p);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("16-bit") != std::string::npos);
  }
}

TEST_CASE("PGM header comments and whitespace") {
  fs::path p = temp_dir() / "tc.pgm";
  std::string header = "P5\n# a comment\n 2\t1 # trailing\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.push_back(9);
  bytes.push_back(200);
  write_bytes(p, bytes.data(), bytes.size());
  RasterImage img = load_image(p);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.data == std::vector<uint8_t>{9, 200});
}

TEST_CASE("save/load round trip is the identity") {
  fs::path dir = temp_dir();
  Pcg32 rng(1234, 0);
  for (int channels : {1, 3}) {
    for (int trial = 0; trial < 20; ++trial) {
      int w = 1 + static_cast<int>(rng.bounded(40));
      int h = 1 + static_cast<int>(rng.bounded(40));
      RasterImage img(w, h, channels);
      for (auto& v : img.data) v = static_cast<uint8_t>(rng.bounded(256));
      fs::path p = dir / ("rt." + std::string(channels == 1 ? "pgm" : "ppm"));
      save_image(img, p);
      CHECK(load_image(p) == img);
    }
  }
}

TEST_CASE("save 1x1 gray then load returns the same sample") {
  fs::path p = temp_dir() / "one.pgm";
  RasterImage img(1, 1, 1);
  img.data[0] = 42;
  save_image(img, p);
  CHECK(load_image(p).data[0] == 42);
}

TEST_CASE("3-channel save starts with the P6 magic") {
  fs::path p = temp_dir() / "magic.ppm";
  save_image(RasterImage(2, 2, 3, 7), p);
  std::ifstream f(p, std::ios::binary);
  char magic[2];
  f.read(magic, 2);
  CHECK(magic[0] == 'P');
  CHECK(magic[1] == '6');
}

TEST_CASE("save to an unwritable path raises IoError") {
  CHECK_THROWS_AS(save_image(RasterImage(1, 1, 1), "/nonexistent_dir_zz/x.pgm"), IoError);
}

TEST_CASE("PNG goldens: gray, rgb, 16-bit, palette") {
  fs::path dir = temp_dir();
  write_bytes(dir / "g.png", kGrayPng, sizeof(kGrayPng));
  RasterImage g = load_image(dir / "g.png");
  CHECK(g.channels == 1);
  CHECK(g.data == std::vector<uint8_t>{0, 255, 128, 7});

  write_bytes(dir / "c.png", kRgbPng, sizeof(kRgbPng));
  RasterImage c = load_image(dir / "c.png");
  CHECK(c.channels == 3);
  CHECK(c.data == std::vector<uint8_t>{255, 0, 0, 0, 255, 0, 0, 0, 255});

  write_bytes(dir / "s.png", kGray16Png, sizeof(kGray16Png));
  CHECK_THROWS_AS(load_image(dir / "s.png"), FormatError);

  write_bytes(dir / "p.png", kPalettePng, sizeof(kPalettePng));
  CHECK_THROWS_AS(load_image(dir / "p.png"), FormatError);
}

TEST_CASE("grayscale conversion") {
  RasterImage rgb(3, 1, 3);
  // (255,255,255), (100,100,100), (255,0,0)
  rgb.data = {255, 255, 255, 100, 100, 100, 255, 0, 0};
  RasterImage g = to_grayscale(rgb);
  CHECK(g.channels == 1);
  CHECK(g.data[0] == 255);
  CHECK(g.data[1] == 100);
  CHECK(g.data[2] == 76); // round(0.2989*255)

  SUBCASE("achromatic pixels keep their value for every level") {
    RasterImage all(256, 1, 3);
    for (int v = 0; v < 256; ++v)
      for (int c = 0; c < 3; ++c) all.data[static_cast<size_t>(v) * 3 + c] = static_cast<uint8_t>(v);
    RasterImage ag = to_grayscale(all);
    for (int v = 0; v < 256; ++v) CHECK(ag.data[static_cast<size_t>(v)] == v);
  }

  SUBCASE("idempotent") {
    CHECK(to_grayscale(g) == g);
    Pcg32 rng(5, 0);
    RasterImage r(17, 9, 3);
    for (auto& v : r.data) v = static_cast<uint8_t>(rng.bounded(256));
    RasterImage g1 = to_grayscale(r);
    CHECK(to_grayscale(g1) == g1);
  }
}
