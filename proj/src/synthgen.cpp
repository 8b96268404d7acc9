#include "plastisort/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "plastisort/errors.hpp"
#include "plastisort/rng.hpp"

namespace plastisort {

void SynthSpec::validate() const {
  if (images_per_class < 1) throw ValidationError("synth: images_per_class must be >= 1");
  if (piece_min < 16 || piece_max < piece_min)
    throw ValidationError("synth: bad piece size range");
  if (!(corr_b > corr_a && corr_a >= 1))
    throw ValidationError("synth: need corr_b > corr_a >= 1");
  if (corr_jitter < 0 || corr_a - corr_jitter < 1 ||
      corr_a + corr_jitter >= corr_b - corr_jitter)
    throw ValidationError("synth: correlation jitter would overlap the class gap");
  if (base_hi < base_lo || base_lo < 5 || base_hi > 90)
    throw ValidationError("synth: piece base intensity must stay within [5,90]");
  if (background - bg_noise < base_hi + 50)
    throw ValidationError("synth: background must stay at least 50 above piece intensities");
  if (tray_width < piece_max + 32 || tray_height < piece_max + 32)
    throw ValidationError("synth: tray too small for the piece size range");
}

const char* synth_class_name(int cls) {
  return cls == kSynthClassA ? "ABS" : "PS";
}

namespace {

struct PieceSprite {
  int size = 0;                   // square canvas extent
  std::vector<uint8_t> mask;      // 1 = piece
  std::vector<uint8_t> value;     // textured intensity where mask = 1
  double centroid_x = 0.0, centroid_y = 0.0;
};

// Convex-ish polygon: jittered angles around the center with radii in
// [0.55, 1.0] * size/2.
PieceSprite make_sprite(int cls, const SynthSpec& spec, Pcg32& rng) {
  PieceSprite sp;
  int s = spec.piece_min +
          static_cast<int>(rng.bounded(static_cast<uint32_t>(spec.piece_max - spec.piece_min + 1)));
  sp.size = s;
  const int verts = 8 + static_cast<int>(rng.bounded(5));
  std::vector<double> px(static_cast<size_t>(verts)), py(static_cast<size_t>(verts));
  const double cx = s / 2.0, cy = s / 2.0;
  for (int i = 0; i < verts; ++i) {
    double theta = 2.0 * 3.14159265358979323846 * (i + 0.7 * rng.next_double()) / verts;
    double radius = (0.55 + 0.45 * rng.next_double()) * (s / 2.0 - 1.0);
    px[static_cast<size_t>(i)] = cx + radius * std::cos(theta);
    py[static_cast<size_t>(i)] = cy + radius * std::sin(theta);
  }

  sp.mask.assign(static_cast<size_t>(s) * s, 0);
  auto inside = [&](double x, double y) {
    bool in = false;
    for (int i = 0, j = verts - 1; i < verts; j = i++) {
      double xi = px[static_cast<size_t>(i)], yi = py[static_cast<size_t>(i)];
      double xj = px[static_cast<size_t>(j)], yj = py[static_cast<size_t>(j)];
      if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
    }
    return in;
  };
  long long n_fg = 0, sum_x = 0, sum_y = 0;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      if (inside(x + 0.5, y + 0.5)) {
        sp.mask[static_cast<size_t>(y) * s + x] = 1;
        ++n_fg;
        sum_x += x;
        sum_y += y;
      }
  sp.centroid_x = static_cast<double>(sum_x) / static_cast<double>(n_fg);
  sp.centroid_y = static_cast<double>(sum_y) / static_cast<double>(n_fg);

  // Texture: uniform noise smoothed by two separable box-blur passes of the
  // class's correlation length, renormalized to full amplitude. The length
  // and amplitude wobble per piece (and a per-pixel noise floor is added at
  // the end) so the two classes stay separable but individual pieces never
  // repeat.
  const int base_ell = cls == kSynthClassA ? spec.corr_a : spec.corr_b;
  const int ell = std::max(
      1, base_ell - spec.corr_jitter +
             static_cast<int>(rng.bounded(static_cast<uint32_t>(2 * spec.corr_jitter + 1))));
  std::vector<double> field(static_cast<size_t>(s) * s);
  for (double& v : field) v = rng.uniform(-1.0, 1.0);
  std::vector<double> tmp(field.size());
  for (int pass = 0; pass < 2; ++pass) {
    // horizontal
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int d = -ell; d <= ell; ++d) {
          int xx = x + d;
          if (xx < 0 || xx >= s) continue;
          acc += field[static_cast<size_t>(y) * s + xx];
          ++cnt;
        }
        tmp[static_cast<size_t>(y) * s + x] = acc / cnt;
      }
    // vertical
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int d = -ell; d <= ell; ++d) {
          int yy = y + d;
          if (yy < 0 || yy >= s) continue;
          acc += tmp[static_cast<size_t>(yy) * s + x];
          ++cnt;
        }
        field[static_cast<size_t>(y) * s + x] = acc / cnt;
      }
  }
  double mx = 1e-12;
  for (double v : field) mx = std::max(mx, std::abs(v));
  const int base =
      spec.base_lo + static_cast<int>(rng.bounded(static_cast<uint32_t>(spec.base_hi - spec.base_lo + 1)));
  const double amp = spec.texture_amp * rng.uniform(0.75, 1.25);
  sp.value.assign(sp.mask.size(), 0);
  for (size_t i = 0; i < sp.mask.size(); ++i) {
    if (!sp.mask[i]) continue;
    double v = base + amp * (field[i] / mx) + rng.uniform(-spec.pixel_noise, spec.pixel_noise);
    sp.value[i] = static_cast<uint8_t>(std::clamp(v, 5.0, 90.0));
  }
  return sp;
}

void fill_background(RasterImage& img, const SynthSpec& spec, Pcg32& rng) {
  for (uint8_t& p : img.data) {
    int v = spec.background - spec.bg_noise +
            static_cast<int>(rng.bounded(static_cast<uint32_t>(2 * spec.bg_noise + 1)));
    p = static_cast<uint8_t>(std::clamp(v, 0, 255));
  }
}

} // namespace

RasterImage generate_piece(int cls, const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  Pcg32 rng(mix_seed(seed, rng_stream::kSynth), static_cast<uint64_t>(cls));
  PieceSprite sp = make_sprite(cls, spec, rng);
  int canvas = sp.size + 2 * spec.margin;
  RasterImage img(canvas, canvas, 1);
  fill_background(img, spec, rng);
  for (int y = 0; y < sp.size; ++y)
    for (int x = 0; x < sp.size; ++x)
      if (sp.mask[static_cast<size_t>(y) * sp.size + x])
        img.at(x + spec.margin, y + spec.margin) =
            sp.value[static_cast<size_t>(y) * sp.size + x];
  return img;
}

RasterImage generate_tray(const SynthSpec& spec, uint64_t seed, int n_pieces,
                          TrayTruth& truth) {
  spec.validate();
  if (n_pieces < 0) throw ValidationError("generate_tray: n_pieces must be >= 0");
  Pcg32 rng(mix_seed(seed, rng_stream::kSynth), 0x54524159ull); // tray placement stream
  RasterImage img(spec.tray_width, spec.tray_height, 1);
  fill_background(img, spec, rng);
  truth.pieces.clear();

  const int gap = 8;
  const int border = 8;
  struct Placed {
    int x, y, size;
  };
  std::vector<Placed> placed;
  for (int i = 0; i < n_pieces; ++i) {
    int cls = static_cast<int>(rng.bounded(2));
    PieceSprite sp = make_sprite(cls, spec, rng);
    bool ok = false;
    for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
      int x0 = border + static_cast<int>(rng.bounded(
                            static_cast<uint32_t>(spec.tray_width - sp.size - 2 * border)));
      int y0 = border + static_cast<int>(rng.bounded(
                            static_cast<uint32_t>(spec.tray_height - sp.size - 2 * border)));
      bool clash = false;
      for (const Placed& q : placed) {
        if (x0 < q.x + q.size + gap && q.x < x0 + sp.size + gap &&
            y0 < q.y + q.size + gap && q.y < y0 + sp.size + gap) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      for (int y = 0; y < sp.size; ++y)
        for (int x = 0; x < sp.size; ++x)
          if (sp.mask[static_cast<size_t>(y) * sp.size + x])
            img.at(x0 + x, y0 + y) = sp.value[static_cast<size_t>(y) * sp.size + x];
      placed.push_back({x0, y0, sp.size});
      truth.pieces.push_back({cls, x0 + sp.centroid_x, y0 + sp.centroid_y});
      ok = true;
    }
    if (!ok)
      throw std::runtime_error("generate_tray: could not place piece " + std::to_string(i) +
                               " of " + std::to_string(n_pieces));
  }
  return img;
}

void generate_dataset(const SynthSpec& spec, const std::filesystem::path& root) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(root / "pieces" / "ABS");
  fs::create_directories(root / "pieces" / "PS");
  fs::create_directories(root / "trays");

  std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest.csv under " + root.string());
  manifest << "filename,class,seed,n_pieces\n";

  for (int cls = 0; cls < 2; ++cls) {
    std::vector<int> indices(static_cast<size_t>(spec.images_per_class));
    for (int i = 0; i < spec.images_per_class; ++i) indices[static_cast<size_t>(i)] = i;
    const std::string cname = synth_class_name(cls);
    // Per-image seeds derive from (spec seed, class, index); generation is
    // embarrassingly parallel but files are written and listed in order.
    std::vector<RasterImage> images(static_cast<size_t>(spec.images_per_class));
    std::vector<uint64_t> seeds(static_cast<size_t>(spec.images_per_class));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < spec.images_per_class; ++i) {
      uint64_t s = mix_seed(spec.seed, (static_cast<uint64_t>(cls) << 32) |
                                           static_cast<uint64_t>(i));
      seeds[static_cast<size_t>(i)] = s;
      images[static_cast<size_t>(i)] = generate_piece(cls, spec, s);
    }
    for (int i = 0; i < spec.images_per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d.pgm", cname.c_str(), i);
      save_image(images[static_cast<size_t>(i)], root / "pieces" / cname / name);
      manifest << "pieces/" << cname << "/" << name << "," << cname << ","
               << seeds[static_cast<size_t>(i)] << ",1\n";
    }
  }

  std::ofstream tray_truth(root / "tray_truth.csv", std::ios::trunc);
  if (!tray_truth) throw IoError("cannot write tray_truth.csv under " + root.string());
  tray_truth << "filename,piece_index,class,centroid_x,centroid_y\n";
  for (int i = 0; i < spec.trays; ++i) {
    int k = 1 + (i % 6);
    uint64_t s = mix_seed(spec.seed, 0x5452415900000000ull | static_cast<uint64_t>(i));
    TrayTruth truth;
    RasterImage tray = generate_tray(spec, s, k, truth);
    char name[64];
    std::snprintf(name, sizeof(name), "tray_%04d.pgm", i);
    save_image(tray, root / "trays" / name);
    manifest << "trays/" << name << ",," << s << "," << k << "\n";
    for (size_t j = 0; j < truth.pieces.size(); ++j) {
      const auto& p = truth.pieces[j];
      char buf[160];
      std::snprintf(buf, sizeof(buf), "trays/%s,%zu,%s,%.3f,%.3f\n", name, j,
                    synth_class_name(p.cls), p.centroid_x, p.centroid_y);
      tray_truth << buf;
    }
  }
}

} // namespace plastisort
