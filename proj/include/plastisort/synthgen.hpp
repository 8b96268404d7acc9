#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "plastisort/image.hpp"

namespace plastisort {

/// Two-class synthetic "black plastic on white tray" data. Class A ("ABS")
/// carries fine-grained texture, class B ("PS") coarse blotches; the
/// correlation-length gap is the learnable cue. Intensities keep pieces
/// far darker than the tray so Otsu separation is guaranteed.
struct SynthSpec {
  int images_per_class = 215;
  int piece_min = 96;  // piece diameter range, pixels
  int piece_max = 176;
  int corr_a = 2; // texture correlation length, class A (fine grain)
  int corr_b = 5; // class B (coarse blotch); must be > corr_a
  int corr_jitter = 1;  // per-piece correlation length wobble
  int texture_amp = 25; // per-piece amplitude drawn from +-25% around this
  int pixel_noise = 6;  // uncorrelated per-pixel noise on the piece
  int base_lo = 20;     // piece base intensity range (dark)
  int base_hi = 70;
  int background = 245;
  int bg_noise = 8; // background is background +- bg_noise
  int margin = 4;   // white border around single-piece images
  int trays = 50;
  int tray_width = 1024;
  int tray_height = 768;
  uint64_t seed = 0;

  void validate() const;
};

constexpr int kSynthClassA = 0; // fine texture, directory "ABS"
constexpr int kSynthClassB = 1; // coarse texture, directory "PS"

const char* synth_class_name(int cls);

// One piece on a white background, deterministic per (class, seed).
// Background pixels are >= 230, piece pixels <= 90.
RasterImage generate_piece(int cls, const SynthSpec& spec, uint64_t seed);

struct TrayPieceTruth {
  int cls = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
};

struct TrayTruth {
  std::vector<TrayPieceTruth> pieces;
};

// A tray composite with exactly `n_pieces` non-touching pieces (rejection-
// sampled placement with a minimum gap), so the component count is exact
// ground truth.
RasterImage generate_tray(const SynthSpec& spec, uint64_t seed, int n_pieces,
                          TrayTruth& truth);

// Writes <root>/pieces/ABS and <root>/pieces/PS with images_per_class files
// each, <root>/trays with spec.trays composites (piece counts cycling 1..6),
// plus manifest.csv and tray_truth.csv.
void generate_dataset(const SynthSpec& spec, const std::filesystem::path& root);

} // namespace plastisort
