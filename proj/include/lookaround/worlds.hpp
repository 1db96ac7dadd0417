// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lookaround/gridworld.hpp"

namespace lookaround {

enum class WorldFamily { kLighthouse, kGradientSky, kTexturedHalves };

const char* family_name(WorldFamily family);
WorldFamily parse_family(const std::string& name);

/// Everything a generator needs; generation is a pure function of this.
struct WorldSpec {
  WorldFamily family = WorldFamily::kLighthouse;
  uint64_t seed = 0;
  GridDims dims{};

  // lighthouse
  int glyph_count = 4;
  int glyph_size = 8;
  double sigma = 2.0;

  // textured_halves: texture parameters depend on (class, class_count);
  // the world's class is drawn uniformly from [class_lo, class_hi].
  int class_count = 10;
  int class_lo = 0;
  int class_hi = -1;  // -1 means class_count - 1
  int stripe_base_freq = 2;
};

ViewGrid generate_world(const WorldSpec& spec);

/// A hidden beacon cell with brightness falling off with wrapped grid
/// distance; the beacon view also carries one of K glyphs (the label).
ViewGrid gen_lighthouse(const WorldSpec& spec);

/// Azimuth-invariant glow band around a horizon; two scalars per world.
ViewGrid gen_gradient_sky(const WorldSpec& spec);

/// Class stripes on azimuths < M/2, one seeded noise texture elsewhere.
ViewGrid gen_textured_halves(const WorldSpec& spec);

// Internals shared with tests.
namespace worlds {

struct LighthouseLayout {
  Viewpoint beacon;
  int glyph = 0;
};
LighthouseLayout lighthouse_layout(const WorldSpec& spec);

double lighthouse_background(const WorldSpec& spec, const Viewpoint& beacon,
                             const Viewpoint& cell);

/// Bit patterns of glyph k, glyph_size * glyph_size entries in {0,1};
/// distinct for distinct k.
std::vector<std::vector<uint8_t>> glyph_bitmaps(int count, int size);

constexpr float kGlyphInk = 0.0f;

struct SkyParams {
  double top = 0.0;      // peak brightness above the floor
  double horizon = 0.0;  // in stacked-row units
};
constexpr double kSkyFloor = 0.05;
SkyParams sky_params(const WorldSpec& spec);
double sky_width(const GridDims& dims);
/// Stacked vertical coordinate of pixel row `row` in a view at `elev`.
double sky_row_coordinate(const GridDims& dims, int elev, int row);
double sky_intensity(const SkyParams& p, const GridDims& dims, int elev, int row);

struct StripeParams {
  double angle = 0.0;
  double freq = 0.0;  // cycles per view width
};
StripeParams stripe_params(int cls, int class_count, int base_freq);
double stripe_intensity(const StripeParams& p, const GridDims& dims, int row, int col);
int textured_class(const WorldSpec& spec);

}  // namespace worlds

}  // namespace lookaround
