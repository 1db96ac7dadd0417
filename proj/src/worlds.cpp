// SPDX-License-Identifier: Apache-2.0
#include "lookaround/worlds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "lookaround/error.hpp"
#include "lookaround/rng.hpp"

namespace lookaround {

const char* family_name(WorldFamily family) {
  switch (family) {
    case WorldFamily::kLighthouse: return "lighthouse";
    case WorldFamily::kGradientSky: return "gradient_sky";
    case WorldFamily::kTexturedHalves: return "textured_halves";
  }
  return "?";
}

WorldFamily parse_family(const std::string& name) {
  if (name == "lighthouse") return WorldFamily::kLighthouse;
  if (name == "gradient_sky") return WorldFamily::kGradientSky;
  if (name == "textured_halves") return WorldFamily::kTexturedHalves;
  fail(ErrorCode::kInvalidArgument, "unknown world family '" + name + "'");
}

ViewGrid generate_world(const WorldSpec& spec) {
  switch (spec.family) {
    case WorldFamily::kLighthouse: return gen_lighthouse(spec);
    case WorldFamily::kGradientSky: return gen_gradient_sky(spec);
    case WorldFamily::kTexturedHalves: return gen_textured_halves(spec);
  }
  fail(ErrorCode::kInvalidArgument, "unknown world family");
}

namespace worlds {

LighthouseLayout lighthouse_layout(const WorldSpec& spec) {
  RngStream rng(spec.seed, StreamPurpose::kWorldGen);
  LighthouseLayout layout;
  layout.beacon.elev = rng.uniform_int(spec.dims.n_elev);
  layout.beacon.azim = rng.uniform_int(spec.dims.m_azim);
  layout.glyph = rng.uniform_int(spec.glyph_count);
  return layout;
}

double lighthouse_background(const WorldSpec& spec, const Viewpoint& beacon,
                             const Viewpoint& cell) {
  const int de = cell.elev - beacon.elev;
  const int raw = std::abs(cell.azim - beacon.azim);
  const int da = std::min(raw, spec.dims.m_azim - raw);
  const double d2 = static_cast<double>(de * de + da * da);
  return 0.1 + 0.7 * std::exp(-d2 / (spec.sigma * spec.sigma));
}

std::vector<std::vector<uint8_t>> glyph_bitmaps(int count, int size) {
  const int bits = size * size;
  std::vector<std::vector<uint8_t>> out;
  std::set<std::vector<uint8_t>> seen;
  uint64_t counter = 0;
  while (static_cast<int>(out.size()) < count) {
    std::vector<uint8_t> bitmap(bits, 0);
    uint64_t word = 0;
    int ones = 0;
    for (int i = 0; i < bits; ++i) {
      if (i % 64 == 0) word = splitmix64(0x6C696768745F6F6EULL + counter++);
      bitmap[i] = static_cast<uint8_t>((word >> (i % 64)) & 1u);
      ones += bitmap[i];
    }
    if (ones == 0 || !seen.insert(bitmap).second) continue;
    out.push_back(std::move(bitmap));
  }
  return out;
}

SkyParams sky_params(const WorldSpec& spec) {
  RngStream rng(spec.seed, StreamPurpose::kWorldGen);
  const GridDims& d = spec.dims;
  SkyParams p;
  p.top = rng.uniform(0.3, 0.9);
  const double lo = 0.5 * d.view_h;
  const double hi = 0.5 * d.view_h * d.n_elev;
  p.horizon = rng.uniform(lo, std::max(lo, hi));
  return p;
}

double sky_width(const GridDims& dims) { return static_cast<double>(dims.view_h); }

double sky_row_coordinate(const GridDims& dims, int elev, int row) {
  return row + 0.5 + 0.5 * elev * dims.view_h;
}

double sky_intensity(const SkyParams& p, const GridDims& dims, int elev, int row) {
  const double y = sky_row_coordinate(dims, elev, row);
  const double w = sky_width(dims);
  const double z = (y - p.horizon) / w;
  return kSkyFloor + p.top * std::exp(-0.5 * z * z);
}

StripeParams stripe_params(int cls, int class_count, int base_freq) {
  StripeParams p;
  p.angle = std::numbers::pi * cls / class_count;
  p.freq = base_freq + (cls % 2);
  return p;
}

double stripe_intensity(const StripeParams& p, const GridDims& dims, int row, int col) {
  const double u = (col * std::cos(p.angle) + row * std::sin(p.angle)) / dims.view_w;
  return 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * p.freq * u);
}

int textured_class(const WorldSpec& spec) {
  const int hi = spec.class_hi < 0 ? spec.class_count - 1 : spec.class_hi;
  require(spec.class_lo >= 0 && spec.class_lo <= hi && hi < spec.class_count,
          ErrorCode::kInvalidArgument, "textured_halves: bad class range");
  RngStream rng(spec.seed, StreamPurpose::kWorldGen);
  return spec.class_lo + rng.uniform_int(hi - spec.class_lo + 1);
}

}  // namespace worlds

ViewGrid gen_lighthouse(const WorldSpec& spec) {
  const GridDims& d = spec.dims;
  d.validate();
  require(spec.glyph_count >= 2, ErrorCode::kInvalidArgument,
          "lighthouse: need at least 2 glyphs");
  require(spec.glyph_size >= 1 && spec.glyph_size <= d.view_h &&
              spec.glyph_size <= d.view_w,
          ErrorCode::kInvalidArgument, "lighthouse: view too small for glyph");
  require(spec.sigma > 0.0, ErrorCode::kInvalidArgument, "lighthouse: sigma must be > 0");
  require(spec.glyph_count < (1 << std::min(20, spec.glyph_size * spec.glyph_size)),
          ErrorCode::kInvalidArgument, "lighthouse: glyph too small for glyph count");

  const auto layout = worlds::lighthouse_layout(spec);
  ViewGrid grid(d, static_cast<uint32_t>(layout.glyph));
  for (int e = 0; e < d.n_elev; ++e) {
    for (int a = 0; a < d.m_azim; ++a) {
      const auto bg = static_cast<float>(
          worlds::lighthouse_background(spec, layout.beacon, {e, a}));
      auto view = grid.mutable_view(e, a);
      std::fill(view.begin(), view.end(), bg);
    }
  }
  const auto glyphs = worlds::glyph_bitmaps(spec.glyph_count, spec.glyph_size);
  const auto& bitmap = glyphs[layout.glyph];
  const int top = (d.view_h - spec.glyph_size) / 2;
  const int left = (d.view_w - spec.glyph_size) / 2;
  auto view = grid.mutable_view(layout.beacon.elev, layout.beacon.azim);
  for (int r = 0; r < spec.glyph_size; ++r)
    for (int c = 0; c < spec.glyph_size; ++c)
      if (bitmap[r * spec.glyph_size + c])
        for (int ch = 0; ch < d.view_c; ++ch)
          view[((top + r) * d.view_w + (left + c)) * d.view_c + ch] = worlds::kGlyphInk;
  return grid;
}

ViewGrid gen_gradient_sky(const WorldSpec& spec) {
  const GridDims& d = spec.dims;
  d.validate();
  const auto params = worlds::sky_params(spec);
  ViewGrid grid(d);
  for (int e = 0; e < d.n_elev; ++e) {
    for (int r = 0; r < d.view_h; ++r) {
      const auto v = static_cast<float>(worlds::sky_intensity(params, d, e, r));
      for (int a = 0; a < d.m_azim; ++a) {
        auto view = grid.mutable_view(e, a);
        std::fill(view.begin() + static_cast<size_t>(r) * d.view_w * d.view_c,
                  view.begin() + static_cast<size_t>(r + 1) * d.view_w * d.view_c, v);
      }
    }
  }
  return grid;
}

ViewGrid gen_textured_halves(const WorldSpec& spec) {
  const GridDims& d = spec.dims;
  d.validate();
  require(spec.class_count >= 2, ErrorCode::kInvalidArgument,
          "textured_halves: need at least 2 classes");
  require(d.m_azim % 2 == 0, ErrorCode::kInvalidArgument,
          "textured_halves: azimuth count must be even");
  const int cls = worlds::textured_class(spec);
  const auto stripes = worlds::stripe_params(cls, spec.class_count, spec.stripe_base_freq);

  std::vector<float> stripe_view(d.view_size());
  for (int r = 0; r < d.view_h; ++r)
    for (int c = 0; c < d.view_w; ++c)
      for (int ch = 0; ch < d.view_c; ++ch)
        stripe_view[(static_cast<size_t>(r) * d.view_w + c) * d.view_c + ch] =
            static_cast<float>(worlds::stripe_intensity(stripes, d, r, c));

  RngStream noise_rng(spec.seed, StreamPurpose::kWorldGen, 1);
  std::vector<float> noise_view(d.view_size());
  for (auto& v : noise_view) v = static_cast<float>(noise_rng.uniform(0.1, 0.9));

  ViewGrid grid(d, static_cast<uint32_t>(cls));
  for (int e = 0; e < d.n_elev; ++e) {
    for (int a = 0; a < d.m_azim; ++a) {
      const auto& src = a < d.m_azim / 2 ? stripe_view : noise_view;
      std::copy(src.begin(), src.end(), grid.mutable_view(e, a).begin());
    }
  }
  return grid;
}

}  // namespace lookaround
