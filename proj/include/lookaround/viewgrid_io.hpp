// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lookaround/gridworld.hpp"

namespace lookaround {

/// "VGRD1" file: magic, u32 N M H W C, u32 label (0xFFFFFFFF = none), then
/// float32 pixels in [elev][azim][row][col][channel] order, little-endian.
inline constexpr char kViewGridMagic[] = "VGRD1";
inline constexpr uint32_t kNoLabel = 0xFFFFFFFFu;

std::vector<char> encode_viewgrid(const ViewGrid& grid);
/// Throws kBadMagic, kTruncated, kDimsOverflow or kFormat.
ViewGrid decode_viewgrid(std::span<const char> bytes);

void save_viewgrid(const ViewGrid& grid, const std::filesystem::path& path);
ViewGrid load_viewgrid(const std::filesystem::path& path);

/// All *.vgrd files in `dir`, sorted by file name.
std::vector<std::filesystem::path> list_viewgrids(const std::filesystem::path& dir);
std::vector<ViewGrid> load_viewgrid_dir(const std::filesystem::path& dir);

}  // namespace lookaround
