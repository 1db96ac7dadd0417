// SPDX-License-Identifier: Apache-2.0
#include "lookaround/viewgrid_io.hpp"

#include <algorithm>
#include <fstream>

#include "lookaround/binary_io.hpp"
#include "lookaround/error.hpp"

namespace lookaround {

namespace io {

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCode::kIo, "read failed: " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace io

namespace {
constexpr uint64_t kMaxValues = uint64_t{1} << 32;
}

std::vector<char> encode_viewgrid(const ViewGrid& grid) {
  const GridDims& d = grid.dims();
  io::ByteWriter w;
  w.bytes(std::string_view(kViewGridMagic, 5));
  w.u32(d.n_elev);
  w.u32(d.m_azim);
  w.u32(d.view_h);
  w.u32(d.view_w);
  w.u32(d.view_c);
  w.u32(grid.label().value_or(kNoLabel));
  w.f32s(grid.data());
  return w.buffer();
}

ViewGrid decode_viewgrid(std::span<const char> bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 5 || r.bytes(5) != std::string_view(kViewGridMagic, 5))
    fail(ErrorCode::kBadMagic, "not a VGRD1 file");
  uint32_t ext[5];
  for (auto& e : ext) e = r.u32();
  const uint32_t label = r.u32();
  uint64_t total = 1;
  for (uint32_t e : ext) {
    require(e >= 1, ErrorCode::kDimsOverflow, "VGRD1: zero extent");
    total *= e;
    require(total <= kMaxValues, ErrorCode::kDimsOverflow,
            "VGRD1: dimensions overflow");
  }
  require(ext[0] <= INT32_MAX && ext[1] <= INT32_MAX && ext[2] <= INT32_MAX &&
              ext[3] <= INT32_MAX && ext[4] <= INT32_MAX,
          ErrorCode::kDimsOverflow, "VGRD1: extent too large");
  GridDims d{static_cast<int>(ext[0]), static_cast<int>(ext[1]),
             static_cast<int>(ext[2]), static_cast<int>(ext[3]),
             static_cast<int>(ext[4])};
  require(r.remaining() >= total * 4, ErrorCode::kTruncated,
          "VGRD1: truncated payload");
  std::vector<float> data(total);
  r.f32s(data);
  require(r.remaining() == 0, ErrorCode::kFormat, "VGRD1: trailing bytes");
  std::optional<uint32_t> lab;
  if (label != kNoLabel) lab = label;
  return ViewGrid(d, std::move(data), lab);
}

void save_viewgrid(const ViewGrid& grid, const std::filesystem::path& path) {
  io::write_file(path, encode_viewgrid(grid));
}

ViewGrid load_viewgrid(const std::filesystem::path& path) {
  return decode_viewgrid(io::read_file(path));
}

std::vector<std::filesystem::path> list_viewgrids(const std::filesystem::path& dir) {
  std::error_code ec;
  require(std::filesystem::is_directory(dir, ec), ErrorCode::kIo,
          "not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".vgrd")
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ViewGrid> load_viewgrid_dir(const std::filesystem::path& dir) {
  std::vector<ViewGrid> out;
  for (const auto& p : list_viewgrids(dir)) out.push_back(load_viewgrid(p));
  return out;
}

}  // namespace lookaround
