// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lookaround {

struct GridDims {
  int n_elev = 4;
  int m_azim = 8;
  int view_h = 16;
  int view_w = 16;
  int view_c = 1;

  size_t cell_count() const { return static_cast<size_t>(n_elev) * m_azim; }
  size_t view_size() const {
    return static_cast<size_t>(view_h) * view_w * view_c;
  }
  size_t total_size() const { return cell_count() * view_size(); }

  /// Throws kInvalidArgument unless every extent is at least one.
  void validate() const;

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

struct Viewpoint {
  int elev = 0;
  int azim = 0;
  friend bool operator==(const Viewpoint&, const Viewpoint&) = default;
};

struct Action {
  int d_elev = 0;
  int d_azim = 0;
  friend bool operator==(const Action&, const Action&) = default;
};

struct MotionModel {
  int e_radius = 1;
  int a_radius = 2;

  int action_count() const { return (2 * e_radius + 1) * (2 * a_radius + 1); }
  bool is_legal(const Action& a) const;
  friend bool operator==(const MotionModel&, const MotionModel&) = default;
};

/// Complete table of views of one environment, indexed [elev][azim].
/// Pixels are stored [row][col][channel] within each view.
class ViewGrid {
 public:
  ViewGrid() = default;
  explicit ViewGrid(GridDims dims, std::optional<uint32_t> label = std::nullopt);
  ViewGrid(GridDims dims, std::vector<float> data,
           std::optional<uint32_t> label = std::nullopt);

  const GridDims& dims() const { return dims_; }
  const std::optional<uint32_t>& label() const { return label_; }
  void set_label(std::optional<uint32_t> label) { label_ = label; }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  size_t offset(int elev, int azim) const {
    return (static_cast<size_t>(elev) * dims_.m_azim + azim) * dims_.view_size();
  }
  std::span<const float> view(int elev, int azim) const {
    return {data_.data() + offset(elev, azim), dims_.view_size()};
  }
  std::span<float> mutable_view(int elev, int azim) {
    return {data_.data() + offset(elev, azim), dims_.view_size()};
  }

  friend bool operator==(const ViewGrid&, const ViewGrid&) = default;

 private:
  GridDims dims_{};
  std::vector<float> data_;
  std::optional<uint32_t> label_;
};

using View = std::span<const float>;

struct Proprioception {
  std::vector<float> elev_code;
  std::vector<float> motion_code;

  /// elev_code followed by motion_code.
  std::vector<float> flattened() const;
};

/// Row-major by (d_elev, d_azim); always contains the zero action.
std::vector<Action> legal_actions(const MotionModel& motion);

/// Position of `a` in legal_actions(motion); throws kContract if illegal.
int action_index(const MotionModel& motion, const Action& a);

/// Elevation clamps at the poles, azimuth wraps.
Viewpoint apply_action(const Viewpoint& vp, const Action& a, const GridDims& dims);

bool in_bounds(const Viewpoint& vp, const GridDims& dims);

/// The stored view at `vp`; out-of-bounds is a contract violation.
View capture(const ViewGrid& grid, const Viewpoint& vp);

Proprioception make_proprioception(const Viewpoint& vp,
                                   const std::optional<Action>& prev_action,
                                   const MotionModel& motion, const GridDims& dims);

/// out[e][a] = in[e][(a + delta) mod M].
ViewGrid roll_azimuth(const ViewGrid& grid, int delta);

/// Per-cell include flags, indexed elev * M + azim.
using CellMask = std::vector<uint8_t>;

/// Mean squared pixel difference over the included cells.
double grid_mse(const ViewGrid& a, const ViewGrid& b,
                const CellMask* mask = nullptr);

inline int wrap(int value, int modulus) {
  const int r = value % modulus;
  return r < 0 ? r + modulus : r;
}

std::string to_string(const Viewpoint& vp);
std::string to_string(const Action& a);

}  // namespace lookaround
