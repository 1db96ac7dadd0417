// SPDX-License-Identifier: Apache-2.0
#include "lookaround/gridworld.hpp"

#include <cstdlib>
#include <sstream>

#include "lookaround/error.hpp"

namespace lookaround {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kContract: return "contract-violation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDimsOverflow: return "dims-overflow";
    case ErrorCode::kUnknownName: return "unknown-name";
    case ErrorCode::kFormat: return "format";
  }
  return "unknown";
}

void GridDims::validate() const {
  require(n_elev >= 1 && m_azim >= 1 && view_h >= 1 && view_w >= 1 && view_c >= 1,
          ErrorCode::kInvalidArgument, "grid dimensions must all be >= 1");
}

bool MotionModel::is_legal(const Action& a) const {
  return std::abs(a.d_elev) <= e_radius && std::abs(a.d_azim) <= a_radius;
}

ViewGrid::ViewGrid(GridDims dims, std::optional<uint32_t> label)
    : dims_(dims), label_(label) {
  dims_.validate();
  data_.assign(dims_.total_size(), 0.0f);
}

ViewGrid::ViewGrid(GridDims dims, std::vector<float> data,
                   std::optional<uint32_t> label)
    : dims_(dims), data_(std::move(data)), label_(label) {
  dims_.validate();
  require(data_.size() == dims_.total_size(), ErrorCode::kShapeMismatch,
          "viewgrid payload does not match its dimensions");
}

std::vector<float> Proprioception::flattened() const {
  std::vector<float> out(elev_code);
  out.insert(out.end(), motion_code.begin(), motion_code.end());
  return out;
}

std::vector<Action> legal_actions(const MotionModel& motion) {
  std::vector<Action> out;
  out.reserve(motion.action_count());
  for (int de = -motion.e_radius; de <= motion.e_radius; ++de)
    for (int da = -motion.a_radius; da <= motion.a_radius; ++da)
      out.push_back({de, da});
  return out;
}

int action_index(const MotionModel& motion, const Action& a) {
  require(motion.is_legal(a), ErrorCode::kContract,
          "action " + to_string(a) + " is outside the motion neighborhood");
  return (a.d_elev + motion.e_radius) * (2 * motion.a_radius + 1) +
         (a.d_azim + motion.a_radius);
}

bool in_bounds(const Viewpoint& vp, const GridDims& dims) {
  return vp.elev >= 0 && vp.elev < dims.n_elev && vp.azim >= 0 &&
         vp.azim < dims.m_azim;
}

Viewpoint apply_action(const Viewpoint& vp, const Action& a, const GridDims& dims) {
  int elev = vp.elev + a.d_elev;
  if (elev < 0) elev = 0;
  if (elev > dims.n_elev - 1) elev = dims.n_elev - 1;
  return {elev, wrap(vp.azim + a.d_azim, dims.m_azim)};
}

View capture(const ViewGrid& grid, const Viewpoint& vp) {
  require(in_bounds(vp, grid.dims()), ErrorCode::kContract,
          "capture at out-of-bounds viewpoint " + to_string(vp));
  return grid.view(vp.elev, vp.azim);
}

Proprioception make_proprioception(const Viewpoint& vp,
                                   const std::optional<Action>& prev_action,
                                   const MotionModel& motion, const GridDims& dims) {
  require(vp.elev >= 0 && vp.elev < dims.n_elev, ErrorCode::kContract,
          "elevation out of range");
  Proprioception p;
  p.elev_code.assign(dims.n_elev, 0.0f);
  p.elev_code[vp.elev] = 1.0f;
  p.motion_code.assign(motion.action_count(), 0.0f);
  if (prev_action) p.motion_code[action_index(motion, *prev_action)] = 1.0f;
  return p;
}

ViewGrid roll_azimuth(const ViewGrid& grid, int delta) {
  const GridDims& d = grid.dims();
  ViewGrid out(d, grid.label());
  for (int e = 0; e < d.n_elev; ++e) {
    for (int a = 0; a < d.m_azim; ++a) {
      const auto src = grid.view(e, wrap(a + delta, d.m_azim));
      std::copy(src.begin(), src.end(), out.mutable_view(e, a).begin());
    }
  }
  return out;
}

double grid_mse(const ViewGrid& a, const ViewGrid& b, const CellMask* mask) {
  require(a.dims() == b.dims(), ErrorCode::kShapeMismatch,
          "grid_mse: dimension mismatch");
  const GridDims& d = a.dims();
  require(mask == nullptr || mask->size() == d.cell_count(),
          ErrorCode::kShapeMismatch, "grid_mse: mask size mismatch");
  const size_t vs = d.view_size();
  double sum = 0.0;
  size_t count = 0;
  for (size_t cell = 0; cell < d.cell_count(); ++cell) {
    if (mask != nullptr && !(*mask)[cell]) continue;
    const float* pa = a.data().data() + cell * vs;
    const float* pb = b.data().data() + cell * vs;
    for (size_t i = 0; i < vs; ++i) {
      const double diff = static_cast<double>(pa[i]) - pb[i];
      sum += diff * diff;
    }
    count += vs;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::string to_string(const Viewpoint& vp) {
  std::ostringstream os;
  os << "(" << vp.elev << "," << vp.azim << ")";
  return os.str();
}

std::string to_string(const Action& a) {
  std::ostringstream os;
  os << "(" << a.d_elev << "," << a.d_azim << ")";
  return os.str();
}

}  // namespace lookaround
