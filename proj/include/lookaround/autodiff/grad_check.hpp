// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/error.hpp"

namespace lookaround::ad {

struct Coordinate {
  int param = 0;
  size_t index = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Coordinate worst{};
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares `analytic` gradients against central differences of `fn` at the
/// given coordinates. `fn` must be deterministic; parameters are restored.
template <typename S>
GradCheckReport grad_check(const std::function<S(const ParamStore<S>&)>& fn,
                           ParamStore<S>& params, const Gradients<S>& analytic,
                           const std::vector<Coordinate>& coords, double eps) {
  GradCheckReport report;
  for (const auto& c : coords) {
    auto& value = params.value(c.param).data.at(c.index);
    const S saved = value;
    value = static_cast<S>(saved + eps);
    const double up = static_cast<double>(fn(params));
    value = static_cast<S>(saved - eps);
    const double down = static_cast<double>(fn(params));
    value = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.has(c.param) ? static_cast<double>(analytic.get(c.param)[c.index]) : 0.0;
    const double err = relative_error(a, numeric);
    if (err > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = err;
      report.worst = c;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.checked;
  }
  return report;
}

/// Every coordinate of every parameter.
template <typename S>
std::vector<Coordinate> all_coordinates(const ParamStore<S>& params) {
  std::vector<Coordinate> out;
  for (size_t i = 0; i < params.size(); ++i)
    for (size_t k = 0; k < params.value(static_cast<int>(i)).size(); ++k)
      out.push_back({static_cast<int>(i), k});
  return out;
}

}  // namespace lookaround::ad
