// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "doctest.h"
#include "lookaround/completer.hpp"
#include "lookaround/error.hpp"
#include "lookaround/gridworld.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lookaround_" + tag + "_" + std::to_string(splitmix64(
                                              reinterpret_cast<uintptr_t>(this))));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Runs `fn` and returns the lookaround error code it throws.
inline ErrorCode error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a lookaround::Error");
  return ErrorCode::kFormat;
}

inline ViewGrid random_grid(const GridDims& dims, uint64_t seed) {
  RngStream rng(seed);
  ViewGrid g(dims);
  for (auto& v : g.mutable_data()) v = static_cast<float>(rng.uniform());
  return g;
}

/// 2x4 grid of 4x4 views, 3x3 moves, narrow layers.
inline ModelConfig tiny_config(int T = 3) {
  ModelConfig c;
  c.dims = GridDims{2, 4, 4, 4, 1};
  c.motion = MotionModel{1, 1};
  c.T = T;
  c.view_code = 6;
  c.proprio_code = 4;
  c.fuse_code = 8;
  c.agg_code = 8;
  c.view_hidden = 5;
  c.proprio_hidden = 3;
  c.decode_hidden = 6;
  c.act_hidden = 4;
  return c;
}

}  // namespace lookaround::testing
