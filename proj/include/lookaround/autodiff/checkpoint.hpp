// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lookaround/autodiff/param_store.hpp"

namespace lookaround::ad {

/// "GLMP1" file: magic, u32 count, then per tensor: u32 name length, name,
/// u32 rank, u32 extents, float32 values (little-endian). Momentum buffers
/// follow as tensors named "<name>.vel".
inline constexpr char kCheckpointMagic[] = "GLMP1";
inline constexpr char kVelocitySuffix[] = ".vel";

std::vector<char> encode_params(const ParamStore<float>& params);

/// Throws kBadMagic, kTruncated, kFormat (malformed record) or kUnknownName
/// (a ".vel" entry without its parameter, or a name absent from `expected`).
ParamStore<float> decode_params(std::span<const char> bytes,
                                const ParamStore<float>* expected = nullptr);

void save_params(const ParamStore<float>& params, const std::filesystem::path& path);
ParamStore<float> load_params(const std::filesystem::path& path,
                              const ParamStore<float>* expected = nullptr);

}  // namespace lookaround::ad
