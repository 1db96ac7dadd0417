// SPDX-License-Identifier: Apache-2.0
#include "lookaround/autodiff/checkpoint.hpp"

#include <string>

#include "lookaround/autodiff/ops.hpp"
#include "lookaround/binary_io.hpp"

namespace lookaround::ad {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  fail(ErrorCode::kInvalidArgument, "unknown activation '" + std::string(name) + "'");
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

namespace {

bool has_velocity_suffix(const std::string& name) {
  const std::string suffix(kVelocitySuffix);
  return name.size() > suffix.size() &&
         name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void put_tensor(io::ByteWriter& w, const std::string& name, const Tensor<float>& t) {
  w.u32(static_cast<uint32_t>(name.size()));
  w.bytes(name);
  w.u32(static_cast<uint32_t>(t.shape.size()));
  for (int e : t.shape) w.u32(static_cast<uint32_t>(e));
  w.f32s(t.data);
}

}  // namespace

std::vector<char> encode_params(const ParamStore<float>& params) {
  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 5));
  w.u32(static_cast<uint32_t>(2 * params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const int id = static_cast<int>(i);
    require(!has_velocity_suffix(params.name(id)), ErrorCode::kInvalidArgument,
            "parameter names may not end in .vel");
    put_tensor(w, params.name(id), params.value(id));
    put_tensor(w, params.name(id) + kVelocitySuffix, params.velocity(id));
  }
  return w.buffer();
}

ParamStore<float> decode_params(std::span<const char> bytes,
                                const ParamStore<float>* expected) {
  io::ByteReader r(bytes);
  if (bytes.size() < 5 || r.bytes(5) != std::string_view(kCheckpointMagic, 5))
    fail(ErrorCode::kBadMagic, "not a GLMP1 file");
  const uint32_t count = r.u32();
  ParamStore<float> out;
  for (uint32_t n = 0; n < count; ++n) {
    const uint32_t name_len = r.u32();
    require(name_len > 0 && name_len <= 4096, ErrorCode::kFormat, "GLMP1: bad name length");
    std::string name(r.bytes(name_len));
    const uint32_t rank = r.u32();
    require(rank <= 8, ErrorCode::kFormat, "GLMP1: bad rank");
    std::vector<int> shape(rank);
    uint64_t total = 1;
    for (auto& e : shape) {
      const uint32_t ext = r.u32();
      require(ext <= (1u << 30), ErrorCode::kFormat, "GLMP1: extent too large");
      e = static_cast<int>(ext);
      total *= ext;
      require(total <= (uint64_t{1} << 31), ErrorCode::kFormat, "GLMP1: tensor too large");
    }
    require(r.remaining() >= total * 4, ErrorCode::kTruncated, "GLMP1: truncated tensor");
    Tensor<float> t(shape);
    r.f32s(t.data);

    if (has_velocity_suffix(name)) {
      const std::string base = name.substr(0, name.size() - std::string(kVelocitySuffix).size());
      const int id = out.find(base);
      require(id >= 0, ErrorCode::kUnknownName,
              "GLMP1: momentum buffer '" + name + "' without parameter");
      require(out.value(id).shape == t.shape, ErrorCode::kFormat,
              "GLMP1: momentum shape mismatch for '" + base + "'");
      out.velocity(id) = std::move(t);
      continue;
    }
    if (expected != nullptr) {
      const int eid = expected->find(name);
      require(eid >= 0, ErrorCode::kUnknownName, "GLMP1: unknown parameter '" + name + "'");
      require(expected->value(eid).shape == t.shape, ErrorCode::kFormat,
              "GLMP1: shape mismatch for '" + name + "'");
    }
    require(!out.contains(name), ErrorCode::kFormat, "GLMP1: duplicate '" + name + "'");
    out.add(std::move(name), std::move(t));
  }
  require(r.remaining() == 0, ErrorCode::kFormat, "GLMP1: trailing bytes");
  if (expected != nullptr) {
    for (size_t i = 0; i < expected->size(); ++i) {
      const auto& name = expected->name(static_cast<int>(i));
      require(out.contains(name), ErrorCode::kFormat, "GLMP1: missing parameter '" + name + "'");
    }
  }
  return out;
}

void save_params(const ParamStore<float>& params, const std::filesystem::path& path) {
  io::write_file(path, encode_params(params));
}

ParamStore<float> load_params(const std::filesystem::path& path,
                              const ParamStore<float>* expected) {
  return decode_params(io::read_file(path), expected);
}

}  // namespace lookaround::ad
