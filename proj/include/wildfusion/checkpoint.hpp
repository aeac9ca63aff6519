#pragma once

#include <cstddef>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "wildfusion/tensor.hpp"

namespace wildfusion {

// Versioned checkpoint container: a text header (format version, model config
// digest, tensor directory) followed by raw little-endian payloads in
// directory order. Round trips are bit-exact.

enum class Dtype { kF32, kF64 };

const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);
std::size_t dtype_size(Dtype d);

struct TensorEntry {
  std::string name;
  Dtype dtype = Dtype::kF64;
  Shape shape;
  std::vector<std::byte> bytes;
};

struct Checkpoint {
  int format_version = 1;
  std::string config_digest;
  std::vector<TensorEntry> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename S>
constexpr Dtype dtype_of() {
  if constexpr (std::is_same_v<S, float>) {
    return Dtype::kF32;
  } else {
    static_assert(std::is_same_v<S, double>, "unsupported scalar");
    return Dtype::kF64;
  }
}

template <typename S>
TensorEntry to_entry(const std::string& name, const Tensor<S>& t) {
  TensorEntry e;
  e.name = name;
  e.dtype = dtype_of<S>();
  e.shape = t.shape();
  e.bytes.resize(static_cast<std::size_t>(t.size()) * sizeof(S));
  std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
  return e;
}

template <typename S>
void from_entry(const TensorEntry& e, Tensor<S>& t) {
  if (e.dtype != dtype_of<S>()) {
    throw DataError("checkpoint tensor '" + e.name + "': dtype mismatch");
  }
  if (e.shape != t.shape()) {
    throw DataError("checkpoint tensor '" + e.name + "': shape " +
                    shape_to_string(e.shape) + " vs expected " +
                    shape_to_string(t.shape()));
  }
  std::memcpy(t.data(), e.bytes.data(), e.bytes.size());
}

}  // namespace wildfusion
