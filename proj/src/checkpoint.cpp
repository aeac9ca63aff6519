#include "wildfusion/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace wildfusion {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

namespace {
constexpr const char* kMagic = "wildfusion-checkpoint";
}

const char* dtype_name(Dtype d) { return d == Dtype::kF32 ? "f32" : "f64"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "f32") return Dtype::kF32;
  if (name == "f64") return Dtype::kF64;
  throw DataError("unknown dtype '" + name + "'");
}

std::size_t dtype_size(Dtype d) {
  return d == Dtype::kF32 ? sizeof(float) : sizeof(double);
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << kMagic << " v" << ckpt.format_version << '\n';
  out << "config_digest " << ckpt.config_digest << '\n';
  out << "tensor_count " << ckpt.tensors.size() << '\n';
  for (const auto& t : ckpt.tensors) {
    out << "tensor " << t.name << ' ' << dtype_name(t.dtype) << ' '
        << t.shape.size();
    for (Eigen::Index d : t.shape) out << ' ' << d;
    out << '\n';
  }
  out << "payload\n";
  for (const auto& t : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(t.bytes.data()),
              static_cast<std::streamsize>(t.bytes.size()));
  }
  if (!out) throw DataError("checkpoint write failed: '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");

  Checkpoint ckpt;
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("checkpoint '" + path.string() + "': empty file");
  }
  {
    std::istringstream ls(line);
    std::string magic, version;
    ls >> magic >> version;
    if (magic != kMagic || version.size() < 2 || version[0] != 'v') {
      throw DataError("checkpoint '" + path.string() + "': bad magic line");
    }
    ckpt.format_version = std::stoi(version.substr(1));
  }

  std::size_t tensor_count = 0;
  bool have_count = false;
  while (std::getline(in, line)) {
    if (line == "payload") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "config_digest") {
      ls >> ckpt.config_digest;
    } else if (key == "tensor_count") {
      ls >> tensor_count;
      have_count = true;
    } else if (key == "tensor") {
      TensorEntry e;
      std::string dtype;
      std::size_t rank = 0;
      ls >> e.name >> dtype >> rank;
      e.dtype = dtype_from_name(dtype);
      e.shape.resize(rank);
      for (std::size_t i = 0; i < rank; ++i) ls >> e.shape[i];
      if (!ls) {
        throw DataError("checkpoint '" + path.string() +
                        "': malformed tensor line: " + line);
      }
      ckpt.tensors.push_back(std::move(e));
    } else {
      throw DataError("checkpoint '" + path.string() +
                      "': unknown header line: " + line);
    }
  }
  if (!have_count || ckpt.tensors.size() != tensor_count) {
    throw DataError("checkpoint '" + path.string() +
                    "': tensor directory count mismatch");
  }
  for (auto& t : ckpt.tensors) {
    const std::size_t n =
        static_cast<std::size_t>(numel(t.shape)) * dtype_size(t.dtype);
    t.bytes.resize(n);
    in.read(reinterpret_cast<char*>(t.bytes.data()),
            static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) {
      throw DataError("checkpoint '" + path.string() +
                      "': truncated payload for tensor '" + t.name + "'");
    }
  }
  return ckpt;
}

}  // namespace wildfusion
