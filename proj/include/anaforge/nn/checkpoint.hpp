// Copyright 2026 The Anaforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Versioned binary checkpoint shared by all models.
//
// Layout (little-endian):
//   char[8]  magic "AFCKPT\0\1"
//   u32      format version
//   u64+str  model kind
//   u64+str  metadata (JSON text: config and vocabularies)
//   u64      tensor count
//   per tensor: u64+str name, u64 rows, u64 cols, f64[rows*cols] values

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "anaforge/nn/tensor.hpp"

namespace anaforge::nn {

inline constexpr std::array<char, 8> kCheckpointMagic = {'A', 'F', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u64(std::ostream &os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 8);
}

inline void put_u32(std::ostream &os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 4);
}

inline void put_str(std::ostream &os, const std::string &s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_f64(std::ostream &os, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}

inline uint64_t get_u64(std::istream &is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char *>(b), 8)) throw CheckpointError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline uint32_t get_u32(std::istream &is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char *>(b), 4)) throw CheckpointError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::string get_str(std::istream &is) {
  uint64_t n = get_u64(is);
  if (n > (1ULL << 32)) throw CheckpointError("checkpoint string too long");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("checkpoint truncated");
  return s;
}

inline double get_f64(std::istream &is) {
  uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline void save_checkpoint(const std::string &path, const std::string &kind,
                            const std::string &metadata, const ParameterSet &params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path);
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(os, kCheckpointVersion);
  detail::put_str(os, kind);
  detail::put_str(os, metadata);
  detail::put_u64(os, params.tensors().size());
  for (const auto &t : params.tensors()) {
    detail::put_str(os, t.name);
    detail::put_u64(os, t.rows);
    detail::put_u64(os, t.cols);
    for (double v : t.value) detail::put_f64(os, v);
  }
  if (!os) throw CheckpointError("write failed for " + path);
}

struct CheckpointHeader {
  std::string kind;
  std::string metadata;
};

// Reads kind and metadata only, so a model can be constructed before its
// tensors are filled by load_checkpoint_tensors.
inline CheckpointHeader read_checkpoint_header(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw CheckpointError("not a checkpoint: " + path);
  uint32_t version = detail::get_u32(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  CheckpointHeader h;
  h.kind = detail::get_str(is);
  h.metadata = detail::get_str(is);
  return h;
}

// Fills `params` from the file. Every tensor must match by name and shape.
inline void load_checkpoint_tensors(const std::string &path, ParameterSet &params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  detail::get_u32(is);
  detail::get_str(is);
  detail::get_str(is);
  uint64_t n = detail::get_u64(is);
  if (n != params.tensors().size())
    throw CheckpointError("checkpoint has " + std::to_string(n) + " tensors, model expects " +
                          std::to_string(params.tensors().size()));
  for (uint64_t k = 0; k < n; ++k) {
    std::string name = detail::get_str(is);
    uint64_t rows = detail::get_u64(is);
    uint64_t cols = detail::get_u64(is);
    if (!params.contains(name)) throw CheckpointError("unexpected tensor " + name);
    Tensor &t = params.get(name);
    if (t.rows != rows || t.cols != cols)
      throw CheckpointError("shape mismatch for " + name);
    for (double &v : t.value) v = detail::get_f64(is);
  }
}

}  // namespace anaforge::nn
