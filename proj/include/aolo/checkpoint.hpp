#pragma once

// Versioned binary tensor container.
//
//   "AOLOCKPT" | u32 version | u64 meta length | meta bytes | u32 tensor count
//   per tensor: u32 name length | name | u8 dtype (0 = f32, 1 = f64)
//               | u64 rows | u64 cols | row-major values
//
// All integers and values are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "aolo/errors.hpp"
#include "aolo/tensor.hpp"

namespace aolo {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename S>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<S, float> || std::is_same_v<S, double>);
  return std::is_same_v<S, float> ? DType::f32 : DType::f64;
}

struct StoredTensor {
  std::string name;
  DType dtype = DType::f64;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<unsigned char> data;  // row-major raw values
};

struct Checkpoint {
  std::string meta;
  std::vector<StoredTensor> tensors;

  const StoredTensor& find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw CheckpointError("checkpoint has no tensor '" + name + "'");
  }

  template <typename S>
  void add(const std::string& name, const Mat<S>& m) {
    StoredTensor t{name, dtype_of<S>(), static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols()), {}};
    t.data.resize(m.size() * sizeof(S));
    auto* out = t.data.data();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c, out += sizeof(S)) std::memcpy(out, &m(r, c), sizeof(S));
    tensors.push_back(std::move(t));
  }

  template <typename S>
  Mat<S> get(const std::string& name) const {
    const StoredTensor& t = find(name);
    if (t.dtype != dtype_of<S>()) throw CheckpointError("tensor '" + name + "' has a different scalar type");
    Mat<S> m(static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols));
    const auto* in = t.data.data();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c, in += sizeof(S)) std::memcpy(&m(r, c), in, sizeof(S));
    return m;
  }

  template <typename S>
  void add_all(const std::vector<std::string>& names, const ParamList<S>& params) {
    if (names.size() != params.size()) throw CheckpointError("name and tensor counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) add(names[i], params[i]);
  }

  /// Fills params by name; every shape must match exactly.
  template <typename S>
  void restore(const std::vector<std::string>& names, ParamList<S>& params) const {
    if (names.size() != params.size()) throw CheckpointError("name and tensor counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat<S> m = get<S>(names[i]);
      if (m.rows() != params[i].rows() || m.cols() != params[i].cols())
        throw CheckpointError("tensor '" + names[i] + "' is " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", model expects " + std::to_string(params[i].rows()) +
                              "x" + std::to_string(params[i].cols()));
      params[i] = std::move(m);
    }
  }
};

constexpr char kCheckpointMagic[8] = {'A', 'O', 'L', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("checkpoint truncated");
  return value;
}

inline std::string take_bytes(std::istream& is, std::uint64_t n) {
  constexpr std::uint64_t kLimit = std::uint64_t(1) << 34;
  if (n > kLimit) throw CheckpointError("checkpoint field length is implausible");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint64_t>(os, ckpt.meta.size());
  os.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
    detail::put<std::uint64_t>(os, t.rows);
    detail::put<std::uint64_t>(os, t.cols);
    os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  }
  if (!os) throw CheckpointError("write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint");
  const auto version = detail::take<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.meta = detail::take_bytes(is, detail::take<std::uint64_t>(is));
  const auto count = detail::take<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = detail::take_bytes(is, detail::take<std::uint32_t>(is));
    const auto dtype = detail::take<std::uint8_t>(is);
    if (dtype > 1) throw CheckpointError("tensor '" + t.name + "' has unknown dtype");
    t.dtype = static_cast<DType>(dtype);
    t.rows = detail::take<std::uint64_t>(is);
    t.cols = detail::take<std::uint64_t>(is);
    const std::uint64_t width = t.dtype == DType::f32 ? 4 : 8;
    const std::string raw = detail::take_bytes(is, t.rows * t.cols * width);
    t.data.assign(raw.begin(), raw.end());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace aolo
