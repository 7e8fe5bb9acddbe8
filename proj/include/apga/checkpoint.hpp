#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "apga/errors.hpp"
#include "apga/tensor.hpp"

// Checkpoint container: little-endian binary, magic "APGA", u32 format
// version, then per-tensor records of
//   u32 name length, name bytes, u32 rank, u64 dims[rank], u32 dtype tag,
//   raw element bytes.
// Dtype tags: 0 = f32, 1 = f64, 2 = u64 (optimizer/bookkeeping counters).
// Raw bytes are written verbatim, so round-trips are bit-exact.

namespace apga {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

enum class DType : std::uint32_t { f32 = 0, f64 = 1, u64 = 2 };

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::u64: return 8;
  }
  throw io_error("unknown dtype tag");
}

struct TensorRecord {
  std::string name;
  std::vector<std::uint64_t> dims;
  DType dtype = DType::f32;
  std::vector<std::byte> raw;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {
template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return is.gcount() == sizeof(T);
}
}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_records(const std::string& path, const std::vector<TensorRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot open checkpoint for writing: " + path);
  os.write("APGA", 4);
  detail::write_pod(os, kCheckpointVersion);
  for (const auto& r : records) {
    detail::write_pod(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    detail::write_pod(os, static_cast<std::uint32_t>(r.dims.size()));
    for (auto d : r.dims) detail::write_pod(os, d);
    detail::write_pod(os, static_cast<std::uint32_t>(r.dtype));
    if (r.raw.size() != r.element_count() * dtype_size(r.dtype))
      throw io_error("record " + r.name + " raw size does not match dims");
    os.write(reinterpret_cast<const char*>(r.raw.data()),
             static_cast<std::streamsize>(r.raw.size()));
  }
  if (!os) throw io_error("write failed for checkpoint: " + path);
}

inline std::vector<TensorRecord> load_records(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "APGA", 4) != 0)
    throw io_error("bad checkpoint magic in " + path);
  std::uint32_t version = 0;
  if (!detail::read_pod(is, version) || version != kCheckpointVersion)
    throw io_error("unsupported checkpoint version in " + path);
  std::vector<TensorRecord> out;
  while (true) {
    std::uint32_t name_len = 0;
    if (!detail::read_pod(is, name_len)) break;  // clean EOF
    TensorRecord r;
    r.name.resize(name_len);
    is.read(r.name.data(), name_len);
    std::uint32_t rank = 0;
    if (!detail::read_pod(is, rank)) throw io_error("truncated checkpoint: " + path);
    r.dims.resize(rank);
    for (auto& d : r.dims)
      if (!detail::read_pod(is, d)) throw io_error("truncated checkpoint: " + path);
    std::uint32_t dtype = 0;
    if (!detail::read_pod(is, dtype)) throw io_error("truncated checkpoint: " + path);
    if (dtype > 2) throw io_error("bad dtype tag in checkpoint: " + path);
    r.dtype = static_cast<DType>(dtype);
    r.raw.resize(r.element_count() * dtype_size(r.dtype));
    is.read(reinterpret_cast<char*>(r.raw.data()), static_cast<std::streamsize>(r.raw.size()));
    if (is.gcount() != static_cast<std::streamsize>(r.raw.size()))
      throw io_error("truncated checkpoint: " + path);
    out.push_back(std::move(r));
  }
  return out;
}

template <typename Scalar>
DType dtype_of() {
  if constexpr (std::is_same_v<Scalar, float>) return DType::f32;
  else if constexpr (std::is_same_v<Scalar, double>) return DType::f64;
  else return DType::u64;
}

template <typename Scalar>
TensorRecord record_from_tensor(const std::string& name, const Tensor<Scalar>& t) {
  TensorRecord r;
  r.name = name;
  for (Index d : t.shape()) r.dims.push_back(static_cast<std::uint64_t>(d));
  r.dtype = dtype_of<Scalar>();
  r.raw.resize(sizeof(Scalar) * static_cast<std::size_t>(t.size()));
  std::memcpy(r.raw.data(), t.data(), r.raw.size());
  return r;
}

template <typename Scalar>
Tensor<Scalar> tensor_from_record(const TensorRecord& r) {
  if (r.dtype != dtype_of<Scalar>())
    throw io_error("record " + r.name + " has unexpected dtype");
  Shape shape;
  for (auto d : r.dims) shape.push_back(static_cast<Index>(d));
  Tensor<Scalar> t(shape);
  std::memcpy(t.data(), r.raw.data(), r.raw.size());
  return t;
}

inline TensorRecord record_u64(const std::string& name, const std::vector<std::uint64_t>& v) {
  TensorRecord r;
  r.name = name;
  r.dims = {static_cast<std::uint64_t>(v.size())};
  r.dtype = DType::u64;
  r.raw.resize(8 * v.size());
  std::memcpy(r.raw.data(), v.data(), r.raw.size());
  return r;
}

inline std::vector<std::uint64_t> u64_from_record(const TensorRecord& r) {
  if (r.dtype != DType::u64) throw io_error("record " + r.name + " is not u64");
  std::vector<std::uint64_t> v(r.element_count());
  std::memcpy(v.data(), r.raw.data(), r.raw.size());
  return v;
}

inline TensorRecord record_f64(const std::string& name, double v) {
  TensorRecord r;
  r.name = name;
  r.dims = {1};
  r.dtype = DType::f64;
  r.raw.resize(8);
  std::memcpy(r.raw.data(), &v, 8);
  return r;
}

inline double f64_from_record(const TensorRecord& r) {
  if (r.dtype != DType::f64 || r.element_count() != 1)
    throw io_error("record " + r.name + " is not a f64 scalar");
  double v = 0;
  std::memcpy(&v, r.raw.data(), 8);
  return v;
}

inline const TensorRecord& find_record(const std::vector<TensorRecord>& records,
                                       const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return r;
  throw io_error("checkpoint record not found: " + name);
}

inline bool has_record(const std::vector<TensorRecord>& records, const std::string& name) {
  for (const auto& r : records)
    if (r.name == name) return true;
  return false;
}

}  // namespace apga
