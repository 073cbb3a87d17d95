#pragma once

// Dense row-major n-dimensional array of 64-bit floats, the carrier for every
// feature map, volume and parameter buffer in the library.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "voxsam/error.hpp"

namespace voxsam {

class NdArray {
 public:
  NdArray() = default;

  explicit NdArray(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  static NdArray from(std::vector<std::size_t> shape, std::vector<double> data) {
    NdArray a;
    a.shape_ = std::move(shape);
    require(checked_numel(a.shape_) == data.size(), ErrorKind::InvalidShape,
            "data length does not match shape");
    a.data_ = std::move(data);
    return a;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  template <class... Ix>
  double& operator()(Ix... ix) {
    return data_[offset(ix...)];
  }
  template <class... Ix>
  double operator()(Ix... ix) const {
    return data_[offset(ix...)];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  NdArray& reshape(std::vector<std::size_t> new_shape) {
    require(checked_numel(new_shape) == data_.size(), ErrorKind::InvalidShape,
            "reshape changes element count");
    shape_ = std::move(new_shape);
    return *this;
  }

  bool same_shape(const NdArray& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Binary dump: magic "VXG1", u32 rank, u32 per axis, little-endian f64 payload.
  void save(const std::filesystem::path& path) const {
    static_assert(std::endian::native == std::endian::little,
                  "VXG1 writer assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::IoError, "cannot open for write: " + path.string());
    out.write("VXG1", 4);
    const std::uint32_t rank = static_cast<std::uint32_t>(shape_.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (std::size_t d : shape_) {
      const std::uint32_t v = static_cast<std::uint32_t>(d);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(double)));
    require(out.good(), ErrorKind::IoError, "write failed: " + path.string());
  }

  static NdArray load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::IoError, "cannot open for read: " + path.string());
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, "VXG1", 4) == 0, ErrorKind::IoError,
            "bad magic in " + path.string());
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 4);
    std::vector<std::size_t> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      shape[i] = v;
    }
    require(in.good(), ErrorKind::IoError, "truncated header in " + path.string());
    NdArray a(shape);
    in.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
    require(in.good(), ErrorKind::IoError, "truncated payload in " + path.string());
    return a;
  }

 private:
  static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      require(d > 0, ErrorKind::InvalidShape, "zero axis length");
      n *= d;
    }
    return n;
  }

  template <class... Ix>
  std::size_t offset(Ix... ix) const {
    const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
    constexpr std::size_t n = sizeof...(Ix);
    std::size_t off = 0;
    for (std::size_t k = 0; k < n; ++k) off = off * shape_[k] + idx[k];
    return off;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline double dot(const NdArray& a, const NdArray& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace voxsam
