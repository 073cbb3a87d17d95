#pragma once

// Per-voxel semantic labels. Class 0 is always "empty" and never foreground.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"

namespace voxsam {

struct ClassInfo {
  std::string name;
  bool foreground = false;
};

struct ClassTable {
  std::vector<ClassInfo> classes;

  std::size_t size() const { return classes.size(); }

  void validate() const {
    require(!classes.empty(), ErrorKind::ConfigError, "class table is empty");
    require(classes[0].name == "empty" && !classes[0].foreground, ErrorKind::ConfigError,
            "class 0 must be the non-foreground empty class");
  }
};

struct LabelGrid {
  std::size_t nx = 0, ny = 0, nz = 0;
  std::vector<std::uint32_t> labels;  // flat (x*ny + y)*nz + z
  ClassTable table;

  std::size_t volume() const { return nx * ny * nz; }

  std::uint32_t& at(std::size_t ix, std::size_t iy, std::size_t iz) {
    return labels[(ix * ny + iy) * nz + iz];
  }
  std::uint32_t at(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return labels[(ix * ny + iy) * nz + iz];
  }

  void validate() const {
    table.validate();
    require(labels.size() == volume(), ErrorKind::InvalidShape, "label count != volume");
    for (std::uint32_t l : labels)
      require(l < table.size(), ErrorKind::InvalidShape, "label exceeds class count");
  }

  // Ascending class indices with at least one voxel.
  std::vector<std::uint32_t> classes_present() const {
    std::set<std::uint32_t> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
  }

  std::size_t occupied_count() const {
    std::size_t n = 0;
    for (std::uint32_t l : labels) n += l != 0;
    return n;
  }

  NdArray to_ndarray() const {
    NdArray a({nx, ny, nz});
    for (std::size_t i = 0; i < labels.size(); ++i) a[i] = static_cast<double>(labels[i]);
    return a;
  }

  static LabelGrid from_ndarray(const NdArray& a, ClassTable table) {
    require(a.rank() == 3, ErrorKind::InvalidShape, "label grid must be rank 3");
    LabelGrid g;
    g.nx = a.dim(0);
    g.ny = a.dim(1);
    g.nz = a.dim(2);
    g.table = std::move(table);
    g.labels.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      g.labels[i] = static_cast<std::uint32_t>(a[i]);
    g.validate();
    return g;
  }
};

}  // namespace voxsam
