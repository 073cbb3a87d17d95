#pragma once

// Foreground dropout: per sample, each foreground class present in the grid
// is independently reassigned to the empty class with probability p, and the
// prompt is rebuilt from the surviving categories so TGIF stays synchronized.
//
// Granularity is per class, not per instance: monocular SSC labels carry no
// instance identifiers, so the class-level reading is the implementable one.

#include <utility>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/labels.hpp"
#include "voxsam/rng.hpp"

namespace voxsam {

struct DropoutConfig {
  double p = 0.2;  // drop probability per foreground class

  void validate() const {
    require(p >= 0.0 && p <= 1.0, ErrorKind::ConfigError, "dropout p must be in [0,1]");
  }
};

// Ordered class indices feeding the text prompt; never contains class 0.
struct PromptSet {
  std::vector<std::uint32_t> classes;  // ascending
  std::size_t token_dim = 0;

  bool empty() const { return classes.empty(); }
  bool contains(std::uint32_t c) const {
    for (auto k : classes)
      if (k == c) return true;
    return false;
  }
};

// One uniform draw per foreground class present, in ascending class order.
// Returns the (possibly) modified copy of the grid and the prompt holding
// the retained foreground classes plus every background class present.
inline std::pair<LabelGrid, PromptSet> drop_foreground(const LabelGrid& labels,
                                                       const DropoutConfig& cfg,
                                                       RngStream& rng) {
  cfg.validate();
  LabelGrid out = labels;
  PromptSet prompt;

  std::vector<std::uint8_t> dropped(labels.table.size(), 0);
  for (std::uint32_t c : labels.classes_present()) {
    if (c == 0) continue;
    if (labels.table.classes[c].foreground) {
      const bool drop = rng.uniform() < cfg.p;
      if (drop)
        dropped[c] = 1;
      else
        prompt.classes.push_back(c);
    } else {
      prompt.classes.push_back(c);
    }
  }

  bool any = false;
  for (std::uint8_t d : dropped) any |= d != 0;
  if (any) {
    for (auto& l : out.labels)
      if (dropped[l]) l = 0;
  }
  return {std::move(out), std::move(prompt)};
}

}  // namespace voxsam
