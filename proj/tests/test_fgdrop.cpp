#include <catch2/catch_amalgamated.hpp>

#include "voxsam/fgdrop.hpp"
#include "voxsam/scene.hpp"

using namespace voxsam;

namespace {

// grid with ground (1, background) and four foreground classes 2..5
LabelGrid sample_grid() {
  LabelGrid g;
  g.nx = 4;
  g.ny = 4;
  g.nz = 2;
  g.table = make_class_table(6);
  g.labels.assign(g.volume(), 0);
  for (std::size_t y = 0; y < 4; ++y) g.at(0, y, 0) = 1;
  g.at(1, 0, 0) = 2;
  g.at(1, 1, 0) = 2;
  g.at(2, 0, 0) = 3;
  g.at(2, 1, 1) = 4;
  g.at(3, 3, 1) = 5;
  g.at(3, 2, 1) = 5;
  g.validate();
  return g;
}

}  // namespace

TEST_CASE("p=0 keeps labels bit-identical and prompts all present classes") {
  const LabelGrid g = sample_grid();
  RngStream rng(1);
  const auto [out, prompt] = drop_foreground(g, {0.0}, rng);
  REQUIRE(out.labels == g.labels);
  REQUIRE(prompt.classes == std::vector<std::uint32_t>{1, 2, 3, 4, 5});
}

TEST_CASE("p=1 empties every foreground voxel and prompts only background") {
  const LabelGrid g = sample_grid();
  RngStream rng(2);
  const auto [out, prompt] = drop_foreground(g, {1.0}, rng);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (g.labels[i] >= 2)
      REQUIRE(out.labels[i] == 0);
    else
      REQUIRE(out.labels[i] == g.labels[i]);
  }
  REQUIRE(prompt.classes == std::vector<std::uint32_t>{1});
}

TEST_CASE("background and empty voxels are never modified; retained classes bit-identical") {
  const LabelGrid g = sample_grid();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed);
    const auto [out, prompt] = drop_foreground(g, {0.5}, rng);
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      const std::uint32_t before = g.labels[i], after = out.labels[i];
      if (before == 0 || before == 1) {
        REQUIRE(after == before);
      } else {
        REQUIRE((after == before || after == 0));
        if (prompt.contains(before)) REQUIRE(after == before);
      }
    }
    // prompt never intersects dropped classes
    for (std::uint32_t c = 2; c <= 5; ++c) {
      bool still_there = false;
      for (std::size_t i = 0; i < out.labels.size(); ++i) still_there |= out.labels[i] == c;
      REQUIRE(prompt.contains(c) == still_there);
    }
  }
}

TEST_CASE("input grid is not mutated") {
  const LabelGrid g = sample_grid();
  const std::vector<std::uint32_t> before = g.labels;
  RngStream rng(77);
  drop_foreground(g, {1.0}, rng);
  REQUIRE(g.labels == before);
}

TEST_CASE("drop rate over many trials matches p") {
  const LabelGrid g = sample_grid();  // 4 foreground classes present
  const int trials = 10000;
  int dropped_total = 0;
  for (int t = 0; t < trials; ++t) {
    RngStream rng(1000 + static_cast<std::uint64_t>(t));
    const auto [out, prompt] = drop_foreground(g, {0.5}, rng);
    int dropped = 0;
    for (std::uint32_t c = 2; c <= 5; ++c)
      if (!prompt.contains(c)) ++dropped;
    dropped_total += dropped;
  }
  const double mean = static_cast<double>(dropped_total) / trials;
  REQUIRE(mean == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("dropout config validates p") {
  const LabelGrid g = sample_grid();
  RngStream rng(1);
  REQUIRE_THROWS_AS(drop_foreground(g, {1.5}, rng), Error);
}
