#include <catch2/catch_amalgamated.hpp>

#include "voxsam/losses.hpp"
#include "voxsam/scene.hpp"

using namespace voxsam;

namespace {

LabelGrid grid_from(std::vector<std::uint32_t> labels, std::size_t nx, std::size_t ny,
                    std::size_t nz, std::size_t K) {
  LabelGrid g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.table = make_class_table(K);
  g.labels = std::move(labels);
  g.validate();
  return g;
}

LabelGrid random_grid(RngStream& rng, std::size_t nx, std::size_t ny, std::size_t nz,
                      std::size_t K) {
  std::vector<std::uint32_t> l(nx * ny * nz);
  for (auto& v : l) v = static_cast<std::uint32_t>(rng.uniform_index(K));
  return grid_from(std::move(l), nx, ny, nz, K);
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  SECTION("saturated correct prediction has ~zero loss") {
    LabelGrid g = grid_from({1, 2, 0, 3}, 4, 1, 1, 4);
    NdArray logits({4, 1, 1, 4});
    for (std::size_t v = 0; v < 4; ++v) logits[v * 4 + g.labels[v]] = 1000.0;
    REQUIRE(ce_loss(logits, g) == Catch::Approx(0.0).margin(1e-9));
  }
  SECTION("uniform logits give ln K") {
    LabelGrid g = grid_from({1, 2, 0, 3}, 4, 1, 1, 4);
    NdArray logits({4, 1, 1, 4});
    REQUIRE(ce_loss(logits, g) == Catch::Approx(std::log(4.0)).margin(1e-12));
  }
  SECTION("ignore mask skips voxels") {
    LabelGrid g = grid_from({1, 2}, 2, 1, 1, 4);
    NdArray logits({2, 1, 1, 4});
    logits[0 * 4 + 1] = 1000.0;  // perfect on voxel 0
    std::vector<std::uint8_t> ignore = {0, 1};
    REQUIRE(ce_loss(logits, g, &ignore) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("occupancy loss closed forms and degenerate flags") {
  SECTION("perfect 0/1 predictions zero all three terms") {
    NdArray prob({4});
    prob[0] = 1.0;
    prob[1] = 0.0;
    prob[2] = 1.0;
    prob[3] = 0.0;
    const std::vector<std::uint8_t> gt = {1, 0, 1, 0};
    const OccLossTerms t = occ_loss(prob, gt);
    REQUIRE(t.l_p == 0.0);
    REQUIRE(t.l_r == 0.0);
    REQUIRE(t.l_s == 0.0);
  }
  SECTION("prob 0.5 with half-occupied gt gives precision ln 2") {
    NdArray prob({8});
    prob.fill(0.5);
    const std::vector<std::uint8_t> gt = {1, 1, 1, 1, 0, 0, 0, 0};
    const OccLossTerms t = occ_loss(prob, gt);
    REQUIRE(t.l_p == Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("all-empty gt flags recall as degenerate and returns 0") {
    NdArray prob({4});
    prob.fill(0.3);
    const std::vector<std::uint8_t> gt = {0, 0, 0, 0};
    const OccLossTerms t = occ_loss(prob, gt);
    REQUIRE(t.l_r == 0.0);
    REQUIRE(t.recall_degenerate);
    REQUIRE_FALSE(t.specificity_degenerate);
  }
  SECTION("all-occupied gt flags specificity as degenerate") {
    NdArray prob({4});
    prob.fill(0.7);
    const std::vector<std::uint8_t> gt = {1, 1, 1, 1};
    const OccLossTerms t = occ_loss(prob, gt);
    REQUIRE(t.l_s == 0.0);
    REQUIRE(t.specificity_degenerate);
  }
}

TEST_CASE("occ_loss matches an independently coded formula on random cases") {
  RngStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 32;
    NdArray prob({n});
    std::vector<std::uint8_t> gt(n);
    bool any1 = false, any0 = false;
    for (std::size_t i = 0; i < n; ++i) {
      prob[i] = rng.uniform(0.05, 0.95);
      gt[i] = rng.uniform() < 0.5;
      any1 |= gt[i];
      any0 |= !gt[i];
    }
    if (!any1) gt[0] = 1;
    if (!any0) gt[1] = 0;

    // independent summation, written differently on purpose
    double tp = 0, pp = 0, ap = 0, tn = 0, an = 0;
    for (std::size_t i = 0; i < n; ++i) {
      pp += prob[i];
      ap += gt[i];
      an += 1 - gt[i];
      if (gt[i])
        tp += prob[i];
      else
        tn += 1.0 - prob[i];
    }
    const double expect_p = -std::log(tp / pp);
    const double expect_r = -std::log(tp / ap);
    const double expect_s = -std::log(tn / an);

    const OccLossTerms t = occ_loss(prob, gt);
    REQUIRE(t.l_p == Catch::Approx(expect_p).margin(1e-12));
    REQUIRE(t.l_r == Catch::Approx(expect_r).margin(1e-12));
    REQUIRE(t.l_s == Catch::Approx(expect_s).margin(1e-12));
  }
}

TEST_CASE("occ_loss is invariant under voxel permutations") {
  RngStream rng(23);
  const std::size_t n = 24;
  NdArray prob({n});
  std::vector<std::uint8_t> gt(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = rng.uniform(0.1, 0.9);
    gt[i] = rng.uniform() < 0.5;
  }
  const OccLossTerms a = occ_loss(prob, gt);

  // reverse both
  NdArray prob2({n});
  std::vector<std::uint8_t> gt2(n);
  for (std::size_t i = 0; i < n; ++i) {
    prob2[i] = prob[n - 1 - i];
    gt2[i] = gt[n - 1 - i];
  }
  const OccLossTerms b = occ_loss(prob2, gt2);
  REQUIRE(a.l_p == Catch::Approx(b.l_p).margin(1e-13));
  REQUIRE(a.l_r == Catch::Approx(b.l_r).margin(1e-13));
  REQUIRE(a.l_s == Catch::Approx(b.l_s).margin(1e-13));
}

TEST_CASE("affinity loss closed forms") {
  SECTION("perfect one-hot predictions zero both terms") {
    LabelGrid g = grid_from({0, 1, 2, 3, 0, 1}, 6, 1, 1, 4);
    NdArray logits({6, 1, 1, 4});
    for (std::size_t v = 0; v < 6; ++v) logits[v * 4 + g.labels[v]] = 1000.0;
    const AffinityTerms t = affinity_loss(logits, g);
    REQUIRE(t.l_sem == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(t.l_geo == Catch::Approx(0.0).margin(1e-9));
  }
  SECTION("single-class scene with uniform logits reduces to the binary case") {
    // every voxel is class 2; only that class is present
    LabelGrid g = grid_from({2, 2, 2, 2}, 4, 1, 1, 4);
    NdArray logits({4, 1, 1, 4});  // uniform -> p_k = 1/4 per class
    const AffinityTerms t = affinity_loss(logits, g);
    // binary case: p = 0.25 everywhere, y = 1 everywhere: precision = 1,
    // recall = 0.25, specificity degenerate
    REQUIRE(t.l_sem == Catch::Approx(-std::log(0.25)).margin(1e-12));
  }
}

TEST_CASE("affinity loss matches a brute-force per-class oracle") {
  RngStream rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t V = 24, K = 4;
    LabelGrid g = random_grid(rng, 24, 1, 1, K);
    NdArray logits({24, 1, 1, K});
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.normal();

    NdArray probs({V, K});
    for (std::size_t v = 0; v < V; ++v)
      softmax_forward({logits.data() + v * K, K}, {probs.data() + v * K, K});

    double sem = 0.0;
    std::size_t present = 0;
    for (std::uint32_t k = 0; k < K; ++k) {
      double tp = 0, pp = 0, ap = 0, tn = 0, an = 0;
      for (std::size_t v = 0; v < V; ++v) {
        const double p = probs(v, k);
        const bool y = g.labels[v] == k;
        pp += p;
        ap += y;
        an += !y;
        if (y)
          tp += p;
        else
          tn += 1.0 - p;
      }
      if (ap == 0) continue;
      ++present;
      double cls = -std::log(tp / pp) - std::log(tp / ap);
      if (an > 0) cls += -std::log(tn / an);
      sem += cls;
    }
    sem /= static_cast<double>(present);

    double gp = 0, gpp = 0, gap = 0, gtn = 0, gan = 0;
    for (std::size_t v = 0; v < V; ++v) {
      double pocc = 0;
      for (std::uint32_t k = 1; k < K; ++k) pocc += probs(v, k);
      const bool y = g.labels[v] != 0;
      gpp += pocc;
      gap += y;
      gan += !y;
      if (y)
        gp += pocc;
      else
        gtn += 1.0 - pocc;
    }
    double geo = 0.0;
    if (gap > 0) {
      geo = -std::log(gp / gpp) - std::log(gp / gap);
      if (gan > 0) geo += -std::log(gtn / gan);
    }

    const AffinityTerms t = affinity_loss(logits, g);
    REQUIRE(t.l_sem == Catch::Approx(sem).margin(1e-12));
    REQUIRE(t.l_geo == Catch::Approx(geo).margin(1e-12));
  }
}

TEST_CASE("iou and miou identities") {
  SECTION("identical grids score 1") {
    RngStream rng(41);
    const LabelGrid g = random_grid(rng, 4, 4, 2, 5);
    const IouResult r = iou_miou(g, g);
    REQUIRE(r.iou == 1.0);
    REQUIRE(r.miou == 1.0);
  }
  SECTION("all-empty prediction against occupied gt scores 0") {
    LabelGrid gt = grid_from({1, 2, 0, 3}, 4, 1, 1, 4);
    LabelGrid pred = grid_from({0, 0, 0, 0}, 4, 1, 1, 4);
    const IouResult r = iou_miou(pred, gt);
    REQUIRE(r.iou == 0.0);
    REQUIRE(r.miou == 0.0);
  }
  SECTION("binary iou is symmetric under pred/gt swap") {
    RngStream rng(43);
    const LabelGrid a = random_grid(rng, 4, 4, 2, 5);
    const LabelGrid b = random_grid(rng, 4, 4, 2, 5);
    REQUIRE(iou_miou(a, b).iou == iou_miou(b, a).iou);
  }
}

TEST_CASE("iou_miou matches a brute-force counting oracle") {
  RngStream rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t K = 5;
    const LabelGrid pred = random_grid(rng, 8, 8, 4, K);
    const LabelGrid gt = random_grid(rng, 8, 8, 4, K);
    const IouResult r = iou_miou(pred, gt);

    // brute-force: iterate voxels per class
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t v = 0; v < pred.labels.size(); ++v) {
      const bool p = pred.labels[v] != 0, g = gt.labels[v] != 0;
      if (p && g) ++tp;
      if (p && !g) ++fp;
      if (!p && g) ++fn;
    }
    REQUIRE(r.iou == static_cast<double>(tp) / static_cast<double>(tp + fp + fn));

    double sum = 0;
    std::size_t counted = 0;
    for (std::uint32_t k = 1; k < K; ++k) {
      std::uint64_t itp = 0, iun = 0;
      for (std::size_t v = 0; v < pred.labels.size(); ++v) {
        const bool p = pred.labels[v] == k, g = gt.labels[v] == k;
        if (p && g) ++itp;
        if (p || g) ++iun;
      }
      if (iun == 0) continue;
      sum += static_cast<double>(itp) / static_cast<double>(iun);
      ++counted;
      REQUIRE(r.per_class[k - 1] ==
              static_cast<double>(itp) / static_cast<double>(iun));
    }
    REQUIRE(r.miou == sum / static_cast<double>(counted));
  }
}

TEST_CASE("loss report identities hold exactly") {
  RngStream rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    OccLossTerms occ;
    occ.l_p = rng.uniform(0, 2);
    occ.l_r = rng.uniform(0, 2);
    occ.l_s = rng.uniform(0, 2);
    const double sem = rng.uniform(0, 2), geo = rng.uniform(0, 2), ce = rng.uniform(0, 2);
    const LossReport r = LossReport::assemble(sem, geo, ce, occ);
    REQUIRE(r.l_ssc == r.l_sem + r.l_geo + r.l_ce);
    REQUIRE(r.l_occ == r.l_p + r.l_r + r.l_s);
    REQUIRE(r.l_total == r.l_ssc + r.l_occ);
    REQUIRE(r.l_depth == 0.0);

    const LossReport rd = LossReport::assemble(sem, geo, ce, occ, 0.5, true);
    REQUIRE(rd.l_ssc == rd.l_sem + rd.l_geo + rd.l_ce + rd.l_depth);
    REQUIRE(rd.l_total == rd.l_ssc + rd.l_occ);
  }
}
