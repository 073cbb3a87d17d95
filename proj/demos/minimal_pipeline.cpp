// Smallest end-to-end walkthrough: build a scene, run one forward pass, take
// one gradient step, and print what changed.

#include <cstdio>

#include "voxsam/pipeline.hpp"

using namespace voxsam;

int main() {
  RunConfig cfg;
  cfg.grid_x = 8;
  cfg.grid_y = 8;
  cfg.grid_z = 4;
  cfg.channels = 4;
  cfg.token_dim = 4;
  cfg.class_count = 5;
  cfg.image_width = 24;
  cfg.image_height = 12;
  cfg.seed = 42;

  RngStream rng(cfg.seed);
  const SyntheticScene scene = gen_scene(cfg, rng);
  std::printf("scene: %zu of %zu voxels occupied, prompt classes:",
              scene.labels.occupied_count(), scene.labels.volume());
  for (std::uint32_t c : scene.labels.classes_present())
    if (c) std::printf(" %s", scene.labels.table.classes[c].name.c_str());
  std::printf("\n");

  PipelineParams params = PipelineParams::create(cfg);
  PipelineCtx ctx;
  const PipelineResult before =
      run_pipeline(scene, params, cfg, cfg.dropout_p, RngStream(7), &ctx);
  std::printf("before: l_total %.4f (ce %.4f, sem %.4f, geo %.4f, occ %.4f)\n",
              before.losses.l_total, before.losses.l_ce, before.losses.l_sem,
              before.losses.l_geo, before.losses.l_occ);
  std::printf("routing: %s\n", before.stats.to_json_string().c_str());

  params.store.zero_grads();
  pipeline_backward(ctx, params, cfg);
  for (std::size_t i = 0; i < params.store.size(); ++i) {
    Parameter& p = params.store[i];
    for (std::size_t j = 0; j < p.value.size(); ++j)
      p.value[j] -= cfg.learning_rate * p.grad[j];
  }

  const PipelineResult after =
      run_pipeline(scene, params, cfg, cfg.dropout_p, RngStream(7));
  std::printf("after one step: l_total %.4f\n", after.losses.l_total);
  return 0;
}
