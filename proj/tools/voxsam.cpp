// Command-line front end: synthetic scene generation, single pipeline runs,
// the toy training loop, the analytical cost model, and gradient checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxsam/costmodel.hpp"
#include "voxsam/gradcheck_ops.hpp"
#include "voxsam/pipeline.hpp"

using namespace voxsam;

namespace {

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : RunConfig::load_kv(path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError, "cannot write " + path);
  out << j.dump(2) << "\n";
}

int cmd_gen_scene(const std::string& config, std::uint64_t seed, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  cfg.seed = seed;
  RngStream rng(seed);
  const SyntheticScene scene = gen_scene(cfg, rng);
  save_scene(scene, out);
  const double frac = static_cast<double>(scene.labels.occupied_count()) /
                      static_cast<double>(scene.labels.volume());
  std::printf("scene %zux%zux%zu, occupied fraction %.4f -> %s\n", scene.spec.nx,
              scene.spec.ny, scene.spec.nz, frac, out.c_str());
  return 0;
}

int cmd_run_pipeline(const std::string& config, const std::string& scene_dir,
                     const std::string& report, const std::string& pred_out,
                     std::uint64_t drop_seed) {
  const RunConfig cfg = load_run_config(config);
  const SyntheticScene scene = load_scene(scene_dir);
  require(scene.labels.table.size() == cfg.class_count, ErrorKind::ConfigError,
          "scene class count does not match the config");
  require(scene.features.dim(2) == cfg.channels, ErrorKind::ConfigError,
          "scene feature width does not match the config");
  PipelineParams params = PipelineParams::create(cfg);
  const PipelineResult r =
      run_pipeline(scene, params, cfg, cfg.dropout_p, RngStream(drop_seed));
  write_json(report, r.to_json());
  if (!pred_out.empty()) r.pred.to_ndarray().save(pred_out);
  std::printf("l_total %.6f  iou %.4f  miou %.4f  prompt [%s]\n", r.losses.l_total,
              r.metrics.iou, r.metrics.miou, r.prompt_text.c_str());
  std::printf("instrumentation %s\n", r.stats.to_json_string().c_str());
  return 0;
}

int cmd_train_toy(const std::string& config, const std::string& curve_out) {
  const RunConfig cfg = load_run_config(config);
  const TrainCurve curve = train_toy(cfg);
  write_json(curve_out, curve.to_json());
  if (curve.steps.empty()) {
    std::printf("no steps recorded\n");
    return 1;
  }
  const auto& first = curve.steps.front();
  const auto& last = curve.steps.back();
  std::printf("steps %zu%s  l_total %.4f -> %.4f  miou %.4f -> %.4f\n",
              curve.steps.size() - 1, curve.diverged ? " (diverged)" : "",
              first.eval_total, last.eval_total, first.eval_miou, last.eval_miou);
  return curve.diverged ? 1 : 0;
}

int cmd_cost_report(const std::string& config, const std::string& strategy,
                    const std::string& out) {
  const CostConfig cfg = CostConfig::load_kv(config);
  const CostReport dense = cost(cfg, RefineStrategy::Dense);
  const CostReport sparse = cost(cfg, RefineStrategy::SparsityAware);
  nlohmann::json j;
  if (strategy == "dense" || strategy == "both") j["dense"] = dense.to_json();
  if (strategy == "sparsity-aware" || strategy == "both") j["sparsity_aware"] = sparse.to_json();
  if (strategy == "both") {
    j["reduction_total_percent"] = 100.0 * (1.0 - sparse.total_flops / dense.total_flops);
    j["reduction_attention_percent"] =
        100.0 * (1.0 - sparse.attention_flops / dense.attention_flops);
  }
  const std::string text = j.dump(2);
  if (out.empty())
    std::printf("%s\n", text.c_str());
  else {
    write_json(out, j);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_grad_check(const std::string& op, std::uint64_t seeds) {
  register_builtin_diff_ops();
  std::vector<std::string> ops;
  if (op == "all")
    ops = registered_diff_ops();
  else
    ops.push_back(op);
  int failures = 0;
  for (const auto& name : ops) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed)
      worst = std::max(worst, vjp_check(name, seed));
    const bool ok = worst < 1e-4;
    std::printf("%-20s max rel err %.3e over %llu seeds  %s\n", name.c_str(), worst,
                static_cast<unsigned long long>(seeds), ok ? "ok" : "FAIL");
    failures += !ok;
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxsam: sparsity-aware voxel refinement pipeline on synthetic scenes"};
  app.require_subcommand(1);

  std::string config, scene_dir, out, report, pred_out, strategy = "both", op = "all";
  std::uint64_t seed = 1, drop_seed = 1, seeds = 5;

  auto* gen = app.add_subcommand("gen-scene", "generate a synthetic scene directory");
  gen->add_option("--seed", seed, "scene seed");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--config", config, "run config (key=value)");

  auto* run = app.add_subcommand("run-pipeline", "run the full pipeline on a scene");
  run->add_option("--config", config, "run config (key=value)");
  run->add_option("--scene", scene_dir, "scene directory")->required();
  run->add_option("--report", report, "output report JSON")->required();
  run->add_option("--pred-out", pred_out, "optional predicted label grid (VXG1)");
  run->add_option("--dropout-seed", drop_seed, "seed for the foreground dropout draw");

  auto* train = app.add_subcommand("train-toy", "plain-GD training on one scene");
  train->add_option("--config", config, "run config (key=value)");
  train->add_option("--curve-out", out, "output curve JSON")->required();

  auto* costc = app.add_subcommand("cost-report", "analytical FLOPs model");
  costc->add_option("--config", config, "cost config (key=value)")->required();
  costc->add_option("--strategy", strategy, "dense | sparsity-aware | both")
      ->check(CLI::IsMember({"dense", "sparsity-aware", "both"}));
  costc->add_option("--out", out, "optional output JSON path");

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  grad->add_option("--op", op, "operation id or 'all'");
  grad->add_option("--seeds", seeds, "number of seeds per op");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_scene(config, seed, out);
    if (run->parsed()) return cmd_run_pipeline(config, scene_dir, report, pred_out, drop_seed);
    if (train->parsed()) return cmd_train_toy(config, out);
    if (costc->parsed()) return cmd_cost_report(config, strategy, out);
    if (grad->parsed()) return cmd_grad_check(op, seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
