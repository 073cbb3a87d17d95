#pragma once

// Vector-Jacobian-product verification harness. Every differentiable
// operation registers a factory that builds a self-contained check case
// (inputs plus parameters drawn from a seed stream); vjp_check compares its
// analytic gradient against central finite differences coordinate by
// coordinate.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"
#include "voxsam/rng.hpp"

namespace voxsam {

struct GradLeaf {
  std::string name;
  NdArray* value;
  NdArray* grad;
};

class CheckCase {
 public:
  virtual ~CheckCase() = default;
  // Pure forward pass from the current leaf values.
  virtual NdArray forward() = 0;
  // Runs forward + backward with the given output cotangent, accumulating
  // into the leaf gradient buffers.
  virtual void backward(const NdArray& cotangent) = 0;
  virtual std::vector<GradLeaf> leaves() = 0;
};

// Convenience adapter for check cases expressed as two lambdas over shared
// captured state.
class LambdaCase : public CheckCase {
 public:
  LambdaCase(std::function<NdArray()> fwd, std::function<void(const NdArray&)> bwd,
             std::vector<GradLeaf> leaves)
      : fwd_(std::move(fwd)), bwd_(std::move(bwd)), leaves_(std::move(leaves)) {}

  NdArray forward() override { return fwd_(); }
  void backward(const NdArray& ct) override { bwd_(ct); }
  std::vector<GradLeaf> leaves() override { return leaves_; }

 private:
  std::function<NdArray()> fwd_;
  std::function<void(const NdArray&)> bwd_;
  std::vector<GradLeaf> leaves_;
};

using CaseFactory = std::function<std::unique_ptr<CheckCase>(RngStream&)>;

inline std::map<std::string, CaseFactory>& diff_op_registry() {
  static std::map<std::string, CaseFactory> reg;
  return reg;
}

inline void register_diff_op(const std::string& op_id, CaseFactory factory) {
  diff_op_registry()[op_id] = std::move(factory);
}

inline std::vector<std::string> registered_diff_ops() {
  std::vector<std::string> names;
  for (const auto& [k, v] : diff_op_registry()) names.push_back(k);
  return names;
}

// Max over all leaf coordinates of |analytic - central difference| /
// max(1, |analytic|), with step 1e-5.
inline double vjp_check_case(CheckCase& c, RngStream& probe) {
  const NdArray y0 = c.forward();
  require(y0.all_finite(), ErrorKind::NumericalFailure, "forward produced non-finite output");

  NdArray cot(y0.shape());
  for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = probe.normal();

  auto leaves = c.leaves();
  for (auto& leaf : leaves) leaf.grad->fill(0.0);
  c.backward(cot);

  const double h = 1e-5;
  double max_err = 0.0;
  for (auto& leaf : leaves) {
    NdArray& v = *leaf.value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const NdArray yp = c.forward();
      v[i] = saved - h;
      const NdArray ym = c.forward();
      v[i] = saved;
      const double fd = (dot(cot, yp) - dot(cot, ym)) / (2.0 * h);
      const double g = (*leaf.grad)[i];
      const double err = std::abs(g - fd) / std::max(1.0, std::abs(g));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

inline double vjp_check(const std::string& op_id, std::uint64_t seed) {
  auto it = diff_op_registry().find(op_id);
  if (it == diff_op_registry().end())
    raise(ErrorKind::NotRegistered, "no differentiable op registered as '" + op_id + "'");
  RngStream rng(seed);
  RngStream build = rng.split(1);
  RngStream probe = rng.split(2);
  auto c = it->second(build);
  return vjp_check_case(*c, probe);
}

}  // namespace voxsam
