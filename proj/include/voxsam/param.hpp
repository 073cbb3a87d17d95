#pragma once

// Named learnable arrays. Every parameter pairs a value buffer with a
// same-shape gradient accumulator; backward rules add into grad and callers
// zero it explicitly, matching the usual training-loop contract.

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/rng.hpp"

namespace voxsam {

struct Parameter {
  std::string name;
  NdArray value;
  NdArray grad;

  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(shape) {}
};

class ParameterStore {
 public:
  Parameter& add(const std::string& name, std::vector<std::size_t> shape) {
    require(index_.find(name) == index_.end(), ErrorKind::ConfigError,
            "duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(shape)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::ConfigError, "unknown parameter: " + name);
    return *params_[it->second];
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grads() {
    for (auto& p : params_) p->grad.fill(0.0);
  }

  std::size_t coordinate_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Weights draw from normal(0, stddev); biases and the dummy feature start at
// zero, the occupancy threshold logit starts at zero (tau = 0.6).
inline void init_normal(Parameter& p, RngStream& rng, double stddev = 0.02) {
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = stddev * rng.normal();
}

}  // namespace voxsam
