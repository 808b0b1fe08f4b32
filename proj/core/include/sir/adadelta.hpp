#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sir/layers.hpp"
#include "sir/tensor.hpp"

namespace sir {

struct AdadeltaConfig {
  double learningRate = 0.1;
  double weightDecay = 1e-4;  // L2 term added to weight (not bias) gradients
  double rho = 0.95;
  double epsilon = 1e-6;
};

// Adadelta with a learning-rate scale. Per parameter i:
//   g      = grad_i (+ weightDecay * param_i for weights)
//   Eg2    = rho * Eg2 + (1 - rho) * g^2
//   dx     = -sqrt(Edx2 + eps) / sqrt(Eg2 + eps) * g
//   Edx2   = rho * Edx2 + (1 - rho) * dx^2
//   param += learningRate * dx
// Accumulators are keyed by parameter path and mirror parameter shapes.
class Adadelta {
 public:
  explicit Adadelta(AdadeltaConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update to every parameter. Throws NumericError naming the
  // parameter path if a gradient contains NaN/Inf.
  void step(const std::vector<ParamRef>& params);

  const AdadeltaConfig& config() const { return cfg_; }

  // Accumulator access for tests and checkpoint round trips.
  const Tensor* squared_grad_avg(const std::string& path) const;
  const Tensor* squared_update_avg(const std::string& path) const;

 private:
  struct State {
    Tensor gradAvg;
    Tensor updateAvg;
  };
  AdadeltaConfig cfg_;
  std::unordered_map<std::string, State> state_;
};

}  // namespace sir
