#include "sir/adadelta.hpp"

#include <cmath>

namespace sir {

void Adadelta::step(const std::vector<ParamRef>& params) {
  for (const ParamRef& p : params) {
    Tensor& value = *p.value;
    const Tensor& grad = *p.grad;
    if (!value.same_shape(grad)) {
      throw ShapeError("adadelta: parameter/gradient shape mismatch at " + p.path);
    }
    auto [it, inserted] = state_.try_emplace(p.path);
    State& st = it->second;
    if (inserted) {
      st.gradAvg = Tensor(value.shape());
      st.updateAvg = Tensor(value.shape());
    } else if (!st.gradAvg.same_shape(value)) {
      throw ShapeError("adadelta: accumulator shape changed for " + p.path);
    }

    double* v = value.data();
    const double* g0 = grad.data();
    double* eg2 = st.gradAvg.data();
    double* edx2 = st.updateAvg.data();
    const double rho = cfg_.rho;
    const double eps = cfg_.epsilon;
    const double lr = cfg_.learningRate;
    const double wd = p.isBias ? 0.0 : cfg_.weightDecay;

    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!std::isfinite(g0[i])) {
        throw NumericError("adadelta: non-finite gradient at " + p.path + "[" +
                           std::to_string(i) + "]");
      }
      double g = g0[i] + wd * v[i];
      eg2[i] = rho * eg2[i] + (1.0 - rho) * g * g;
      double dx = -std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps) * g;
      edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
      v[i] += lr * dx;
    }
  }
}

const Tensor* Adadelta::squared_grad_avg(const std::string& path) const {
  auto it = state_.find(path);
  return it == state_.end() ? nullptr : &it->second.gradAvg;
}

const Tensor* Adadelta::squared_update_avg(const std::string& path) const {
  auto it = state_.find(path);
  return it == state_.end() ? nullptr : &it->second.updateAvg;
}

}  // namespace sir
