#include "pinntl/optimizer/adam.hpp"

#include <cmath>
#include <string>

#include "pinntl/errors.hpp"

namespace pinntl {

Adam::Adam(const std::vector<Parameter>& params, AdamConfig cfg) : cfg_(cfg) {
  std::size_t total = 0;
  for (const auto& p : params) {
    counts_.push_back(p.trainable_count());
    total += counts_.back();
  }
  m_ = Eigen::VectorXd::Zero(static_cast<Index>(total));
  v_ = Eigen::VectorXd::Zero(static_cast<Index>(total));
}

void Adam::step(std::vector<Parameter>& params, const std::vector<Matrix>& grads) {
  if (params.size() != counts_.size() || grads.size() != params.size()) {
    throw ContractError("gradient list does not align with the optimizer's parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (grads[i].rows() != p.value.rows() || grads[i].cols() != p.value.cols()) {
      throw ContractError("gradient for " + p.name + " has the wrong shape");
    }
    if (p.trainable_count() != counts_[i]) {
      throw ContractError("trainable mask of " + p.name + " changed since the optimizer was built");
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = cfg_.lr / c1;
  const double sqrt_c2 = std::sqrt(c2);
  Index k = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (counts_[i] == 0) continue;
    const bool dense = counts_[i] == static_cast<std::size_t>(p.value.size());
    const double* g = grads[i].data();
    double* x = p.value.data();
    const bool* mask = p.trainable.data();
    for (Index e = 0; e < p.value.size(); ++e) {
      if (!dense && !mask[e]) continue;
      const double ge = g[e];
      double& m = m_[k];
      double& v = v_[k];
      m = b1 * m + (1.0 - b1) * ge;
      v = b2 * v + (1.0 - b2) * ge * ge;
      // PyTorch form: lr/c1 · m / (sqrt(v)/sqrt(c2) + eps)
      x[e] -= step * m / (std::sqrt(v) / sqrt_c2 + cfg_.eps);
      ++k;
    }
  }
}

}  // namespace pinntl
