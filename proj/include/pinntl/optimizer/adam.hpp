#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "pinntl/network/network.hpp"

namespace pinntl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over the trainable entries of a parameter list. The
/// moment vectors hold one slot per trainable entry, gathered in parameter
/// order and column-major within each parameter.
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<Parameter>& params, AdamConfig cfg = {});

  /// `grads` must align with `params` one-to-one in shape.
  void step(std::vector<Parameter>& params, const std::vector<Matrix>& grads);

  std::int64_t t() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  const Eigen::VectorXd& first_moment() const noexcept { return m_; }
  const Eigen::VectorXd& second_moment() const noexcept { return v_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::vector<std::size_t> counts_;
};

}  // namespace pinntl
