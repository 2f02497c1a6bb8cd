#include "pinntl/metrics/metrics.hpp"

#include <string>

#include "pinntl/errors.hpp"

namespace pinntl {

double rel_l2(const Eigen::Ref<const Eigen::VectorXd>& pred,
              const Eigen::Ref<const Eigen::VectorXd>& exact) {
  if (pred.size() != exact.size()) {
    throw ShapeError("rel_l2: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(exact.size()) + " reference values");
  }
  const double denom = exact.norm();
  if (denom == 0.0) throw UndefinedNormError("rel_l2: reference field is identically zero");
  return (exact - pred).norm() / denom;
}

double rel_h1_vonmises(const Eigen::Ref<const Eigen::VectorXd>& pred_mises,
                       const Eigen::Ref<const Eigen::VectorXd>& exact_mises) {
  return rel_l2(pred_mises, exact_mises);
}

}  // namespace pinntl
