#pragma once

#include <Eigen/Dense>

namespace pinntl {

/// ‖exact − pred‖₂ / ‖exact‖₂. Throws UndefinedNormError for an all-zero
/// reference and ShapeError for mismatched lengths.
double rel_l2(const Eigen::Ref<const Eigen::VectorXd>& pred,
              const Eigen::Ref<const Eigen::VectorXd>& exact);

/// Relative L2 error of the Von Mises field. The reported "H1" stress error
/// is defined this way throughout the library; the Mises field already
/// carries the displacement gradients.
double rel_h1_vonmises(const Eigen::Ref<const Eigen::VectorXd>& pred_mises,
                       const Eigen::Ref<const Eigen::VectorXd>& exact_mises);

}  // namespace pinntl
