#pragma once

#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinntl/autodiff/tape.hpp"
#include "pinntl/network/network.hpp"

namespace pinntl {

/// Loss recorded on a tape: the scalar root plus named 1x1 components.
struct LossGraph {
  ad::Var total;
  std::vector<std::pair<std::string, ad::Var>> components;
};

/// Metrics from the problem's reference. NaN marks a metric the problem does
/// not define.
struct Evaluation {
  double rel_l2 = std::numeric_limits<double>::quiet_NaN();
  double rel_h1 = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<std::string, double>> extra;
};

enum class Family { TaylorGreen, Beam, Plate };

const char* family_name(Family f) noexcept;

class Problem {
 public:
  virtual ~Problem() = default;

  virtual Family family() const = 0;
  /// Canonical one-line description, used for checkpoints and cache keys.
  virtual std::string tag() const = 0;
  virtual std::vector<int> default_layer_sizes() const = 0;

  virtual LossGraph record_loss(const Network& net, ad::Tape& tape,
                                std::span<const ad::Var> bound) const = 0;
  virtual Evaluation evaluate(const Network& net) const = 0;
};

}  // namespace pinntl
