#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinntl/autodiff/tape.hpp"

namespace pinntl {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A named tensor with a per-entry trainable mask of the same shape.
struct Parameter {
  std::string name;
  Matrix value;
  Mask trainable;

  std::size_t trainable_count() const { return static_cast<std::size_t>(trainable.count()); }
  bool any_trainable() const { return trainable.any(); }
};

struct LoraConfig {
  int rank = 4;
  double alpha = 1.0;
  // Indices of the dense layers whose weights are adapted (0 = first layer).
  std::vector<int> target_layers;
};

/// Dense tanh network. Weights are stored out x in, biases as column vectors,
/// and inputs are feature-major: one column per point.
class Network {
 public:
  static Network build(std::vector<int> layer_sizes, std::uint64_t seed);
  /// Reassembles a network from stored parts (used by checkpoint loading).
  static Network from_parts(std::vector<int> layer_sizes, std::vector<Parameter> params,
                            std::optional<LoraConfig> lora);

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  int num_layers() const noexcept { return static_cast<int>(sizes_.size()) - 1; }
  int input_dim() const noexcept { return sizes_.front(); }
  int output_dim() const noexcept { return sizes_.back(); }

  /// W0, b0, W1, b1, ..., followed by A_l, B_l for each adapted layer.
  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }
  Parameter& weight(int layer) { return params_.at(static_cast<std::size_t>(2 * layer)); }
  Parameter& bias(int layer) { return params_.at(static_cast<std::size_t>(2 * layer + 1)); }
  const Parameter& weight(int layer) const { return params_.at(static_cast<std::size_t>(2 * layer)); }
  const Parameter& bias(int layer) const { return params_.at(static_cast<std::size_t>(2 * layer + 1)); }

  /// Σ (n_i·n_{i+1} + n_{i+1}) over the base layers.
  std::size_t base_parameter_count() const;
  std::size_t trainable_count() const;

  void set_all_trainable(bool trainable);
  void freeze_except_last();

  /// Freezes the base weights, draws A, B ~ N(0, 0.02²) and makes A, B and the
  /// target-layer biases trainable.
  void attach_lora(const LoraConfig& cfg, std::uint64_t seed);
  const std::optional<LoraConfig>& lora() const noexcept { return lora_; }
  Parameter& lora_a(int slot);
  Parameter& lora_b(int slot);
  const Parameter& lora_a(int slot) const;
  const Parameter& lora_b(int slot) const;

  /// W + αAB for adapted layers, W otherwise.
  std::vector<Matrix> effective_weights() const;

  /// Records every parameter on the tape; the returned Vars align with params().
  std::vector<ad::Var> bind(ad::Tape& tape) const;
  /// Records the forward pass on the tape.
  ad::Var forward(std::span<const ad::Var> bound, ad::Var x) const;
  /// Evaluates the network on a d x N batch (same arithmetic as the taped pass).
  Matrix forward(const Matrix& x) const;

  /// Parameter gradients of a scalar root with frozen entries zeroed.
  std::vector<Matrix> gradients(const ad::Tape& tape, ad::Var root,
                                std::span<const ad::Var> bound) const;

  bool same_architecture(const Network& other) const { return sizes_ == other.sizes_; }

 private:
  Network() = default;

  std::vector<int> sizes_;
  std::vector<Parameter> params_;
  std::optional<LoraConfig> lora_;
};

/// Parameter count of a dense net with the given sizes.
std::size_t dense_parameter_count(std::span<const int> layer_sizes);

}  // namespace pinntl
