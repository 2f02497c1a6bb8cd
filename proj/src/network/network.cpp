#include "pinntl/network/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pinntl/errors.hpp"

namespace pinntl {

namespace {

Parameter make_param(std::string name, Matrix value, bool trainable) {
  Parameter p;
  p.name = std::move(name);
  p.trainable = Mask::Constant(value.rows(), value.cols(), trainable);
  p.value = std::move(value);
  return p;
}

}  // namespace

std::size_t dense_parameter_count(std::span<const int> sizes) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    n += static_cast<std::size_t>(sizes[i]) * static_cast<std::size_t>(sizes[i + 1]) +
         static_cast<std::size_t>(sizes[i + 1]);
  }
  return n;
}

Network Network::build(std::vector<int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw ConstructionError("a network needs at least an input and an output size");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ConstructionError("layer sizes must be positive, got " + std::to_string(s));
  }
  Network net;
  net.sizes_ = std::move(layer_sizes);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const int in = net.sizes_[static_cast<std::size_t>(l)];
    const int out = net.sizes_[static_cast<std::size_t>(l + 1)];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(out, in);
    Matrix b(out, 1);
    // Row-major fill order so the draw sequence does not depend on storage order.
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = dist(rng);
    for (int i = 0; i < out; ++i) b(i, 0) = dist(rng);
    net.params_.push_back(make_param("W" + std::to_string(l), std::move(w), true));
    net.params_.push_back(make_param("b" + std::to_string(l), std::move(b), true));
  }
  return net;
}

Network Network::from_parts(std::vector<int> layer_sizes, std::vector<Parameter> params,
                            std::optional<LoraConfig> lora) {
  Network net = build(layer_sizes, 0);
  const std::size_t expected =
      2 * static_cast<std::size_t>(net.num_layers()) + (lora ? 2 * lora->target_layers.size() : 0);
  if (params.size() != expected) {
    throw ConstructionError("parameter list does not match the architecture");
  }
  for (std::size_t i = 0; i < 2 * static_cast<std::size_t>(net.num_layers()); ++i) {
    const auto& ref = net.params_[i].value;
    if (params[i].value.rows() != ref.rows() || params[i].value.cols() != ref.cols()) {
      throw ConstructionError("parameter " + params[i].name + " has the wrong shape");
    }
  }
  net.params_ = std::move(params);
  net.lora_ = std::move(lora);
  return net;
}

std::size_t Network::base_parameter_count() const { return dense_parameter_count(sizes_); }

std::size_t Network::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable_count();
  return n;
}

void Network::set_all_trainable(bool trainable) {
  for (auto& p : params_) p.trainable.setConstant(trainable);
}

void Network::freeze_except_last() {
  const int last = num_layers() - 1;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const bool keep = i == static_cast<std::size_t>(2 * last) || i == static_cast<std::size_t>(2 * last + 1);
    params_[i].trainable.setConstant(keep);
  }
}

void Network::attach_lora(const LoraConfig& cfg, std::uint64_t seed) {
  if (lora_) throw ContractError("network already carries a LoRA adapter");
  LoraConfig c = cfg;
  if (c.target_layers.empty()) {
    for (int l = 1; l + 1 < num_layers(); ++l) c.target_layers.push_back(l);
  }
  if (c.target_layers.empty()) throw RankError("network has no hidden-to-hidden layer to adapt");
  for (int l : c.target_layers) {
    if (l < 0 || l >= num_layers()) {
      throw ConstructionError("LoRA target layer " + std::to_string(l) + " out of range");
    }
    const auto& w = weight(l).value;
    const Index limit = std::min(w.rows(), w.cols());
    if (c.rank < 1 || c.rank > limit) {
      throw RankError("LoRA rank " + std::to_string(c.rank) + " outside [1, " +
                      std::to_string(limit) + "] for layer " + std::to_string(l));
    }
  }
  set_all_trainable(false);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 0.02);
  for (int l : c.target_layers) {
    const auto& w = weight(l).value;
    Matrix a(w.rows(), c.rank);
    Matrix b(c.rank, w.cols());
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) a(i, j) = dist(rng);
    for (Index i = 0; i < b.rows(); ++i)
      for (Index j = 0; j < b.cols(); ++j) b(i, j) = dist(rng);
    bias(l).trainable.setConstant(true);
    params_.push_back(make_param("A" + std::to_string(l), std::move(a), true));
    params_.push_back(make_param("B" + std::to_string(l), std::move(b), true));
  }
  lora_ = std::move(c);
}

Parameter& Network::lora_a(int slot) {
  return params_.at(2 * static_cast<std::size_t>(num_layers()) + 2 * static_cast<std::size_t>(slot));
}
Parameter& Network::lora_b(int slot) {
  return params_.at(2 * static_cast<std::size_t>(num_layers()) + 2 * static_cast<std::size_t>(slot) + 1);
}
const Parameter& Network::lora_a(int slot) const {
  return params_.at(2 * static_cast<std::size_t>(num_layers()) + 2 * static_cast<std::size_t>(slot));
}
const Parameter& Network::lora_b(int slot) const {
  return params_.at(2 * static_cast<std::size_t>(num_layers()) + 2 * static_cast<std::size_t>(slot) + 1);
}

std::vector<Matrix> Network::effective_weights() const {
  std::vector<Matrix> w;
  for (int l = 0; l < num_layers(); ++l) w.push_back(weight(l).value);
  if (lora_) {
    for (std::size_t s = 0; s < lora_->target_layers.size(); ++s) {
      const int l = lora_->target_layers[s];
      Matrix ab;
      ab.noalias() = lora_a(static_cast<int>(s)).value * lora_b(static_cast<int>(s)).value;
      w[static_cast<std::size_t>(l)] = w[static_cast<std::size_t>(l)] + lora_->alpha * ab;
    }
  }
  return w;
}

std::vector<ad::Var> Network::bind(ad::Tape& tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(tape.param(p.value, p.any_trainable()));
  return vars;
}

ad::Var Network::forward(std::span<const ad::Var> bound, ad::Var x) const {
  if (bound.size() != params_.size()) throw ContractError("bound parameters do not match network");
  if (x.rows() != input_dim()) {
    throw ShapeError("network expects " + std::to_string(input_dim()) + " input rows, got " +
                     std::to_string(x.rows()));
  }
  std::vector<ad::Var> w(static_cast<std::size_t>(num_layers()));
  for (int l = 0; l < num_layers(); ++l) w[static_cast<std::size_t>(l)] = bound[static_cast<std::size_t>(2 * l)];
  if (lora_) {
    const std::size_t base = 2 * static_cast<std::size_t>(num_layers());
    for (std::size_t s = 0; s < lora_->target_layers.size(); ++s) {
      auto& wl = w[static_cast<std::size_t>(lora_->target_layers[s])];
      wl = wl + ad::scale(ad::matmul(bound[base + 2 * s], bound[base + 2 * s + 1]), lora_->alpha);
    }
  }
  ad::Var h = x;
  for (int l = 0; l < num_layers(); ++l) {
    h = ad::affine(w[static_cast<std::size_t>(l)], h, bound[static_cast<std::size_t>(2 * l + 1)]);
    if (l + 1 < num_layers()) h = ad::tanh(h);
  }
  return h;
}

Matrix Network::forward(const Matrix& x) const {
  ad::Tape tape;
  auto bound = bind(tape);
  return forward(bound, tape.input(x, false)).value();
}

std::vector<Matrix> Network::gradients(const ad::Tape& tape, ad::Var root,
                                       std::span<const ad::Var> bound) const {
  if (bound.size() != params_.size()) throw ContractError("bound parameters do not match network");
  auto g = tape.gradient(root, bound);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& mask = params_[i].trainable;
    if (!mask.all()) g[i] = (g[i].array() * mask.cast<double>()).matrix();
  }
  return g;
}

}  // namespace pinntl
