#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pinntl/autodiff/tape.hpp"
#include "pinntl/network/network.hpp"
#include "pinntl/optimizer/adam.hpp"
#include "pinntl/training/problem.hpp"

namespace pinntl {

struct TrainOptions {
  int epochs = 1000;
  // Evaluate against the reference every `eval_every` epochs and at the end.
  int eval_every = 100;
  AdamConfig adam;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> components;
  std::optional<Evaluation> eval;
};

struct TrainResult {
  // Loss at the start of every epoch, plus the loss after the last step.
  std::vector<double> losses;
  std::vector<EpochLog> evaluations;
  Evaluation final_eval;
  ad::TapeStats tape;
  std::size_t trainable_params = 0;
  double seconds_per_1k_epochs = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on the problem's loss. The loss graph is recorded once and replayed
/// with updated parameter values each epoch. Row `epoch` carries the loss at
/// the parameters before that epoch's step; row `epochs` is the final state.
/// Throws DivergenceError when the loss stops being finite.
TrainResult train(Network& net, const Problem& problem, const TrainOptions& options,
                  const EpochCallback& on_epoch = {});

}  // namespace pinntl
