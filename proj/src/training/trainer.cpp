#include "pinntl/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "pinntl/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pinntl {

namespace {

// Each epoch allocates and frees the same set of large matrices. Keeping them
// on the heap instead of fresh mmap regions avoids page-fault churn.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

const char* family_name(Family f) noexcept {
  switch (f) {
    case Family::TaylorGreen: return "taylor_green";
    case Family::Beam: return "beam";
    case Family::Plate: return "plate";
  }
  return "?";
}

TrainResult train(Network& net, const Problem& problem, const TrainOptions& options,
                  const EpochCallback& on_epoch) {
  if (options.epochs < 0) throw ContractError("epoch budget must be non-negative");
  keep_large_blocks_on_heap();
  const int cadence = options.eval_every > 0 ? options.eval_every : options.epochs + 1;

  ad::Tape tape;
  auto bound = net.bind(tape);
  LossGraph graph = problem.record_loss(net, tape, bound);
  Adam adam(net.params(), options.adam);

  TrainResult result;
  result.tape = tape.stats(graph.total);
  result.trainable_params = net.trainable_count();
  result.losses.reserve(static_cast<std::size_t>(options.epochs) + 1);

  double train_seconds = 0.0;
  for (int epoch = 0; epoch <= options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (epoch > 0) {
      for (std::size_t i = 0; i < bound.size(); ++i) tape.set_value(bound[i], net.params()[i].value);
      tape.replay();
    }
    const double loss = graph.total.value()(0, 0);
    if (!std::isfinite(loss)) {
      throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch), epoch);
    }
    result.losses.push_back(loss);
    std::vector<Matrix> grads;
    if (epoch < options.epochs) grads = net.gradients(tape, graph.total, bound);
    train_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EpochLog log;
    log.epoch = epoch;
    log.loss = loss;
    for (const auto& [name, v] : graph.components) log.components.emplace_back(name, v.value()(0, 0));
    if (epoch % cadence == 0 || epoch == options.epochs) {
      log.eval = problem.evaluate(net);
      result.evaluations.push_back(log);
    }
    if (on_epoch) on_epoch(log);
    if (epoch == options.epochs) {
      result.final_eval = *log.eval;
      break;
    }
    const auto t1 = std::chrono::steady_clock::now();
    adam.step(net.params(), grads);
    train_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  }
  if (options.epochs > 0) result.seconds_per_1k_epochs = train_seconds / options.epochs * 1000.0;
  return result;
}

}  // namespace pinntl
