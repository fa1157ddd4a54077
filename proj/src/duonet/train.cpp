#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "mestereo/duonet.hpp"
#include "mestereo/error.hpp"
#include "mestereo/metrics.hpp"

namespace mestereo::duonet {
namespace {

void sgd_step(DualNet<double>& net, DualNet<double>& grads, double lr) {
  std::vector<std::span<double>> g;
  grads.for_each_parameter([&](const std::string&, std::span<double> v) { g.push_back(v); });
  std::size_t i = 0;
  net.for_each_parameter([&](const std::string&, std::span<double> p) {
    const std::span<double> gp = g[i++];
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * gp[j];
  });
}

}  // namespace

TrainResult train_toy(DualNet<double>& net, std::span<const StereogramSample<double>> dataset,
                      const TrainOptions& options) {
  if (dataset.empty()) throw InvalidInput("training dataset is empty");
  if (options.epochs < 0) throw InvalidParameter("epoch count must be >= 0");
  if (!(options.learning_rate >= 0.0) || !std::isfinite(options.learning_rate)) {
    throw InvalidParameter("learning rate must be finite and >= 0");
  }

  TrainResult result;
  std::vector<double> losses(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) losses[i] = evaluate_loss(net, dataset[i]);
  result.initial_loss = pairwise_sum(losses) / static_cast<double>(losses.size());

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.shuffle_seed);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      LossAndGradients<double> lg = loss_and_gradients(net, dataset[idx]);
      if (!std::isfinite(lg.loss)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sample " +
                               std::to_string(idx) + " (learning rate " + std::to_string(options.learning_rate) + ")");
      }
      // Losses are stored by sample so the epoch mean does not depend on visit order.
      losses[idx] = lg.loss;
      sgd_step(net, lg.gradients, options.learning_rate);
    }
    result.epoch_losses.push_back(pairwise_sum(losses) / static_cast<double>(losses.size()));
  }
  return result;
}

std::string loss_curve_csv(const TrainResult& result) {
  std::string out = "epoch,mean_l1_loss\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "0,%.17g\n", result.initial_loss);
  out += buf;
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e + 1, result.epoch_losses[e]);
    out += buf;
  }
  return out;
}

}  // namespace mestereo::duonet
