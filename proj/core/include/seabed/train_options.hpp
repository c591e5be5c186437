#pragma once

#include <cstdint>
#include <string_view>

namespace seabed {

enum class Optimizer { kAdam, kSgd };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

// Options shared by the gradient-trained learners (mlp, cnn3). Defaults are
// the desk-scale values; the learning-rate schedule halves every
// `drop_period` epochs.
struct TrainOptions {
  Optimizer optimizer = Optimizer::kAdam;
  int minibatch = 64;
  double learning_rate = 1e-3;
  double drop_factor = 0.5;
  int drop_period = 20;
  double gradient_clip = 1.0;   // global L2 norm
  double weight_decay = 1e-4;   // L2 factor
  int max_epochs = 60;
  int patience = 10;            // epochs without validation-loss improvement
  std::uint64_t seed = 0;

  double learning_rate_at(int epoch) const;
  // Throws ParameterError.
  void validate() const;

  friend bool operator==(const TrainOptions&, const TrainOptions&) = default;
};

}  // namespace seabed
