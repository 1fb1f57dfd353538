#pragma once

#include "hfl/parameters.hpp"

namespace hfl {

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  std::uint64_t step = 0;
  ModelParameters first_moment;
  ModelParameters second_moment;

  // Zeroes both moments congruent to `params` and resets the step counter.
  void reset(const ModelParameters& params);
  void validate() const;
};

// Bias-corrected Adam update; increments the step counter. Zero gradients
// from a fresh state leave the parameters bit-identical.
void adam_step(ModelParameters& params, const ModelParameters& grads,
               OptimizerState& state);

// Plain gradient descent: w <- w - lr * g.
void sgd_step(ModelParameters& params, const ModelParameters& grads,
              Scalar learning_rate);

// Dispatch on state.kind; sgd also advances the step counter.
void optimizer_step(ModelParameters& params, const ModelParameters& grads,
                    OptimizerState& state);

}  // namespace hfl
