#include "hfl/optimizer.hpp"

#include <cmath>

namespace hfl {

void OptimizerState::reset(const ModelParameters& params) {
  first_moment = zeros_like(params);
  second_moment = zeros_like(params);
  step = 0;
}

void OptimizerState::validate() const {
  if (!(learning_rate > 0.0))
    throw ValidationError("learning rate must be > 0, got " +
                          std::to_string(learning_rate));
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ValidationError("Adam betas must lie in [0,1)");
  if (!(epsilon > 0.0)) throw ValidationError("Adam epsilon must be > 0");
}

namespace {

void adam_update(Vector& w, const Vector& g, Vector& m, Vector& v,
                 const OptimizerState& s) {
  const Scalar bc1 = 1.0 - std::pow(s.beta1, static_cast<Scalar>(s.step));
  const Scalar bc2 = 1.0 - std::pow(s.beta2, static_cast<Scalar>(s.step));
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v.array() + (1.0 - s.beta2) * g.array().square();
  w.array() -= s.learning_rate * (m.array() / bc1) /
               ((v.array() / bc2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(ModelParameters& params, const ModelParameters& grads,
               OptimizerState& state) {
  state.validate();
  require_congruent(params, grads, "adam_step gradients");
  require_congruent(params, state.first_moment, "adam_step first moment");
  require_congruent(params, state.second_moment, "adam_step second moment");
  state.step += 1;
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& p = params.entries[i];
    const auto& g = grads.entries[i];
    auto& m = state.first_moment.entries[i];
    auto& v = state.second_moment.entries[i];
    adam_update(p.weights.values, g.weights.values, m.weights.values,
                v.weights.values, state);
    adam_update(p.biases.values, g.biases.values, m.biases.values,
                v.biases.values, state);
  }
}

void sgd_step(ModelParameters& params, const ModelParameters& grads,
              Scalar learning_rate) {
  require_congruent(params, grads, "sgd_step gradients");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    params.entries[i].weights.values -=
        learning_rate * grads.entries[i].weights.values;
    params.entries[i].biases.values -=
        learning_rate * grads.entries[i].biases.values;
  }
}

void optimizer_step(ModelParameters& params, const ModelParameters& grads,
                    OptimizerState& state) {
  if (state.kind == OptimizerKind::adam) {
    adam_step(params, grads, state);
  } else {
    state.validate();
    state.step += 1;
    sgd_step(params, grads, state.learning_rate);
  }
}

}  // namespace hfl
