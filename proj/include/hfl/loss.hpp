#pragma once

#include <cstdint>
#include <vector>

#include "hfl/tensor.hpp"

namespace hfl {

enum class GumbelMode {
  stochastic,     // training default: g_k = -log(-log u_k)
  deterministic,  // g = 0 everywhere; reproducible relaxation for tests
};

struct HybridLossConfig {
  Scalar alpha = 0.5;        // SoftMax-vs-Gumbel mixing weight in [0,1]
  Scalar temperature = 0.5;  // T > 0
  GumbelMode mode = GumbelMode::stochastic;

  void validate() const;
};

// Row-wise SoftMax of {B, K} logits.
Tensor softmax(const Tensor& logits);

// Gumbel-SoftMax relaxation: y = softmax((log softmax(logits) + g) / T).
// Rows are non-negative and sum to 1; deterministic mode at T = 1 reduces
// exactly to softmax(logits).
Tensor gumbel_softmax(const Tensor& logits, Scalar temperature, GumbelMode mode,
                      std::uint64_t rng_seed);

struct LossResult {
  Scalar loss = 0.0;  // mean per-sample loss, >= 0
  Tensor dlogits;     // gradient of the mean loss w.r.t. the logits
};

// alpha * CE(softmax) + (1 - alpha) * CE(gumbel-softmax relaxation), both
// against integer class labels. The Gumbel noise depends only on
// (rng_seed, batch shape), never on alpha.
LossResult hybrid_loss(const Tensor& logits, const std::vector<Index>& labels,
                       const HybridLossConfig& cfg, std::uint64_t rng_seed);

}  // namespace hfl
