#include "hfl/loss.hpp"

namespace hfl {

void HybridLossConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0)
    throw ValidationError("hybrid loss alpha must be in [0,1], got " +
                          std::to_string(alpha));
  if (!(temperature > 0.0))
    throw ValidationError("gumbel temperature must be > 0, got " +
                          std::to_string(temperature));
}

namespace {

void require_logits(const Tensor& logits) {
  if (logits.rank() != 2)
    throw StructuralError("logits must be {B, K}, got rank " +
                          std::to_string(logits.rank()));
  require_finite(logits.values, "logits");
}

// Row-wise log-softmax, numerically stable.
RowMatrix log_softmax_rows(ConstMatrixMap z) {
  RowMatrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    const Scalar lse = std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - m - lse;
  }
  return out;
}

// g_k = -log(-log u_k), u uniform in (0,1); zero in deterministic mode.
RowMatrix gumbel_noise(Index rows, Index cols, GumbelMode mode,
                       std::uint64_t rng_seed) {
  RowMatrix g = RowMatrix::Zero(rows, cols);
  if (mode == GumbelMode::stochastic) {
    Rng rng(derive_seed(rng_seed, "gumbel-noise"));
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        g(i, j) = -std::log(-std::log(open_unit(rng)));
  }
  return g;
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  require_logits(logits);
  Tensor out = logits;
  auto m = out.mat();
  m = log_softmax_rows(logits.mat()).array().exp();
  return out;
}

Tensor gumbel_softmax(const Tensor& logits, Scalar temperature, GumbelMode mode,
                      std::uint64_t rng_seed) {
  if (!(temperature > 0.0))
    throw ValidationError("gumbel temperature must be > 0, got " +
                          std::to_string(temperature));
  require_logits(logits);
  const Index B = logits.dim(0), K = logits.dim(1);
  RowMatrix s = log_softmax_rows(logits.mat()) +
                gumbel_noise(B, K, mode, rng_seed);
  s /= temperature;
  Tensor out({B, K});
  out.mat() = log_softmax_rows(ConstMatrixMap(s.data(), B, K)).array().exp();
  return out;
}

LossResult hybrid_loss(const Tensor& logits, const std::vector<Index>& labels,
                       const HybridLossConfig& cfg, std::uint64_t rng_seed) {
  cfg.validate();
  require_logits(logits);
  const Index B = logits.dim(0), K = logits.dim(1);
  if (B < 1) throw ValidationError("hybrid loss needs a non-empty batch");
  if (static_cast<Index>(labels.size()) != B)
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match batch size " + std::to_string(B));
  for (Index i = 0; i < B; ++i)
    if (labels[i] < 0 || labels[i] >= K)
      throw ValidationError("label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0," +
                            std::to_string(K) + ")");

  const RowMatrix logp = log_softmax_rows(logits.mat());
  // The relaxation perturbs log-probabilities, then re-normalizes under T.
  RowMatrix s = logp + gumbel_noise(B, K, cfg.mode, rng_seed);
  s /= cfg.temperature;
  const RowMatrix logy = log_softmax_rows(ConstMatrixMap(s.data(), B, K));

  const Scalar a = cfg.alpha;
  Scalar loss = 0.0;
  LossResult res;
  res.dlogits = Tensor({B, K});
  auto d = res.dlogits.mat();
  const Scalar inv_b = 1.0 / static_cast<Scalar>(B);
  for (Index i = 0; i < B; ++i) {
    const Index lab = labels[i];
    loss += -(a * logp(i, lab) + (1.0 - a) * logy(i, lab));
    // d/dz of each term: (softmax - onehot) and (relaxation - onehot)/T
    d.row(i) = (a * logp.row(i).array().exp() +
                (1.0 - a) / cfg.temperature * logy.row(i).array().exp()) *
               inv_b;
    d(i, lab) -= (a + (1.0 - a) / cfg.temperature) * inv_b;
  }
  res.loss = loss * inv_b;
  require_finite(res.dlogits.values, "hybrid loss gradient");
  return res;
}

}  // namespace hfl
