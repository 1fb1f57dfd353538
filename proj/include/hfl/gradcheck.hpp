#pragma once

#include <string>
#include <vector>

#include "hfl/loss.hpp"
#include "hfl/model.hpp"

namespace hfl {

// Numerical gradient verification: central finite differences with h = 1e-5
// against backward(), over every parameter component and every input
// component. The scalar under test is the hybrid loss of a forward pass with
// fixed seeds, so dropout masks and Gumbel noise are identical across the
// +h / -h evaluations.
//
// Relative error uses max(|analytic|, |numeric|) as denominator; components
// where both magnitudes are below 1e-6 count as matching.
Scalar max_gradient_error(const ModelSpec& spec, Index batch_size,
                          const HybridLossConfig& cfg, std::uint64_t seed,
                          bool inject_fault = false);

struct GradCheckCase {
  std::string name;
  Scalar max_rel_err = 0.0;
  Scalar tolerance = 1e-3;
  bool pass = true;
};

// One case per layer kind plus the hybrid loss grid
// (alpha in {0, 0.5, 1}) x (T in {0.5, 1}), each over `seeds_per_case`
// derived seeds. `inject_fault` corrupts one analytic component to prove the
// checker catches a wrong gradient.
std::vector<GradCheckCase> standard_gradient_checks(std::uint64_t seed,
                                                    int seeds_per_case = 3,
                                                    Scalar tolerance = 1e-3,
                                                    bool inject_fault = false);

}  // namespace hfl
