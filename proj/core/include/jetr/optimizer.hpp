#pragma once

// AdamW with decoupled weight decay over the enhancer parameters. Biases
// are exempt from decay. Optional global-norm gradient clipping, off by
// default.

#include <cstdint>

#include "jetr/enhancer.hpp"

namespace jetr {

struct OptConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

void validate(const OptConfig& cfg);

struct OptState {
  EnhancerParams m;  // first moments, mirrors the parameter shapes
  EnhancerParams v;  // second moments
  std::uint64_t step = 0;
};

OptState make_opt_state(const EnhancerDims& dims);

// One AdamW update with bias correction. Decay is decoupled
// (param -= lr * wd * param) and skips biases. A non-finite gradient
// rejects the whole step: params and state are left untouched.
void adamw_step(EnhancerParams& params, const EnhancerGrads& grads,
                OptState& state, const OptConfig& cfg);

}  // namespace jetr
