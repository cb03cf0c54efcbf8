#include "jetr/optimizer.hpp"

#include <cmath>

namespace jetr {

void validate(const OptConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    fail(ErrorKind::InvalidArgument, "optimizer: learning_rate must be > 0");
  }
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
      cfg.beta2 >= 1.0) {
    fail(ErrorKind::InvalidArgument, "optimizer: betas must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) {
    fail(ErrorKind::InvalidArgument, "optimizer: eps must be > 0");
  }
  if (cfg.weight_decay < 0.0) {
    fail(ErrorKind::InvalidArgument, "optimizer: weight_decay must be >= 0");
  }
  if (cfg.max_grad_norm < 0.0) {
    fail(ErrorKind::InvalidArgument, "optimizer: max_grad_norm must be >= 0");
  }
}

OptState make_opt_state(const EnhancerDims& dims) {
  OptState state;
  state.m = make_zero_params(dims);
  state.v = make_zero_params(dims);
  return state;
}

void adamw_step(EnhancerParams& params, const EnhancerGrads& grads,
                OptState& state, const OptConfig& cfg) {
  validate(cfg);
  if (grads.dims != params.dims) {
    fail(ErrorKind::DimMismatch, "adamw_step: gradient shapes do not match");
  }
  if (state.m.dims != params.dims || state.v.dims != params.dims) {
    fail(ErrorKind::DimMismatch, "adamw_step: state shapes do not match");
  }

  double grad_sq_sum = 0.0;
  bool finite = true;
  for_each_param(grads, [&](std::span<const double> g, bool) {
    for (double v : g) {
      if (!std::isfinite(v)) finite = false;
      grad_sq_sum += v * v;
    }
  });
  if (!finite) {
    fail(ErrorKind::NonFinite, "adamw_step: non-finite gradient, step rejected");
  }

  double clip_scale = 1.0;
  if (cfg.max_grad_norm > 0.0) {
    const double norm = std::sqrt(grad_sq_sum);
    if (norm > cfg.max_grad_norm) {
      clip_scale = cfg.max_grad_norm / norm;
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  // Walk params/grads/moments in lockstep; the field order is fixed by
  // for_each_param.
  struct FieldRef {
    std::span<double> values;
    bool is_bias;
  };
  std::vector<FieldRef> pf, mf, vf;
  std::vector<std::span<const double>> gf;
  for_each_param(params, [&](std::span<double> s, bool b) {
    pf.push_back({s, b});
  });
  for_each_param(grads, [&](std::span<const double> s, bool) {
    gf.push_back(s);
  });
  for_each_param(state.m, [&](std::span<double> s, bool b) {
    mf.push_back({s, b});
  });
  for_each_param(state.v, [&](std::span<double> s, bool b) {
    vf.push_back({s, b});
  });

  for (std::size_t f = 0; f < pf.size(); ++f) {
    std::span<double> p = pf[f].values;
    std::span<const double> g = gf[f];
    std::span<double> m = mf[f].values;
    std::span<double> v = vf[f].values;
    const bool decay = !pf[f].is_bias && cfg.weight_decay > 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * clip_scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      if (decay) {
        p[i] -= cfg.learning_rate * cfg.weight_decay * p[i];
      }
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace jetr
