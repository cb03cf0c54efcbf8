#pragma once

// Three-layer feedforward embedding enhancer with exact reverse-mode
// gradients:
//
//   z = f3(ReLU(f2(ReLU(f1(x)))))
//
// where f1: d_in -> d_h1, f2: d_h1 -> d_h2, f3: d_h2 -> d_out are affine.
// This is the only trainable state in the project; everything else treats
// the parameters as read-only.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jetr/linalg.hpp"

namespace jetr {

struct EnhancerDims {
  std::size_t d_in = 1024;
  std::size_t d_h1 = 256;
  std::size_t d_h2 = 512;
  std::size_t d_out = 1024;

  bool operator==(const EnhancerDims&) const = default;
};

struct EnhancerParams {
  EnhancerDims dims;
  Matrix w1;  // d_h1 x d_in
  Vector b1;  // d_h1
  Matrix w2;  // d_h2 x d_h1
  Vector b2;  // d_h2
  Matrix w3;  // d_out x d_h2
  Vector b3;  // d_out
};

// Gradients share the parameter layout.
using EnhancerGrads = EnhancerParams;

// Intermediates of one forward pass, required by the backward pass.
// Per-call state, never shared.
struct ForwardCache {
  Vector x;
  Vector a1;  // pre-activation of layer 1
  Vector h1;  // ReLU(a1)
  Vector a2;
  Vector h2;
  Vector z;
};

// Zero-filled parameters with the given shapes (used for gradient and
// moment accumulators).
EnhancerParams make_zero_params(const EnhancerDims& dims);

std::size_t param_count(const EnhancerDims& dims);

// Visits every trainable field in declared order: w1, b1, w2, b2, w3, b3.
// The callback receives the flat value span and whether the field is a bias.
template <typename Params, typename Fn>
void for_each_param(Params& p, Fn&& fn) {
  fn(std::span(p.w1.values), false);
  fn(std::span(p.b1), true);
  fn(std::span(p.w2.values), false);
  fn(std::span(p.b2), true);
  fn(std::span(p.w3.values), false);
  fn(std::span(p.b3), true);
}

// Kaiming-uniform initialization: weights ~ U(-sqrt(6/fan_in),
// +sqrt(6/fan_in)) per layer, drawn row-major from a single SplitMix64
// stream; biases zero. Bit-deterministic in the seed.
EnhancerParams init_enhancer(std::uint64_t seed, const EnhancerDims& dims = {});

// Forward pass. Fills `cache` when given. x.size() must equal dims.d_in.
Vector enhance(const EnhancerParams& p, const Vector& x,
               ForwardCache* cache = nullptr);

// Exact reverse-mode gradients for one cached forward pass. Parameter
// gradients accumulate into `grad_accum` (same shapes as the parameters);
// the input gradient accumulates into *grad_x when given. The ReLU
// subgradient at exactly 0 is 0.
void enhancer_backward(const EnhancerParams& p, const ForwardCache& cache,
                       const Vector& grad_z, EnhancerGrads& grad_accum,
                       Vector* grad_x = nullptr);

// Checkpoint format (.jetr): magic "JETR", u32 version, four u32 dims,
// then every field as little-endian 64-bit floats in declared order.
// Round trips are bit-exact.
std::vector<std::uint8_t> save_params(const EnhancerParams& p);
EnhancerParams load_params(std::span<const std::uint8_t> bytes);

void save_params_file(const EnhancerParams& p,
                      const std::filesystem::path& path);
EnhancerParams load_params_file(const std::filesystem::path& path);

}  // namespace jetr
