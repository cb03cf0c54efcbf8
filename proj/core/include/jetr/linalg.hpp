#pragma once

// Minimal dense linear algebra over 64-bit floats, plus the deterministic
// RNG shared by every module. Everything here is desk-scale and plain loops;
// correctness is checked against oracles, not tuned for throughput.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "jetr/error.hpp"

namespace jetr {

using Vector = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    return values[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
};

double dot(const Vector& x, const Vector& y);
double l2_norm(const Vector& x);

// Cosine similarity, clamped to [-1, 1] after the division so rounding
// drift cannot leak out of the domain downstream sigmoids and logs expect.
// Zero-norm input is an error: the similarity is undefined there and the
// caller must decide, never read a silent 0.
double cosine(const Vector& x, const Vector& y);

// Gradient of cosine(x, y) with respect to both inputs, scaled by
// `upstream`. Accumulates into the output vectors (which must already have
// the right size).
void cosine_grad_accum(const Vector& x, const Vector& y, double upstream,
                       Vector& grad_x, Vector& grad_y);

Vector matvec(const Matrix& m, const Vector& x);
// M^T x, the adjoint used by backward passes.
Vector matvec_transposed(const Matrix& m, const Vector& x);
Matrix outer(const Vector& u, const Vector& v);

// SplitMix64: state advances by the 64-bit golden-gamma constant
// 0x9E3779B97F4A7C15 per draw and is finalized with the murmur-style mix
// (shift-xor 30/27/31, multipliers 0xBF58476D1CE4E5B9 and
// 0x94D049BB133111EB). The output stream is a pure function of the seed,
// identical across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();

  // Uniform in [lo, hi). Requires lo < hi.
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes two draws per call.
  double gaussian();

 private:
  std::uint64_t state_;
};

}  // namespace jetr
