#include "jetr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace jetr {

namespace {

void require_same_dim(const Vector& x, const Vector& y, const char* op) {
  if (x.size() != y.size()) {
    fail(ErrorKind::DimMismatch,
         std::string(op) + ": dimension mismatch (" +
             std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
             ")");
  }
}

}  // namespace

double dot(const Vector& x, const Vector& y) {
  require_same_dim(x, y, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i] * y[i];
  }
  return acc;
}

double l2_norm(const Vector& x) {
  double acc = 0.0;
  for (double v : x) {
    acc += v * v;
  }
  return std::sqrt(acc);
}

double cosine(const Vector& x, const Vector& y) {
  require_same_dim(x, y, "cosine");
  const double nx = l2_norm(x);
  const double ny = l2_norm(y);
  if (nx == 0.0 || ny == 0.0) {
    fail(ErrorKind::UndefinedSimilarity,
         "cosine: undefined for zero-norm input");
  }
  const double c = dot(x, y) / (nx * ny);
  return std::clamp(c, -1.0, 1.0);
}

void cosine_grad_accum(const Vector& x, const Vector& y, double upstream,
                       Vector& grad_x, Vector& grad_y) {
  require_same_dim(x, y, "cosine_grad");
  const double nx = l2_norm(x);
  const double ny = l2_norm(y);
  if (nx == 0.0 || ny == 0.0) {
    fail(ErrorKind::UndefinedSimilarity,
         "cosine_grad: undefined for zero-norm input");
  }
  const double inv = 1.0 / (nx * ny);
  const double c = dot(x, y) * inv;
  // d cos / dx_k = y_k/(|x||y|) - cos * x_k/|x|^2
  for (std::size_t k = 0; k < x.size(); ++k) {
    grad_x[k] += upstream * (y[k] * inv - c * x[k] / (nx * nx));
    grad_y[k] += upstream * (x[k] * inv - c * y[k] / (ny * ny));
  }
}

Vector matvec(const Matrix& m, const Vector& x) {
  if (m.cols != x.size()) {
    fail(ErrorKind::DimMismatch,
         "matvec: shape mismatch (" + std::to_string(m.rows) + "x" +
             std::to_string(m.cols) + " * " + std::to_string(x.size()) + ")");
  }
  Vector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) {
      acc += row[c] * x[c];
    }
    out[r] = acc;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& x) {
  if (m.rows != x.size()) {
    fail(ErrorKind::DimMismatch,
         "matvec_transposed: shape mismatch (" + std::to_string(m.rows) +
             "x" + std::to_string(m.cols) + "^T * " +
             std::to_string(x.size()) + ")");
  }
  Vector out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    const double* row = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) {
      out[c] += row[c] * xr;
    }
  }
  return out;
}

Matrix outer(const Vector& u, const Vector& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t r = 0; r < u.size(); ++r) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      m(r, c) = u[r] * v[c];
    }
  }
  return m;
}

std::uint64_t SplitMix64::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitMix64::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    fail(ErrorKind::InvalidArgument, "uniform: requires lo < hi");
  }
  double v = lo + next_unit() * (hi - lo);
  // Guard the half-open contract against rounding at the top end.
  if (v >= hi) {
    v = std::nextafter(hi, lo);
  }
  return v;
}

double SplitMix64::gaussian() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - next_unit();
  const double u2 = next_unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace jetr
