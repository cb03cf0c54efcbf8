#include "jetr/enhancer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace jetr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'J', 'E', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

void require_dims_valid(const EnhancerDims& d) {
  if (d.d_in == 0 || d.d_h1 == 0 || d.d_h2 == 0 || d.d_out == 0) {
    fail(ErrorKind::InvalidArgument, "enhancer dims must all be positive");
  }
}

void append_raw(std::vector<std::uint8_t>& out, const void* src,
                std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(src);
  out.insert(out.end(), p, p + n);
}

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, T value) {
  append_raw(out, &value, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      fail(ErrorKind::CorruptCheckpoint, "checkpoint truncated");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void read_doubles(std::span<double> out) {
    const std::size_t n = out.size() * sizeof(double);
    if (pos_ + n > bytes_.size()) {
      fail(ErrorKind::CorruptCheckpoint, "checkpoint truncated");
    }
    std::memcpy(out.data(), bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

EnhancerParams make_zero_params(const EnhancerDims& dims) {
  require_dims_valid(dims);
  EnhancerParams p;
  p.dims = dims;
  p.w1 = Matrix(dims.d_h1, dims.d_in);
  p.b1 = Vector(dims.d_h1, 0.0);
  p.w2 = Matrix(dims.d_h2, dims.d_h1);
  p.b2 = Vector(dims.d_h2, 0.0);
  p.w3 = Matrix(dims.d_out, dims.d_h2);
  p.b3 = Vector(dims.d_out, 0.0);
  return p;
}

std::size_t param_count(const EnhancerDims& d) {
  return d.d_h1 * d.d_in + d.d_h1 + d.d_h2 * d.d_h1 + d.d_h2 +
         d.d_out * d.d_h2 + d.d_out;
}

EnhancerParams init_enhancer(std::uint64_t seed, const EnhancerDims& dims) {
  EnhancerParams p = make_zero_params(dims);
  SplitMix64 rng(seed);
  auto fill_kaiming = [&rng](Matrix& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : w.values) {
      v = rng.uniform(-bound, bound);
    }
  };
  fill_kaiming(p.w1, dims.d_in);
  fill_kaiming(p.w2, dims.d_h1);
  fill_kaiming(p.w3, dims.d_h2);
  return p;
}

Vector enhance(const EnhancerParams& p, const Vector& x, ForwardCache* cache) {
  if (x.size() != p.dims.d_in) {
    fail(ErrorKind::DimMismatch,
         "enhance: input dim " + std::to_string(x.size()) +
             " does not match d_in " + std::to_string(p.dims.d_in));
  }
  Vector a1 = matvec(p.w1, x);
  for (std::size_t i = 0; i < a1.size(); ++i) a1[i] += p.b1[i];
  Vector h1 = a1;
  for (double& v : h1) v = v > 0.0 ? v : 0.0;

  Vector a2 = matvec(p.w2, h1);
  for (std::size_t i = 0; i < a2.size(); ++i) a2[i] += p.b2[i];
  Vector h2 = a2;
  for (double& v : h2) v = v > 0.0 ? v : 0.0;

  Vector z = matvec(p.w3, h2);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += p.b3[i];

  if (cache != nullptr) {
    cache->x = x;
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
    cache->a2 = std::move(a2);
    cache->h2 = std::move(h2);
    cache->z = z;
  }
  return z;
}

void enhancer_backward(const EnhancerParams& p, const ForwardCache& cache,
                       const Vector& grad_z, EnhancerGrads& grad_accum,
                       Vector* grad_x) {
  const EnhancerDims& d = p.dims;
  if (grad_z.size() != d.d_out) {
    fail(ErrorKind::DimMismatch, "enhancer_backward: grad_z dim mismatch");
  }
  if (grad_accum.dims != d) {
    fail(ErrorKind::DimMismatch,
         "enhancer_backward: accumulator shapes do not match");
  }

  // Layer 3: z = W3 h2 + b3
  for (std::size_t r = 0; r < d.d_out; ++r) {
    grad_accum.b3[r] += grad_z[r];
    double* grow = grad_accum.w3.values.data() + r * d.d_h2;
    const double gz = grad_z[r];
    for (std::size_t c = 0; c < d.d_h2; ++c) {
      grow[c] += gz * cache.h2[c];
    }
  }
  Vector g_h2 = matvec_transposed(p.w3, grad_z);

  // ReLU: subgradient at 0 is 0, so the mask is a strict a > 0.
  Vector g_a2 = std::move(g_h2);
  for (std::size_t i = 0; i < d.d_h2; ++i) {
    if (!(cache.a2[i] > 0.0)) g_a2[i] = 0.0;
  }

  // Layer 2: a2 = W2 h1 + b2
  for (std::size_t r = 0; r < d.d_h2; ++r) {
    grad_accum.b2[r] += g_a2[r];
    double* grow = grad_accum.w2.values.data() + r * d.d_h1;
    const double ga = g_a2[r];
    if (ga == 0.0) continue;
    for (std::size_t c = 0; c < d.d_h1; ++c) {
      grow[c] += ga * cache.h1[c];
    }
  }
  Vector g_h1 = matvec_transposed(p.w2, g_a2);

  Vector g_a1 = std::move(g_h1);
  for (std::size_t i = 0; i < d.d_h1; ++i) {
    if (!(cache.a1[i] > 0.0)) g_a1[i] = 0.0;
  }

  // Layer 1: a1 = W1 x + b1
  for (std::size_t r = 0; r < d.d_h1; ++r) {
    grad_accum.b1[r] += g_a1[r];
    double* grow = grad_accum.w1.values.data() + r * d.d_in;
    const double ga = g_a1[r];
    if (ga == 0.0) continue;
    for (std::size_t c = 0; c < d.d_in; ++c) {
      grow[c] += ga * cache.x[c];
    }
  }
  if (grad_x != nullptr) {
    Vector gx = matvec_transposed(p.w1, g_a1);
    for (std::size_t i = 0; i < d.d_in; ++i) {
      (*grad_x)[i] += gx[i];
    }
  }
}

std::vector<std::uint8_t> save_params(const EnhancerParams& p) {
  std::vector<std::uint8_t> out;
  out.reserve(sizeof(kMagic) + 5 * sizeof(std::uint32_t) +
              param_count(p.dims) * sizeof(double));
  append_raw(out, kMagic, sizeof(kMagic));
  append_pod(out, kVersion);
  append_pod(out, static_cast<std::uint32_t>(p.dims.d_in));
  append_pod(out, static_cast<std::uint32_t>(p.dims.d_h1));
  append_pod(out, static_cast<std::uint32_t>(p.dims.d_h2));
  append_pod(out, static_cast<std::uint32_t>(p.dims.d_out));
  for_each_param(p, [&out](std::span<const double> field, bool) {
    append_raw(out, field.data(), field.size() * sizeof(double));
  });
  return out;
}

EnhancerParams load_params(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(reader.read<std::uint8_t>());
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::CorruptCheckpoint, "bad checkpoint magic");
  }
  const auto version = reader.read<std::uint32_t>();
  if (version != kVersion) {
    fail(ErrorKind::CorruptCheckpoint,
         "unsupported checkpoint version " + std::to_string(version));
  }
  EnhancerDims dims;
  dims.d_in = reader.read<std::uint32_t>();
  dims.d_h1 = reader.read<std::uint32_t>();
  dims.d_h2 = reader.read<std::uint32_t>();
  dims.d_out = reader.read<std::uint32_t>();
  if (dims.d_in == 0 || dims.d_h1 == 0 || dims.d_h2 == 0 || dims.d_out == 0) {
    fail(ErrorKind::InvalidArgument,
         "checkpoint header declares a zero dimension");
  }
  EnhancerParams p = make_zero_params(dims);
  for_each_param(p, [&reader](std::span<double> field, bool) {
    reader.read_doubles(field);
  });
  if (!reader.exhausted()) {
    fail(ErrorKind::CorruptCheckpoint, "trailing bytes after checkpoint data");
  }
  return p;
}

void save_params_file(const EnhancerParams& p,
                      const std::filesystem::path& path) {
  const auto bytes = save_params(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    fail(ErrorKind::Io, "short write to " + path.string());
  }
}

EnhancerParams load_params_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_params(std::span(bytes));
}

}  // namespace jetr
