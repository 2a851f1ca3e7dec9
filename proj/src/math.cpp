#include "chorrnn/math.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace chorrnn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

namespace {

// Fixed-width partial sums so the loop vectorizes without reassociation
// flags. The summation order is fixed, so results are reproducible.
inline double dot_kernel(const double* a, const double* b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[i + l] * b[i + l];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

void check_cols(const Matrix& w, std::size_t n) {
  if (w.cols() != n) {
    throw ShapeError("matvec: matrix has " + std::to_string(w.cols()) +
                     " columns but vector has length " + std::to_string(n));
  }
}

}  // namespace

Vector matvec(const Matrix& w, std::span<const double> x) {
  check_cols(w, x.size());
  Vector out(w.rows(), 0.0);
  matvec_acc(w, x, out);
  return out;
}

void matvec_acc(const Matrix& w, std::span<const double> x, std::span<double> out) {
  check_cols(w, x.size());
  if (out.size() != w.rows()) {
    throw ShapeError("matvec: output length " + std::to_string(out.size()) +
                     " does not match " + std::to_string(w.rows()) + " rows");
  }
  const std::size_t cols = w.cols();
  const double* p = w.flat().data();
  const double* xp = x.data();
  for (std::size_t r = 0; r < w.rows(); ++r, p += cols) out[r] += dot_kernel(p, xp, cols);
}

void matvec_t_acc(const Matrix& w, std::span<const double> y, std::span<double> out) {
  if (y.size() != w.rows() || out.size() != w.cols()) {
    throw ShapeError("matvec_t: shape mismatch");
  }
  const std::size_t cols = w.cols();
  const double* p = w.flat().data();
  for (std::size_t r = 0; r < w.rows(); ++r, p += cols) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += p[c] * yr;
  }
}

void outer_acc(Matrix& w, std::span<const double> a, std::span<const double> b) {
  if (a.size() != w.rows() || b.size() != w.cols()) {
    throw ShapeError("outer: shape mismatch");
  }
  const std::size_t cols = w.cols();
  double* p = w.flat().data();
  for (std::size_t r = 0; r < w.rows(); ++r, p += cols) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) p[c] += ar * b[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return dot_kernel(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
  // Rejection removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

double Rng::gauss() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace chorrnn
