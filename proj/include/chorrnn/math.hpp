#ifndef CHORRNN_MATH_HPP
#define CHORRNN_MATH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chorrnn/errors.hpp"

namespace chorrnn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// W x. Throws ShapeError when W.cols() != x.size().
Vector matvec(const Matrix& w, std::span<const double> x);

// out += W x
void matvec_acc(const Matrix& w, std::span<const double> x, std::span<double> out);

// out += W^T y
void matvec_t_acc(const Matrix& w, std::span<const double> y, std::span<double> out);

// W += a b^T
void outer_acc(Matrix& w, std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

/// xoshiro256** seeded through splitmix64.
///
/// The state expansion and output function follow the reference code by
/// Blackman and Vigna, so a seed produces the same stream on every platform
/// and in any language that implements the same two generators. Doubles are
/// formed from the top 53 bits. Normal variates use the Box-Muller transform
/// with the second value of each pair cached for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n). n must be > 0.
  std::size_t below(std::size_t n);
  // Standard normal variate.
  double gauss();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline double gauss(Rng& rng) { return rng.gauss(); }

}  // namespace chorrnn

#endif  // CHORRNN_MATH_HPP
