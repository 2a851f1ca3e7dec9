#include "chorrnn/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chorrnn::mdn {

namespace {

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - top);
  return top + std::log(acc);
}

void check_target(const MixtureParams& params, std::span<const double> t) {
  if (t.size() != params.c) {
    throw ShapeError("mixture target has length " + std::to_string(t.size()) +
                     ", expected " + std::to_string(params.c));
  }
}

}  // namespace

void MixtureParams::validate() const {
  if (m == 0 || alpha.size() != m || sigma.size() != m || mu.rows() != m || mu.cols() != c) {
    throw ShapeError("mixture params: inconsistent shapes");
  }
}

MixtureParams split_z(std::span<const double> z, std::size_t m, std::size_t c) {
  if (m == 0) throw ShapeError("split_z: need at least one component");
  if (z.size() != raw_width(m, c)) {
    throw ShapeError("split_z: raw output has length " + std::to_string(z.size()) +
                     ", expected m(c+2) = " + std::to_string(raw_width(m, c)));
  }
  MixtureParams out;
  out.m = m;
  out.c = c;
  out.alpha.resize(m);
  const auto logits = z.subspan(alpha_offset(m), m);
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    out.alpha[i] = std::exp(logits[i] - top);
    total += out.alpha[i];
  }
  for (double& a : out.alpha) a /= total;

  const auto means = z.subspan(mu_offset(m), m * c);
  out.mu = Matrix(m, c, std::vector<double>(means.begin(), means.end()));

  out.sigma.resize(m);
  const auto log_sigma = z.subspan(sigma_offset(m, c), m);
  for (std::size_t i = 0; i < m; ++i) {
    out.sigma[i] = std::exp(std::clamp(log_sigma[i], kLogSigmaMin, kLogSigmaMax));
  }
  return out;
}

Vector log_weighted_densities(const MixtureParams& params, std::span<const double> t) {
  params.validate();
  check_target(params, t);
  const double c = static_cast<double>(params.c);
  const double log_norm = 0.5 * c * std::log(2.0 * std::numbers::pi);
  Vector out(params.m);
  for (std::size_t i = 0; i < params.m; ++i) {
    const auto mu = params.mu.row(i);
    double dist2 = 0.0;
    for (std::size_t k = 0; k < params.c; ++k) {
      const double d = t[k] - mu[k];
      dist2 += d * d;
    }
    const double s = params.sigma[i];
    out[i] = std::log(params.alpha[i]) - log_norm - c * std::log(s) - dist2 / (2.0 * s * s);
  }
  return out;
}

double log_density(const MixtureParams& params, std::span<const double> t) {
  return log_sum_exp(log_weighted_densities(params, t));
}

double nll(const MixtureParams& params, std::span<const double> t) {
  return -log_density(params, t);
}

Vector responsibilities(const MixtureParams& params, std::span<const double> t) {
  Vector lw = log_weighted_densities(params, t);
  const double total = log_sum_exp(lw);
  for (double& v : lw) v = std::exp(v - total);
  return lw;
}

Vector nll_grad_z(const MixtureParams& params, std::span<const double> t) {
  const Vector pi = responsibilities(params, t);
  const std::size_t m = params.m;
  const std::size_t c = params.c;
  Vector grad(raw_width(m, c), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    grad[alpha_offset(m) + i] = params.alpha[i] - pi[i];
    const auto mu = params.mu.row(i);
    const double var = params.sigma[i] * params.sigma[i];
    double dist2 = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = mu[k] - t[k];
      dist2 += d * d;
      grad[mu_offset(m) + i * c + k] = pi[i] * d / var;
    }
    grad[sigma_offset(m, c) + i] = -pi[i] * (dist2 / var - static_cast<double>(c));
  }
  return grad;
}

std::size_t sample_component(std::span<const double> alpha, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= 0.0) continue;
    acc += alpha[i];
    last = i;
    if (u < acc) return i;
  }
  // Rounding left u above the cumulative sum; fall back to the last
  // component with nonzero weight.
  return last;
}

Vector sample(const MixtureParams& params, Rng& rng) {
  params.validate();
  const std::size_t i = sample_component(params.alpha, rng);
  const auto mu = params.mu.row(i);
  Vector out(params.c);
  for (std::size_t k = 0; k < params.c; ++k) out[k] = mu[k] + params.sigma[i] * rng.gauss();
  return out;
}

MixtureParams bias_params(const MixtureParams& params, double b) {
  if (!(b >= 0.0)) throw std::invalid_argument("bias must be >= 0, got " + std::to_string(b));
  params.validate();
  if (b == 0.0) return params;
  MixtureParams out = params;
  Vector logits(params.m);
  for (std::size_t i = 0; i < params.m; ++i) {
    logits[i] = (1.0 + b) * std::log(params.alpha[i]);
    out.sigma[i] = params.sigma[i] * std::exp(-b);
  }
  const double total = log_sum_exp(logits);
  for (std::size_t i = 0; i < params.m; ++i) out.alpha[i] = std::exp(logits[i] - total);
  return out;
}

Vector greedy_mean(const MixtureParams& params) {
  params.validate();
  const auto best = static_cast<std::size_t>(
      std::max_element(params.alpha.begin(), params.alpha.end()) - params.alpha.begin());
  const auto row = params.mu.row(best);
  return Vector(row.begin(), row.end());
}

}  // namespace chorrnn::mdn
