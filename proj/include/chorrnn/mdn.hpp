#ifndef CHORRNN_MDN_HPP
#define CHORRNN_MDN_HPP

#include <cstddef>
#include <span>

#include "chorrnn/math.hpp"

namespace chorrnn::mdn {

// Raw log-sigma values are clamped to this range before exponentiation.
inline constexpr double kLogSigmaMin = -10.0;
inline constexpr double kLogSigmaMax = 10.0;

// Mixture of m isotropic Gaussians over R^c.
struct MixtureParams {
  std::size_t m = 0;
  std::size_t c = 0;
  Vector alpha;  // m, on the simplex
  Matrix mu;     // m x c
  Vector sigma;  // m, positive

  void validate() const;
};

// Width of the raw head output: [alpha logits (m) | means (m*c) | log sigmas (m)].
inline constexpr std::size_t raw_width(std::size_t m, std::size_t c) { return m * (c + 2); }

// Offsets into the raw output.
inline constexpr std::size_t alpha_offset(std::size_t) { return 0; }
inline constexpr std::size_t mu_offset(std::size_t m) { return m; }
inline constexpr std::size_t sigma_offset(std::size_t m, std::size_t c) { return m + m * c; }

MixtureParams split_z(std::span<const double> z, std::size_t m, std::size_t c);

// log sum_i alpha_i phi_i(t), evaluated with log-sum-exp.
double log_density(const MixtureParams& params, std::span<const double> t);

// log(alpha_i) + log(phi_i(t)) for each component.
Vector log_weighted_densities(const MixtureParams& params, std::span<const double> t);

double nll(const MixtureParams& params, std::span<const double> t);

// Posterior component probabilities alpha_i phi_i / sum_j alpha_j phi_j.
Vector responsibilities(const MixtureParams& params, std::span<const double> t);

// Gradient of nll with respect to the raw output z (same layout as split_z
// input). The log-sigma entries are the unclamped derivative; callers that
// clamp must zero them outside the clamp range.
Vector nll_grad_z(const MixtureParams& params, std::span<const double> t);

// Categorical component index according to alpha.
std::size_t sample_component(std::span<const double> alpha, Rng& rng);

// Draw one target vector: component by alpha, then mu_i + sigma_i * eps.
Vector sample(const MixtureParams& params, Rng& rng);

// Sharpen a mixture: sigma_i * exp(-b), alpha_i^(1+b) renormalized. b = 0 is
// the identity. Throws std::invalid_argument for negative b.
MixtureParams bias_params(const MixtureParams& params, double b);

// Mean of the highest-weight component (first on ties).
Vector greedy_mean(const MixtureParams& params);

}  // namespace chorrnn::mdn

#endif  // CHORRNN_MDN_HPP
