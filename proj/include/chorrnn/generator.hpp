#ifndef CHORRNN_GENERATOR_HPP
#define CHORRNN_GENERATOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chorrnn/math.hpp"
#include "chorrnn/mocap.hpp"
#include "chorrnn/model.hpp"

namespace chorrnn {

enum class SamplingMode { kUnbiased, kBiased, kGreedy };

struct SamplingPolicy {
  SamplingMode mode = SamplingMode::kUnbiased;
  double bias = 0.0;  // used by kBiased
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SamplingPolicy&) const = default;
};

// "unbiased", "greedy" or "biased:<b>".
SamplingPolicy parse_policy(const std::string& text, std::uint64_t seed = 0);
std::string to_string(const SamplingPolicy& policy);
std::string to_string(SamplingMode mode);
SamplingMode parse_mode(const std::string& name);

// Chooses the next frame from one raw head output.
Vector choose_frame(const Model& model, std::span<const double> output, const SamplingPolicy& policy,
                    Rng& rng);

// Feeds every seed frame through the model without emitting, then generates
// `steps` frames, each fed back as the next input. The returned sequence
// holds only the generated frames and inherits the seed's fps and joints.
// The model's normalization scheme (if any) is applied to the seed and
// inverted on the output.
MotionSequence rollout(const Model& model, const MotionSequence& seed_frames, std::size_t steps,
                       const SamplingPolicy& policy);

// Constant-velocity continuation: x_t = x_{t-1} + (x_{t-1} - x_{t-2}).
MotionSequence naive_extrapolate(const MotionSequence& seq, std::size_t steps);

// For each window position, the mean over coordinates of the (population)
// variance of that coordinate inside the window.
std::vector<double> variance_profile(const MotionSequence& seq, std::size_t window);
std::vector<double> variance_profile(std::span<const Vector> frames, std::size_t window);

double mean(std::span<const double> values);

}  // namespace chorrnn

#endif  // CHORRNN_GENERATOR_HPP
