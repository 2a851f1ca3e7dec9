#include "chorrnn/generator.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "chorrnn/mdn.hpp"

namespace chorrnn {

void SamplingPolicy::validate() const {
  if (mode == SamplingMode::kBiased && !(bias >= 0.0)) {
    throw std::invalid_argument("sampling bias must be >= 0");
  }
}

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::kBiased: return "biased";
    case SamplingMode::kGreedy: return "greedy";
    default: return "unbiased";
  }
}

SamplingMode parse_mode(const std::string& name) {
  if (name == "unbiased") return SamplingMode::kUnbiased;
  if (name == "biased") return SamplingMode::kBiased;
  if (name == "greedy") return SamplingMode::kGreedy;
  throw std::invalid_argument("unknown sampling mode '" + name +
                              "' (expected unbiased, biased or greedy)");
}

SamplingPolicy parse_policy(const std::string& text, std::uint64_t seed) {
  SamplingPolicy p;
  p.seed = seed;
  if (text.rfind("biased:", 0) == 0) {
    const std::string num = text.substr(7);
    double b = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), b);
    if (ec != std::errc() || ptr != num.data() + num.size() || num.empty()) {
      throw std::invalid_argument("bad bias in policy '" + text + "'");
    }
    p.mode = SamplingMode::kBiased;
    p.bias = b;
  } else {
    p.mode = parse_mode(text);
    if (p.mode == SamplingMode::kBiased) {
      throw std::invalid_argument("biased policy needs a value, e.g. biased:0.5");
    }
  }
  p.validate();
  return p;
}

std::string to_string(const SamplingPolicy& policy) {
  if (policy.mode == SamplingMode::kBiased) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), policy.bias);
    return "biased:" + std::string(buf, ptr);
  }
  return to_string(policy.mode);
}

Vector choose_frame(const Model& model, std::span<const double> output, const SamplingPolicy& policy,
                    Rng& rng) {
  if (model.config.head == HeadKind::kMse) return Vector(output.begin(), output.end());
  const mdn::MixtureParams params = model.mixture(output);
  switch (policy.mode) {
    case SamplingMode::kGreedy: return mdn::greedy_mean(params);
    case SamplingMode::kBiased: return mdn::sample(mdn::bias_params(params, policy.bias), rng);
    default: return mdn::sample(params, rng);
  }
}

MotionSequence rollout(const Model& model, const MotionSequence& seed_frames, std::size_t steps,
                       const SamplingPolicy& policy) {
  policy.validate();
  if (steps < 1) throw std::invalid_argument("rollout: steps must be >= 1");
  if (seed_frames.frames.empty()) throw std::invalid_argument("rollout: no seed frames");
  if (seed_frames.width() != model.config.input_dim) {
    throw ShapeError("rollout: seed frames have width " + std::to_string(seed_frames.width()) +
                     " but the model expects " + std::to_string(model.config.input_dim));
  }
  const NormScheme scheme = parse_norm_scheme(model.meta.normalize);
  auto [seed, transform] = normalize(seed_frames, scheme);

  Rng rng(policy.seed);
  StackState state = zero_state(model.config.stack());
  Vector out;
  for (const auto& frame : seed.frames) out = forward_step(model, frame, state);

  MotionSequence gen;
  gen.fps = seed_frames.fps;
  gen.joint_names = seed_frames.joint_names;
  gen.frames.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Vector next = choose_frame(model, out, policy, rng);
    if (s + 1 < steps) out = forward_step(model, next, state);
    gen.frames.push_back(transform.invert(next));
  }
  return gen;
}

MotionSequence naive_extrapolate(const MotionSequence& seq, std::size_t steps) {
  if (seq.frames.size() < 2) throw std::invalid_argument("naive_extrapolate: need at least 2 frames");
  MotionSequence out;
  out.fps = seq.fps;
  out.joint_names = seq.joint_names;
  Vector prev2 = seq.frames[seq.frames.size() - 2];
  Vector prev = seq.frames.back();
  for (std::size_t s = 0; s < steps; ++s) {
    Vector next(prev.size());
    for (std::size_t k = 0; k < prev.size(); ++k) next[k] = prev[k] + (prev[k] - prev2[k]);
    out.frames.push_back(next);
    prev2 = std::move(prev);
    prev = std::move(next);
  }
  return out;
}

std::vector<double> variance_profile(std::span<const Vector> frames, std::size_t window) {
  if (window < 2) throw std::invalid_argument("variance_profile: window must be >= 2");
  if (window > frames.size()) {
    throw std::invalid_argument("variance_profile: window " + std::to_string(window) +
                                " longer than sequence of " + std::to_string(frames.size()));
  }
  const std::size_t w = frames.front().size();
  const double n = static_cast<double>(window);
  std::vector<double> out;
  out.reserve(frames.size() - window + 1);
  for (std::size_t start = 0; start + window <= frames.size(); ++start) {
    double total = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      double mu = 0.0;
      for (std::size_t t = start; t < start + window; ++t) mu += frames[t][k];
      mu /= n;
      double var = 0.0;
      for (std::size_t t = start; t < start + window; ++t) {
        var += (frames[t][k] - mu) * (frames[t][k] - mu);
      }
      total += var / n;
    }
    out.push_back(w ? total / static_cast<double>(w) : 0.0);
  }
  return out;
}

std::vector<double> variance_profile(const MotionSequence& seq, std::size_t window) {
  return variance_profile(seq.frames, window);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace chorrnn
