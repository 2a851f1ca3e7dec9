#ifndef CHORRNN_MODEL_HPP
#define CHORRNN_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chorrnn/lstm.hpp"
#include "chorrnn/math.hpp"
#include "chorrnn/mdn.hpp"

namespace chorrnn {

enum class HeadKind : std::uint8_t { kMdn = 0, kMse = 1 };
enum class StorageType : std::uint8_t { kF32 = 4, kF64 = 8 };

std::string to_string(HeadKind head);
HeadKind parse_head(const std::string& name);

struct ModelConfig {
  std::size_t input_dim = 75;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  HeadKind head = HeadKind::kMdn;
  std::size_t mixtures = 8;  // ignored for the mse head
  StorageType storage = StorageType::kF64;

  void validate() const;
  StackConfig stack() const { return {input_dim, layers, hidden}; }
  // m(c+2) for the mixture head, c for the regression head.
  std::size_t output_width() const;

  bool operator==(const ModelConfig&) const = default;
};

// All trainable tensors. Also used to hold gradients of the same shape.
struct ModelWeights {
  std::vector<LstmLayerParams> lstm;
  Matrix proj_w;  // output_width x hidden
  Vector proj_b;

  static ModelWeights zeros(const ModelConfig& config);

  // Checkpoint order: every LSTM layer (see LstmLayerParams::tensors), then
  // the projection matrix and bias.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t size() const;

  bool operator==(const ModelWeights&) const = default;
};

struct TrainingMeta {
  std::uint64_t steps = 0;
  std::vector<double> loss_tail;  // most recent losses, oldest first
  std::string normalize = "none";

  bool operator==(const TrainingMeta&) const = default;
};

struct Model {
  ModelConfig config;
  ModelWeights weights;
  TrainingMeta meta;

  // LSTM init rules plus uniform(-s, s) projection weights with
  // s = 1/sqrt(hidden) and a zero projection bias.
  static Model create(const ModelConfig& config, Rng& rng);
  static Model zeros(const ModelConfig& config);

  std::size_t param_count() const { return weights.size(); }
  // Mixture parameters for one raw head output. Requires the mdn head.
  mdn::MixtureParams mixture(std::span<const double> z) const;
};

struct SeqForward {
  std::vector<Vector> outputs;  // raw head output per step
  StackState final_state;
};

SeqForward forward_seq(const Model& model, std::span<const Vector> xs, const StackState& state0);

// One incremental step; `state` is advanced in place.
Vector forward_step(const Model& model, std::span<const double> x, StackState& state);

struct LossAndGrads {
  double loss = 0.0;  // mean over steps
  ModelWeights grads;
  StackState final_state;
};

// Mean negative log-likelihood (mdn head) or mean squared error per
// coordinate (mse head) of targets under the model, with exact gradients.
LossAndGrads loss_and_grads(const Model& model, std::span<const Vector> xs,
                            std::span<const Vector> targets, const StackState& state0);

// Loss only, no backward pass.
double loss(const Model& model, std::span<const Vector> xs, std::span<const Vector> targets,
            const StackState& state0);

// Checkpoint container, little-endian:
//   "CHRN" | u32 version | u32 input_dim | u32 layers | u32 hidden | u8 head
//   | u32 mixtures | u8 bytes per weight (4 or 8) | u64 steps | u32 n
//   | f64 loss_tail[n] | u32 len | char normalize[len] | u64 weight count
//   | weights in ModelWeights::tensors() order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save(const Model& model, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(std::span<const std::uint8_t> bytes);

}  // namespace chorrnn

#endif  // CHORRNN_MODEL_HPP
