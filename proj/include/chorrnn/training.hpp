#ifndef CHORRNN_TRAINING_HPP
#define CHORRNN_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "chorrnn/math.hpp"
#include "chorrnn/mocap.hpp"
#include "chorrnn/model.hpp"

namespace chorrnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  double clip_norm = 5.0;
  std::size_t batch = 16;
  std::size_t chunk = 64;
  std::size_t epochs = 10;
  // Stop after this many optimizer steps; 0 means run all epochs.
  std::size_t max_steps = 0;
  std::uint64_t seed = 1;
  // Carry (h, c) from one chunk to the next chunk of the same sequence.
  bool stateful = false;

  void validate() const;
};

// One training window: inputs are frames [start, start + chunk) of a corpus
// sequence and targets are the frames one step later.
struct Chunk {
  std::size_t sequence = 0;
  std::size_t index = 0;  // position among the chunks of its sequence this epoch
  std::size_t start = 0;
  std::vector<Vector> xs;
  std::vector<Vector> targets;
};

using Batch = std::vector<Chunk>;

struct EpochPlan {
  std::vector<Batch> batches;
  std::size_t skipped = 0;  // sequences shorter than chunk + 1
};

// Cuts each sequence into non-overlapping chunks starting at a random offset,
// so every frame is an input at most once per epoch. Without `keep_order` the
// chunks are shuffled across the corpus before batching. With it, chunks of a
// sequence appear in order, spread over batch lanes so that a lane works
// through one sequence at a time. Throws DataError if no sequence is long
// enough.
EpochPlan make_chunks(std::span<const MotionSequence> corpus, std::size_t chunk_len,
                      std::size_t batch, Rng& rng, bool keep_order = false);

// Running mean of squared gradients, one entry per parameter.
struct RmspropState {
  std::vector<Vector> mean_square;

  static RmspropState zeros_like(const ModelWeights& weights);
};

// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / sqrt(s + eps)
void rmsprop_step(RmspropState& state, ModelWeights& params, const ModelWeights& grads,
                  const TrainConfig& config);

// Span-level form used by the model-level overload.
void rmsprop_step(std::span<double> mean_square, std::span<double> params,
                  std::span<const double> grads, const TrainConfig& config);

double global_norm(const ModelWeights& grads);

// Rescales grads in place when their joint L2 norm exceeds max_norm. Returns
// the norm before clipping.
double clip_global_norm(ModelWeights& grads, double max_norm);

struct StepMetrics {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wallclock_ms = 0.0;
};

// "step, epoch, loss, grad_norm, wallclock_ms"
std::string format_metrics(const StepMetrics& m);

struct TrainResult {
  std::vector<StepMetrics> metrics;
  std::size_t skipped_sequences = 0;
  bool diverged = false;  // a NaN loss stopped training; weights are the last good ones
};

using MetricsSink = std::function<void(const StepMetrics&)>;

// RMSProp over batches of chunks. Each batch element contributes its mean
// per-step loss; the batch gradient is the average over elements. Fully
// deterministic for a fixed config seed.
TrainResult train(Model& model, std::span<const MotionSequence> corpus, const TrainConfig& config,
                  const MetricsSink& sink = {});

}  // namespace chorrnn

#endif  // CHORRNN_TRAINING_HPP
