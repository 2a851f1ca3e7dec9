#include "chorrnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>

namespace chorrnn {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(learning_rate, "learning rate");
  positive(rmsprop_decay, "rmsprop decay");
  positive(rmsprop_epsilon, "rmsprop epsilon");
  positive(clip_norm, "clip threshold");
  if (rmsprop_decay >= 1.0) throw std::invalid_argument("rmsprop decay must be < 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (chunk < 2) throw std::invalid_argument("chunk length must be >= 2");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

EpochPlan make_chunks(std::span<const MotionSequence> corpus, std::size_t chunk_len,
                      std::size_t batch, Rng& rng, bool keep_order) {
  if (chunk_len < 1 || batch < 1) throw std::invalid_argument("make_chunks: chunk and batch must be >= 1");
  EpochPlan plan;
  // chunks_by_seq[s] holds the chunks of sequence s in order.
  std::vector<std::vector<Chunk>> chunks_by_seq;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& frames = corpus[s].frames;
    if (frames.size() < chunk_len + 1) {
      ++plan.skipped;
      continue;
    }
    const std::size_t spare = (frames.size() - 1) % chunk_len;
    const std::size_t offset = spare ? rng.below(spare + 1) : 0;
    std::vector<Chunk> seq_chunks;
    for (std::size_t start = offset, idx = 0; start + chunk_len + 1 <= frames.size();
         start += chunk_len, ++idx) {
      Chunk c;
      c.sequence = s;
      c.index = idx;
      c.start = start;
      c.xs.assign(frames.begin() + start, frames.begin() + start + chunk_len);
      c.targets.assign(frames.begin() + start + 1, frames.begin() + start + chunk_len + 1);
      seq_chunks.push_back(std::move(c));
    }
    chunks_by_seq.push_back(std::move(seq_chunks));
  }
  if (chunks_by_seq.empty()) {
    throw DataError("no sequence has at least " + std::to_string(chunk_len + 1) +
                    " frames (" + std::to_string(plan.skipped) + " skipped)");
  }

  if (!keep_order) {
    std::vector<Chunk> all;
    for (auto& sc : chunks_by_seq) {
      for (auto& c : sc) all.push_back(std::move(c));
    }
    shuffle(all, rng);
    for (std::size_t i = 0; i < all.size(); i += batch) {
      Batch b;
      for (std::size_t j = i; j < std::min(all.size(), i + batch); ++j) b.push_back(std::move(all[j]));
      plan.batches.push_back(std::move(b));
    }
    return plan;
  }

  shuffle(chunks_by_seq, rng);
  std::deque<std::vector<Chunk>> queue(std::make_move_iterator(chunks_by_seq.begin()),
                                       std::make_move_iterator(chunks_by_seq.end()));
  struct Lane {
    std::vector<Chunk> chunks;
    std::size_t next = 0;
  };
  std::vector<Lane> lanes(batch);
  for (;;) {
    Batch b;
    for (auto& lane : lanes) {
      if (lane.next >= lane.chunks.size()) {
        if (queue.empty()) continue;
        lane.chunks = std::move(queue.front());
        queue.pop_front();
        lane.next = 0;
      }
      b.push_back(std::move(lane.chunks[lane.next++]));
    }
    if (b.empty()) break;
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

RmspropState RmspropState::zeros_like(const ModelWeights& weights) {
  RmspropState s;
  for (const auto& t : weights.tensors()) s.mean_square.emplace_back(t.size(), 0.0);
  return s;
}

void rmsprop_step(std::span<double> mean_square, std::span<double> params,
                  std::span<const double> grads, const TrainConfig& config) {
  if (mean_square.size() != params.size() || grads.size() != params.size()) {
    throw ShapeError("rmsprop_step: parameter, gradient and state sizes differ");
  }
  const double rho = config.rmsprop_decay;
  const double lr = config.learning_rate;
  const double eps = config.rmsprop_epsilon;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    mean_square[k] = rho * mean_square[k] + (1.0 - rho) * g * g;
    params[k] -= lr * g / std::sqrt(mean_square[k] + eps);
  }
}

void rmsprop_step(RmspropState& state, ModelWeights& params, const ModelWeights& grads,
                  const TrainConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  if (p.size() != g.size() || p.size() != state.mean_square.size()) {
    throw ShapeError("rmsprop_step: tensor count mismatch");
  }
  for (std::size_t i = 0; i < p.size(); ++i) rmsprop_step(state.mean_square[i], p[i], g[i], config);
}

double global_norm(const ModelWeights& grads) {
  double total = 0.0;
  for (const auto& t : grads.tensors()) total += squared_norm(t);
  return std::sqrt(total);
}

double clip_global_norm(ModelWeights& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip threshold must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto t : grads.tensors()) {
      for (double& v : t) v *= scale;
    }
  }
  return norm;
}

std::string format_metrics(const StepMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu, %zu, %.9g, %.9g, %.3f", m.step, m.epoch, m.loss,
                m.grad_norm, m.wallclock_ms);
  return buf;
}

namespace {

void accumulate(ModelWeights& into, const ModelWeights& g, double scale) {
  auto dst = into.tensors();
  const auto src = g.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t k = 0; k < dst[i].size(); ++k) dst[i][k] += scale * src[i][k];
  }
}

constexpr std::size_t kLossTail = 32;

}  // namespace

TrainResult train(Model& model, std::span<const MotionSequence> corpus, const TrainConfig& config,
                  const MetricsSink& sink) {
  config.validate();
  if (corpus.empty()) throw DataError("training corpus is empty");
  for (const auto& seq : corpus) {
    seq.validate();
    if (seq.width() != model.config.input_dim) {
      throw DataError("corpus frames have width " + std::to_string(seq.width()) +
                      " but the model expects " + std::to_string(model.config.input_dim));
    }
  }

  Rng rng(config.seed);
  RmspropState opt = RmspropState::zeros_like(model.weights);
  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t step = 0;
  std::optional<ModelWeights> last_good;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochPlan plan = make_chunks(corpus, config.chunk, config.batch, rng, config.stateful);
    result.skipped_sequences = plan.skipped;
    std::map<std::size_t, StackState> carried;

    for (const Batch& batch : plan.batches) {
      if (config.max_steps && step >= config.max_steps) return result;

      ModelWeights grads = ModelWeights::zeros(model.config);
      double batch_loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (const Chunk& chunk : batch) {
        StackState state0 = zero_state(model.config.stack());
        if (config.stateful && chunk.index > 0) {
          if (auto it = carried.find(chunk.sequence); it != carried.end()) state0 = it->second;
        }
        LossAndGrads lg = loss_and_grads(model, chunk.xs, chunk.targets, state0);
        batch_loss += lg.loss * inv_b;
        accumulate(grads, lg.grads, inv_b);
        if (config.stateful) carried[chunk.sequence] = std::move(lg.final_state);
      }

      StepMetrics m;
      m.step = ++step;
      m.epoch = epoch;
      m.loss = batch_loss;
      m.grad_norm = global_norm(grads);
      if (!std::isfinite(batch_loss) || !std::isfinite(m.grad_norm)) {
        // The current weights produced the NaN; roll back to the ones that
        // last gave a finite loss.
        if (last_good) model.weights = std::move(*last_good);
        result.metrics.push_back(m);
        if (sink) sink(m);
        result.diverged = true;
        return result;
      }
      last_good = model.weights;
      clip_global_norm(grads, config.clip_norm);
      rmsprop_step(opt, model.weights, grads, config);
      m.wallclock_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      model.meta.steps += 1;
      model.meta.loss_tail.push_back(batch_loss);
      if (model.meta.loss_tail.size() > kLossTail) {
        model.meta.loss_tail.erase(model.meta.loss_tail.begin());
      }
      result.metrics.push_back(m);
      if (sink) sink(m);
    }
  }
  return result;
}

}  // namespace chorrnn
