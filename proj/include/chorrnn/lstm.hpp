#ifndef CHORRNN_LSTM_HPP
#define CHORRNN_LSTM_HPP

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "chorrnn/math.hpp"

namespace chorrnn {

// Gate order used everywhere, including the checkpoint layout.
enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCellGate = 2, kOutputGate = 3 };
inline constexpr std::size_t kNumGates = 4;

// Peephole slots. The cell candidate has no peephole.
enum Peephole : std::size_t { kInputPeep = 0, kForgetPeep = 1, kOutputPeep = 2 };
inline constexpr std::size_t kNumPeepholes = 3;

struct StackConfig {
  std::size_t input_dim = 0;
  std::size_t layers = 1;
  std::size_t hidden = 1;

  void validate() const;
  // Input width of layer `l`.
  std::size_t layer_input(std::size_t l) const { return l == 0 ? input_dim : hidden; }
};

// One peephole LSTM layer:
//   i = sigm(W_i x + R_i h' + p_i * c' + b_i)
//   f = sigm(W_f x + R_f h' + p_f * c' + b_f)
//   c = f * c' + i * tanh(W_c x + R_c h' + b_c)
//   o = sigm(W_o x + R_o h' + p_o * c + b_o)
//   h = o * tanh(c)
struct LstmLayerParams {
  std::array<Matrix, kNumGates> w;  // hidden x input_dim
  std::array<Matrix, kNumGates> r;  // hidden x hidden
  std::array<Vector, kNumPeepholes> p;
  std::array<Vector, kNumGates> b;

  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return w[0].cols(); }
  std::size_t hidden() const { return w[0].rows(); }

  // Tensors in checkpoint order: for each gate (i, f, c, o) W, R, p (not for
  // c), b.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  bool operator==(const LstmLayerParams&) const = default;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
  bool operator==(const LstmState&) const = default;
};

using StackState = std::vector<LstmState>;

StackState zero_state(const StackConfig& config);

// Activations of one cell step, kept for backpropagation.
struct LstmStepCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector i, f, g, o;  // gate activations; g is the tanh cell candidate
  Vector c;
  Vector tanh_c;
  Vector h;
};

struct CellResult {
  Vector h;
  Vector c;
  LstmStepCache cache;
};

CellResult cell_forward(const LstmLayerParams& params, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev);

// caches[layer][t]
using StackCaches = std::vector<std::vector<LstmStepCache>>;

struct StackForward {
  std::vector<Vector> hs;  // top-layer output per step
  StackCaches caches;
  StackState final_state;
};

StackForward stack_forward(const StackConfig& config,
                           std::span<const LstmLayerParams> params,
                           std::span<const Vector> xs, const StackState& state0);

struct StackGradients {
  std::vector<LstmLayerParams> params;
  StackState d_state0;       // d loss / d (h0, c0) per layer
  std::vector<Vector> d_xs;  // d loss / d input per step
};

// Full backpropagation through every cached step. `d_hs[t]` is the gradient of
// the loss with respect to the top-layer output at step t.
StackGradients stack_backward(std::span<const LstmLayerParams> params,
                              const StackCaches& caches, std::span<const Vector> d_hs);

std::size_t param_count(const StackConfig& config);

// Uniform(-s, s) weights with s = 1/sqrt(fan_in), zero peepholes, zero biases
// except the forget gate bias which is 1.
std::vector<LstmLayerParams> init_params(const StackConfig& config, Rng& rng);

}  // namespace chorrnn

#endif  // CHORRNN_LSTM_HPP
