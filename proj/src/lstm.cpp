#include "chorrnn/lstm.hpp"

#include <cmath>
#include <string>

namespace chorrnn {

namespace {

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

void StackConfig::validate() const {
  require(input_dim >= 1, "stack config: input_dim must be >= 1");
  require(layers >= 1, "stack config: layers must be >= 1");
  require(hidden >= 1, "stack config: hidden must be >= 1");
}

LstmLayerParams::LstmLayerParams(std::size_t input_dim, std::size_t hidden) {
  for (std::size_t g = 0; g < kNumGates; ++g) {
    w[g] = Matrix(hidden, input_dim);
    r[g] = Matrix(hidden, hidden);
    b[g] = Vector(hidden, 0.0);
  }
  for (auto& v : p) v = Vector(hidden, 0.0);
}

namespace {

template <typename Params, typename Span>
std::vector<Span> layer_tensors(Params& lp) {
  std::vector<Span> out;
  out.reserve(15);
  for (std::size_t g = 0; g < kNumGates; ++g) {
    out.emplace_back(lp.w[g].flat());
    out.emplace_back(lp.r[g].flat());
    switch (g) {
      case kInputGate: out.emplace_back(lp.p[kInputPeep]); break;
      case kForgetGate: out.emplace_back(lp.p[kForgetPeep]); break;
      case kOutputGate: out.emplace_back(lp.p[kOutputPeep]); break;
      default: break;
    }
    out.emplace_back(lp.b[g]);
  }
  return out;
}

}  // namespace

std::vector<std::span<double>> LstmLayerParams::tensors() {
  return layer_tensors<LstmLayerParams, std::span<double>>(*this);
}

std::vector<std::span<const double>> LstmLayerParams::tensors() const {
  return layer_tensors<const LstmLayerParams, std::span<const double>>(*this);
}

StackState zero_state(const StackConfig& config) {
  return StackState(config.layers, LstmState::zeros(config.hidden));
}

CellResult cell_forward(const LstmLayerParams& params, std::span<const double> x,
                        std::span<const double> h_prev, std::span<const double> c_prev) {
  const std::size_t n = params.hidden();
  if (x.size() != params.input_dim()) {
    throw ShapeError("cell_forward: input length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(params.input_dim()));
  }
  require(h_prev.size() == n && c_prev.size() == n,
          "cell_forward: state length does not match hidden size");

  CellResult out;
  LstmStepCache& k = out.cache;
  k.x.assign(x.begin(), x.end());
  k.h_prev.assign(h_prev.begin(), h_prev.end());
  k.c_prev.assign(c_prev.begin(), c_prev.end());

  std::array<Vector, kNumGates> a;
  for (std::size_t g = 0; g < kNumGates; ++g) {
    a[g] = params.b[g];
    matvec_acc(params.w[g], x, a[g]);
    matvec_acc(params.r[g], h_prev, a[g]);
  }

  k.i.resize(n);
  k.f.resize(n);
  k.g.resize(n);
  k.o.resize(n);
  k.c.resize(n);
  k.tanh_c.resize(n);
  k.h.resize(n);
  const auto& pi = params.p[kInputPeep];
  const auto& pf = params.p[kForgetPeep];
  const auto& po = params.p[kOutputPeep];
  for (std::size_t j = 0; j < n; ++j) {
    k.i[j] = sigmoid(a[kInputGate][j] + pi[j] * c_prev[j]);
    k.f[j] = sigmoid(a[kForgetGate][j] + pf[j] * c_prev[j]);
    k.g[j] = std::tanh(a[kCellGate][j]);
    k.c[j] = k.f[j] * c_prev[j] + k.i[j] * k.g[j];
    k.o[j] = sigmoid(a[kOutputGate][j] + po[j] * k.c[j]);
    k.tanh_c[j] = std::tanh(k.c[j]);
    k.h[j] = k.o[j] * k.tanh_c[j];
  }
  out.h = k.h;
  out.c = k.c;
  return out;
}

StackForward stack_forward(const StackConfig& config,
                           std::span<const LstmLayerParams> params,
                           std::span<const Vector> xs, const StackState& state0) {
  config.validate();
  require(!xs.empty(), "stack_forward: empty input sequence");
  require(params.size() == config.layers, "stack_forward: layer count does not match config");
  require(state0.size() == config.layers, "stack_forward: initial state has wrong layer count");
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (params[l].input_dim() != config.layer_input(l) || params[l].hidden() != config.hidden) {
      throw ShapeError("stack_forward: layer " + std::to_string(l) + " params do not match config");
    }
  }

  StackForward out;
  out.caches.resize(config.layers);
  out.final_state = state0;
  std::vector<Vector> inputs(xs.begin(), xs.end());
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto& caches = out.caches[l];
    caches.reserve(inputs.size());
    LstmState& st = out.final_state[l];
    for (auto& in : inputs) {
      CellResult r = cell_forward(params[l], in, st.h, st.c);
      st.h = r.h;
      st.c = std::move(r.c);
      in = std::move(r.h);
      caches.push_back(std::move(r.cache));
    }
  }
  out.hs = std::move(inputs);
  return out;
}

StackGradients stack_backward(std::span<const LstmLayerParams> params,
                              const StackCaches& caches, std::span<const Vector> d_hs) {
  require(params.size() == caches.size(), "stack_backward: cache layer count mismatch");
  require(!caches.empty(), "stack_backward: no cached layers");
  const std::size_t steps = caches.back().size();
  if (d_hs.size() != steps) {
    throw ShapeError("stack_backward: " + std::to_string(d_hs.size()) + " output gradients for " +
                     std::to_string(steps) + " cached steps");
  }

  StackGradients out;
  const std::size_t layers = params.size();
  out.params.reserve(layers);
  for (const auto& lp : params) out.params.emplace_back(lp.input_dim(), lp.hidden());
  out.d_state0.resize(layers);

  std::vector<Vector> d_out(d_hs.begin(), d_hs.end());
  for (std::size_t li = layers; li-- > 0;) {
    const LstmLayerParams& lp = params[li];
    LstmLayerParams& gp = out.params[li];
    const auto& lc = caches[li];
    require(lc.size() == steps, "stack_backward: ragged cache");
    const std::size_t n = lp.hidden();
    const std::size_t d = lp.input_dim();

    Vector dh_next(n, 0.0), dc_next(n, 0.0);
    std::vector<Vector> d_in(steps, Vector(d, 0.0));
    std::array<Vector, kNumGates> da;
    for (auto& v : da) v.assign(n, 0.0);
    Vector dh(n), dc(n);

    for (std::size_t t = steps; t-- > 0;) {
      const LstmStepCache& k = lc[t];
      require(d_out[t].size() == n, "stack_backward: output gradient has wrong length");
      for (std::size_t j = 0; j < n; ++j) {
        dh[j] = d_out[t][j] + dh_next[j];
        const double d_o = dh[j] * k.tanh_c[j];
        da[kOutputGate][j] = d_o * k.o[j] * (1.0 - k.o[j]);
        dc[j] = dc_next[j] + dh[j] * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]) +
                da[kOutputGate][j] * lp.p[kOutputPeep][j];
        da[kInputGate][j] = dc[j] * k.g[j] * k.i[j] * (1.0 - k.i[j]);
        da[kCellGate][j] = dc[j] * k.i[j] * (1.0 - k.g[j] * k.g[j]);
        da[kForgetGate][j] = dc[j] * k.c_prev[j] * k.f[j] * (1.0 - k.f[j]);

        dc_next[j] = dc[j] * k.f[j] + da[kInputGate][j] * lp.p[kInputPeep][j] +
                     da[kForgetGate][j] * lp.p[kForgetPeep][j];
        gp.p[kInputPeep][j] += da[kInputGate][j] * k.c_prev[j];
        gp.p[kForgetPeep][j] += da[kForgetGate][j] * k.c_prev[j];
        gp.p[kOutputPeep][j] += da[kOutputGate][j] * k.c[j];
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (std::size_t g = 0; g < kNumGates; ++g) {
        outer_acc(gp.w[g], da[g], k.x);
        outer_acc(gp.r[g], da[g], k.h_prev);
        for (std::size_t j = 0; j < n; ++j) gp.b[g][j] += da[g][j];
        matvec_t_acc(lp.w[g], da[g], d_in[t]);
        matvec_t_acc(lp.r[g], da[g], dh_next);
      }
    }
    out.d_state0[li] = {std::move(dh_next), std::move(dc_next)};
    d_out = std::move(d_in);
  }
  out.d_xs = std::move(d_out);
  return out;
}

std::size_t param_count(const StackConfig& config) {
  config.validate();
  const std::size_t h = config.hidden;
  std::size_t total = 0;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t d = config.layer_input(l);
    total += 4 * (d * h + h * h + h) + 3 * h;
  }
  return total;
}

std::vector<LstmLayerParams> init_params(const StackConfig& config, Rng& rng) {
  config.validate();
  std::vector<LstmLayerParams> out;
  out.reserve(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LstmLayerParams lp(config.layer_input(l), config.hidden);
    const double sw = 1.0 / std::sqrt(static_cast<double>(lp.input_dim()));
    const double sr = 1.0 / std::sqrt(static_cast<double>(lp.hidden()));
    for (std::size_t g = 0; g < kNumGates; ++g) {
      for (double& v : lp.w[g].flat()) v = rng.uniform(-sw, sw);
      for (double& v : lp.r[g].flat()) v = rng.uniform(-sr, sr);
    }
    std::fill(lp.b[kForgetGate].begin(), lp.b[kForgetGate].end(), 1.0);
    out.push_back(std::move(lp));
  }
  return out;
}

}  // namespace chorrnn
