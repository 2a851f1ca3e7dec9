#include "chorrnn/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace chorrnn {

std::string to_string(HeadKind head) { return head == HeadKind::kMdn ? "mdn" : "mse"; }

HeadKind parse_head(const std::string& name) {
  if (name == "mdn") return HeadKind::kMdn;
  if (name == "mse") return HeadKind::kMse;
  throw std::invalid_argument("unknown head '" + name + "' (expected mdn or mse)");
}

void ModelConfig::validate() const {
  stack().validate();
  if (head == HeadKind::kMdn && mixtures < 1) {
    throw ShapeError("model config: mdn head needs at least one mixture component");
  }
}

std::size_t ModelConfig::output_width() const {
  return head == HeadKind::kMdn ? mdn::raw_width(mixtures, input_dim) : input_dim;
}

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  for (std::size_t l = 0; l < config.layers; ++l) {
    w.lstm.emplace_back(config.stack().layer_input(l), config.hidden);
  }
  w.proj_w = Matrix(config.output_width(), config.hidden);
  w.proj_b = Vector(config.output_width(), 0.0);
  return w;
}

std::vector<std::span<double>> ModelWeights::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : lstm) {
    auto t = l.tensors();
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(proj_w.flat());
  out.emplace_back(proj_b);
  return out;
}

std::vector<std::span<const double>> ModelWeights::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : lstm) {
    auto t = l.tensors();
    out.insert(out.end(), t.begin(), t.end());
  }
  out.emplace_back(proj_w.flat());
  out.emplace_back(proj_b);
  return out;
}

std::size_t ModelWeights::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

Model Model::create(const ModelConfig& config, Rng& rng) {
  Model model = zeros(config);
  model.weights.lstm = init_params(config.stack(), rng);
  const double s = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (double& v : model.weights.proj_w.flat()) v = rng.uniform(-s, s);
  return model;
}

Model Model::zeros(const ModelConfig& config) {
  Model model;
  model.config = config;
  model.weights = ModelWeights::zeros(config);
  return model;
}

mdn::MixtureParams Model::mixture(std::span<const double> z) const {
  if (config.head != HeadKind::kMdn) throw std::logic_error("model has no mixture head");
  return mdn::split_z(z, config.mixtures, config.input_dim);
}

namespace {

Vector project(const ModelWeights& w, std::span<const double> h) {
  Vector z = w.proj_b;
  matvec_acc(w.proj_w, h, z);
  return z;
}

void check_inputs(const Model& model, std::span<const Vector> xs) {
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (xs[t].size() != model.config.input_dim) {
      throw ShapeError("input frame " + std::to_string(t) + " has length " +
                       std::to_string(xs[t].size()) + ", model expects " +
                       std::to_string(model.config.input_dim));
    }
  }
}

// Per-step loss and its gradient with respect to the raw head output.
double step_loss(const Model& model, std::span<const double> z, std::span<const double> target,
                 Vector* dz) {
  const ModelConfig& cfg = model.config;
  if (cfg.head == HeadKind::kMdn) {
    const auto params = model.mixture(z);
    const double e = mdn::nll(params, target);
    if (dz) {
      *dz = mdn::nll_grad_z(params, target);
      const std::size_t off = mdn::sigma_offset(cfg.mixtures, cfg.input_dim);
      for (std::size_t i = 0; i < cfg.mixtures; ++i) {
        const double raw = z[off + i];
        if (raw < mdn::kLogSigmaMin || raw > mdn::kLogSigmaMax) (*dz)[off + i] = 0.0;
      }
    }
    return e;
  }
  const double inv_c = 1.0 / static_cast<double>(cfg.input_dim);
  double e = 0.0;
  if (dz) dz->assign(z.size(), 0.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double d = z[k] - target[k];
    e += d * d;
    if (dz) (*dz)[k] = 2.0 * d * inv_c;
  }
  return e * inv_c;
}

}  // namespace

SeqForward forward_seq(const Model& model, std::span<const Vector> xs, const StackState& state0) {
  check_inputs(model, xs);
  StackForward fwd = stack_forward(model.config.stack(), model.weights.lstm, xs, state0);
  SeqForward out;
  out.outputs.reserve(fwd.hs.size());
  for (const auto& h : fwd.hs) out.outputs.push_back(project(model.weights, h));
  out.final_state = std::move(fwd.final_state);
  return out;
}

Vector forward_step(const Model& model, std::span<const double> x, StackState& state) {
  if (x.size() != model.config.input_dim) {
    throw ShapeError("input frame has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.config.input_dim));
  }
  if (state.size() != model.config.layers) throw ShapeError("state has wrong layer count");
  Vector in(x.begin(), x.end());
  for (std::size_t l = 0; l < model.config.layers; ++l) {
    CellResult r = cell_forward(model.weights.lstm[l], in, state[l].h, state[l].c);
    state[l].h = r.h;
    state[l].c = std::move(r.c);
    in = std::move(r.h);
  }
  return project(model.weights, in);
}

LossAndGrads loss_and_grads(const Model& model, std::span<const Vector> xs,
                            std::span<const Vector> targets, const StackState& state0) {
  if (xs.size() != targets.size()) {
    throw ShapeError("loss_and_grads: " + std::to_string(xs.size()) + " inputs but " +
                     std::to_string(targets.size()) + " targets");
  }
  check_inputs(model, xs);
  check_inputs(model, targets);
  StackForward fwd = stack_forward(model.config.stack(), model.weights.lstm, xs, state0);

  const std::size_t steps = xs.size();
  const double inv_t = 1.0 / static_cast<double>(steps);
  LossAndGrads out;
  out.grads = ModelWeights::zeros(model.config);
  std::vector<Vector> d_hs(steps, Vector(model.config.hidden, 0.0));
  Vector dz;
  for (std::size_t t = 0; t < steps; ++t) {
    const Vector z = project(model.weights, fwd.hs[t]);
    out.loss += step_loss(model, z, targets[t], &dz);
    for (double& v : dz) v *= inv_t;
    outer_acc(out.grads.proj_w, dz, fwd.hs[t]);
    for (std::size_t k = 0; k < dz.size(); ++k) out.grads.proj_b[k] += dz[k];
    matvec_t_acc(model.weights.proj_w, dz, d_hs[t]);
  }
  out.loss *= inv_t;
  StackGradients g = stack_backward(model.weights.lstm, fwd.caches, d_hs);
  out.grads.lstm = std::move(g.params);
  out.final_state = std::move(fwd.final_state);
  return out;
}

double loss(const Model& model, std::span<const Vector> xs, std::span<const Vector> targets,
            const StackState& state0) {
  if (xs.size() != targets.size()) throw ShapeError("loss: inputs/targets length mismatch");
  check_inputs(model, targets);
  const SeqForward fwd = forward_seq(model, xs, state0);
  double total = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    total += step_loss(model, fwd.outputs[t], targets[t], nullptr);
  }
  return total / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'C', 'H', 'R', 'N'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError("checkpoint truncated while reading " + std::string(what) + ": expected " +
                      std::to_string(pos_ + n) + " bytes, file has " +
                      std::to_string(bytes_.size()));
    }
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Model& model) {
  model.config.validate();
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.config.input_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.config.layers));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.config.hidden));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.config.head));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.config.mixtures));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.config.storage));
  w.put<std::uint64_t>(model.meta.steps);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.meta.loss_tail.size()));
  for (double v : model.meta.loss_tail) w.put<double>(v);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.meta.normalize.size()));
  w.put_bytes(model.meta.normalize.data(), model.meta.normalize.size());
  w.put<std::uint64_t>(model.weights.size());
  const bool f32 = model.config.storage == StorageType::kF32;
  for (const auto& t : model.weights.tensors()) {
    for (double v : t) {
      if (f32) {
        w.put<float>(static_cast<float>(v));
      } else {
        w.put<double>(v);
      }
    }
  }
  return w.take();
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::string magic = r.get_string(4, "magic");
  if (magic != std::string(kMagic, 4)) {
    throw DataError("not a checkpoint: bad magic bytes (expected CHRN)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig cfg;
  cfg.input_dim = r.get<std::uint32_t>("input_dim");
  cfg.layers = r.get<std::uint32_t>("layers");
  cfg.hidden = r.get<std::uint32_t>("hidden");
  const auto head = r.get<std::uint8_t>("head");
  if (head > 1) throw DataError("checkpoint: unknown head tag " + std::to_string(head));
  cfg.head = static_cast<HeadKind>(head);
  cfg.mixtures = r.get<std::uint32_t>("mixtures");
  const auto width = r.get<std::uint8_t>("storage");
  if (width != 4 && width != 8) {
    throw DataError("checkpoint: unknown storage width " + std::to_string(width));
  }
  cfg.storage = static_cast<StorageType>(width);
  try {
    cfg.validate();
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: invalid config: ") + e.what());
  }

  Model model = Model::zeros(cfg);
  model.meta.steps = r.get<std::uint64_t>("steps");
  const auto tail = r.get<std::uint32_t>("loss tail length");
  r.need(static_cast<std::size_t>(tail) * 8, "loss tail");
  model.meta.loss_tail.resize(tail);
  for (auto& v : model.meta.loss_tail) v = r.get<double>("loss tail");
  const auto name_len = r.get<std::uint32_t>("normalize length");
  model.meta.normalize = r.get_string(name_len, "normalize scheme");

  const auto count = r.get<std::uint64_t>("weight count");
  if (count != model.weights.size()) {
    throw DataError("checkpoint: header declares " + std::to_string(count) +
                    " weights but config implies " + std::to_string(model.weights.size()));
  }
  const std::size_t expected = r.pos() + count * width;
  if (expected != r.size()) {
    throw DataError("checkpoint length mismatch: expected " + std::to_string(expected) +
                    " bytes, file has " + std::to_string(r.size()));
  }
  for (auto& t : model.weights.tensors()) {
    for (double& v : t) {
      v = width == 4 ? static_cast<double>(r.get<float>("weights")) : r.get<double>("weights");
      if (!std::isfinite(v)) throw DataError("checkpoint contains a non-finite weight");
    }
  }
  return model;
}

void save(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Model load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace chorrnn
