#include "chorrnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace chorrnn {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

GradCheckReport gradcheck_models(std::size_t trials, std::uint64_t seed, double h) {
  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    ModelConfig cfg;
    cfg.input_dim = 1 + rng.below(3);
    cfg.layers = 1 + rng.below(2);
    cfg.hidden = 1 + rng.below(6);
    cfg.head = trial % 4 == 3 ? HeadKind::kMse : HeadKind::kMdn;
    cfg.mixtures = 1 + rng.below(3);
    const std::size_t steps = 1 + rng.below(8);

    Model model = Model::zeros(cfg);
    for (auto t : model.weights.tensors()) {
      for (double& v : t) v = rng.uniform(-0.8, 0.8);
    }
    std::vector<Vector> xs(steps, Vector(cfg.input_dim)), ts(steps, Vector(cfg.input_dim));
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < cfg.input_dim; ++k) {
        xs[t][k] = rng.gauss();
        ts[t][k] = rng.gauss();
      }
    }
    StackState state0 = zero_state(cfg.stack());
    for (auto& s : state0) {
      for (double& v : s.h) v = rng.uniform(-0.5, 0.5);
      for (double& v : s.c) v = rng.uniform(-0.5, 0.5);
    }

    const LossAndGrads lg = loss_and_grads(model, xs, ts, state0);
    const auto analytic = lg.grads.tensors();
    auto params = model.weights.tensors();
    GradCheckCase c;
    c.config = cfg;
    c.steps = steps;
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t k = 0; k < params[i].size(); ++k) {
        const double keep = params[i][k];
        params[i][k] = keep + h;
        const double up = loss(model, xs, ts, state0);
        params[i][k] = keep - h;
        const double down = loss(model, xs, ts, state0);
        params[i][k] = keep;
        const double numeric = (up - down) / (2.0 * h);
        c.max_rel_error = std::max(c.max_rel_error, relative_error(analytic[i][k], numeric));
        ++c.checked;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, c.max_rel_error);
    report.cases.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------------------

CompareHeadsConfig::CompareHeadsConfig() {
  train.learning_rate = 3e-3;
  train.batch = 16;
  train.chunk = 39;
  train.epochs = 1000;
  train.max_steps = 1500;
  train.seed = 11;
}

std::size_t find_branch_point(const MotionSequence& seq) {
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (seq.frames[t][2] >= 1.0 - 1e-12) return t;
  }
  throw DataError("sequence has no branch marker (joint 0 z never reaches 1)");
}

namespace {

MotionSequence slice(const MotionSequence& seq, std::size_t begin, std::size_t end) {
  MotionSequence out;
  out.fps = seq.fps;
  out.joint_names = seq.joint_names;
  out.frames.assign(seq.frames.begin() + begin, seq.frames.begin() + end);
  return out;
}

}  // namespace

CompareHeadsReport compare_heads(std::span<const MotionSequence> corpus,
                                 const CompareHeadsConfig& config,
                                 const std::function<void(const std::string&)>& log) {
  if (corpus.empty()) throw DataError("compare-heads: empty corpus");
  const std::size_t length = corpus.front().length();
  for (const auto& s : corpus) {
    if (s.length() != length) throw DataError("compare-heads: sequences differ in length");
  }
  CompareHeadsReport report;
  report.branch_at = find_branch_point(corpus.front());
  const std::size_t post_begin = report.branch_at + 1;
  if (post_begin + config.window > length) {
    throw DataError("compare-heads: post-branch region shorter than the variance window");
  }
  report.generated_steps = length - post_begin;

  std::vector<double> data_series(length - post_begin - config.window + 1, 0.0);
  double data_disp = 0.0;
  for (const auto& s : corpus) {
    const auto prof = variance_profile(std::span(s.frames).subspan(post_begin), config.window);
    for (std::size_t i = 0; i < prof.size(); ++i) data_series[i] += prof[i] / corpus.size();
    data_disp += std::abs(s.frames.back()[1]) / corpus.size();
  }
  report.data_profile_series = data_series;
  report.data_profile = mean(data_series);

  ModelConfig base;
  base.input_dim = corpus.front().width();
  base.layers = config.layers;
  base.hidden = config.hidden;
  base.mixtures = config.mixtures;

  auto train_head = [&](HeadKind head) {
    ModelConfig cfg = base;
    cfg.head = head;
    Rng rng(config.model_seed);
    Model model = Model::create(cfg, rng);
    const TrainResult r = train(model, corpus, config.train);
    if (r.diverged) throw NumericalError("compare-heads: " + to_string(head) + " training diverged");
    if (log) {
      log(to_string(head) + " head trained for " + std::to_string(r.metrics.size()) +
          " steps, final loss " + std::to_string(r.metrics.back().loss));
    }
    return std::make_pair(std::move(model), r.metrics.back().loss);
  };

  const MotionSequence seed = slice(corpus.front(), 0, post_begin);

  auto [mse_model, mse_loss] = train_head(HeadKind::kMse);
  report.mse_final_loss = mse_loss;
  SamplingPolicy greedy{SamplingMode::kGreedy, 0.0, 0};
  const MotionSequence mse_roll = rollout(mse_model, seed, report.generated_steps, greedy);
  report.mse_profile_series = variance_profile(mse_roll, config.window);
  report.mse_profile = mean(report.mse_profile_series);

  auto [mdn_model, mdn_loss] = train_head(HeadKind::kMdn);
  report.mdn_final_loss = mdn_loss;
  std::vector<double> mdn_series(data_series.size(), 0.0);
  const double basin = 0.5 * data_disp;
  for (std::size_t r = 0; r < config.rollouts; ++r) {
    SamplingPolicy policy{SamplingMode::kUnbiased, 0.0, config.rollout_seed + r};
    const MotionSequence roll = rollout(mdn_model, seed, report.generated_steps, policy);
    const auto prof = variance_profile(roll, config.window);
    for (std::size_t i = 0; i < prof.size(); ++i) mdn_series[i] += prof[i] / config.rollouts;
    const double end_y = roll.frames.back()[1];
    if (end_y > basin) {
      ++report.basin_positive;
    } else if (end_y < -basin) {
      ++report.basin_negative;
    } else {
      ++report.basin_neither;
    }
  }
  report.mdn_profile_series = mdn_series;
  report.mdn_profile = mean(mdn_series);

  report.mse_ratio = report.mse_profile / report.data_profile;
  report.mdn_ratio = report.mdn_profile / report.data_profile;
  report.mse_stagnates = report.mse_ratio < config.mse_max_ratio;
  report.mdn_keeps_moving = report.mdn_ratio >= config.mdn_min_ratio;
  report.bimodal = report.basin_positive >= config.min_basin_hits &&
                   report.basin_negative >= config.min_basin_hits;
  return report;
}

std::string CompareHeadsReport::to_json() const {
  nlohmann::json j;
  j["branch_at"] = branch_at;
  j["generated_steps"] = generated_steps;
  j["data_profile"] = data_profile;
  j["mse_profile"] = mse_profile;
  j["mdn_profile"] = mdn_profile;
  j["mse_ratio"] = mse_ratio;
  j["mdn_ratio"] = mdn_ratio;
  j["basins"] = {{"positive", basin_positive}, {"negative", basin_negative}, {"neither", basin_neither}};
  j["final_loss"] = {{"mse", mse_final_loss}, {"mdn", mdn_final_loss}};
  j["profiles"] = {{"data", data_profile_series}, {"mse", mse_profile_series}, {"mdn", mdn_profile_series}};
  j["criteria"] = {
      {"mse_stagnates", mse_stagnates},
      {"mdn_keeps_moving", mdn_keeps_moving},
      {"bimodal", bimodal},
      {"pass", pass()},
  };
  return j.dump(2);
}

// ---------------------------------------------------------------------------

OverfitConfig::OverfitConfig() {
  model.layers = 2;
  model.hidden = 64;
  model.mixtures = 8;
  model.head = HeadKind::kMdn;
  train.batch = 16;
  train.chunk = 64;
  train.epochs = std::numeric_limits<std::size_t>::max();
  train.seed = 5;
  train.learning_rate = 5e-4;
}

double chunked_loss(const Model& model, const MotionSequence& seq, std::size_t chunk_len) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t start = 0; start + chunk_len + 1 <= seq.length(); start += chunk_len) {
    std::span<const Vector> frames(seq.frames);
    total += loss(model, frames.subspan(start, chunk_len), frames.subspan(start + 1, chunk_len),
                  zero_state(model.config.stack()));
    ++n;
  }
  if (n == 0) throw DataError("sequence shorter than one chunk");
  return total / static_cast<double>(n);
}

OverfitReport overfit_experiment(const MotionSequence& sequence, const OverfitConfig& config) {
  ModelConfig mc = config.model;
  mc.input_dim = sequence.width();
  Rng rng(config.model_seed);
  Model model = Model::create(mc, rng);

  OverfitReport report;
  report.initial_loss = chunked_loss(model, sequence, config.train.chunk);
  report.curve.emplace_back(0, report.initial_loss);
  report.floor_loss = report.initial_loss;

  TrainConfig tc = config.train;
  tc.max_steps = config.budget_steps * config.floor_factor;
  const std::span<const MotionSequence> corpus(&sequence, 1);
  const TrainResult r = train(model, corpus, tc, [&](const StepMetrics& m) {
    if (m.step % config.eval_every != 0 && m.step != config.budget_steps) return;
    const double l = chunked_loss(model, sequence, config.train.chunk);
    if (m.step == config.budget_steps) report.budget_loss = l;
    report.floor_loss = std::min(report.floor_loss, l);
    report.curve.emplace_back(m.step, l);
  });
  if (r.diverged) throw NumericalError("overfit experiment diverged");
  const double gap = report.initial_loss - report.floor_loss;
  report.gap_fraction = gap > 0.0 ? (report.initial_loss - report.budget_loss) / gap : 0.0;
  return report;
}

}  // namespace chorrnn
