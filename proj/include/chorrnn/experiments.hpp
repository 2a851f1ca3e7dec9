#ifndef CHORRNN_EXPERIMENTS_HPP
#define CHORRNN_EXPERIMENTS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chorrnn/generator.hpp"
#include "chorrnn/mocap.hpp"
#include "chorrnn/model.hpp"
#include "chorrnn/training.hpp"

namespace chorrnn {

// |a - n| / max(|a| + |n|, floor). The floor turns the measure into an
// absolute one for gradients too small to difference reliably.
double relative_error(double analytic, double numeric, double floor = 1e-4);

struct GradCheckCase {
  ModelConfig config;
  std::size_t steps = 0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
};

// Random tiny models (layers <= 2, hidden <= 6, m <= 3, T <= 8) with every
// parameter, peepholes and biases included, randomized. Each analytic
// gradient of loss_and_grads is compared against a central difference with
// step `h`.
GradCheckReport gradcheck_models(std::size_t trials, std::uint64_t seed, double h = 1e-5);

struct CompareHeadsConfig {
  std::size_t layers = 2;
  std::size_t hidden = 32;
  std::size_t mixtures = 4;
  TrainConfig train;  // shared by both heads
  std::size_t rollouts = 100;
  std::size_t window = 8;
  std::uint64_t model_seed = 7;
  std::uint64_t rollout_seed = 1000;
  // Pass thresholds.
  double mse_max_ratio = 0.05;
  double mdn_min_ratio = 0.5;
  std::size_t min_basin_hits = 20;

  CompareHeadsConfig();
};

struct CompareHeadsReport {
  std::size_t branch_at = 0;
  std::size_t generated_steps = 0;
  double data_profile = 0.0;
  double mse_profile = 0.0;
  double mdn_profile = 0.0;
  double mse_ratio = 0.0;
  double mdn_ratio = 0.0;
  std::size_t basin_positive = 0;
  std::size_t basin_negative = 0;
  std::size_t basin_neither = 0;
  double mse_final_loss = 0.0;
  double mdn_final_loss = 0.0;
  std::vector<double> data_profile_series;
  std::vector<double> mse_profile_series;
  std::vector<double> mdn_profile_series;

  bool mse_stagnates = false;
  bool mdn_keeps_moving = false;
  bool bimodal = false;
  bool pass() const { return mse_stagnates && mdn_keeps_moving && bimodal; }

  std::string to_json() const;
};

// Trains an mse-head and an mdn-head model with the same budget on a
// branching corpus, then measures how much each one's rollouts keep moving
// after the branch point and whether sampled endings cover both branches.
CompareHeadsReport compare_heads(std::span<const MotionSequence> corpus,
                                 const CompareHeadsConfig& config,
                                 const std::function<void(const std::string&)>& log = {});

// Frame index at which a branching sequence's countdown coordinate reaches 1.
std::size_t find_branch_point(const MotionSequence& seq);

struct OverfitConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t budget_steps = 2000;
  // The floor is the lowest evaluation loss seen when training continues to
  // budget_steps * floor_factor.
  std::size_t floor_factor = 3;
  std::size_t eval_every = 50;
  std::uint64_t model_seed = 3;

  OverfitConfig();
};

struct OverfitReport {
  double initial_loss = 0.0;
  double budget_loss = 0.0;
  double floor_loss = 0.0;
  double gap_fraction = 0.0;  // (initial - budget) / (initial - floor)
  std::vector<std::pair<std::size_t, double>> curve;  // (step, eval loss)
};

// Mean loss over the non-overlapping chunk_len windows of a sequence,
// each started from a zero state.
double chunked_loss(const Model& model, const MotionSequence& seq, std::size_t chunk_len);

OverfitReport overfit_experiment(const MotionSequence& sequence, const OverfitConfig& config);

}  // namespace chorrnn

#endif  // CHORRNN_EXPERIMENTS_HPP
