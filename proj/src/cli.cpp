#include "chorrnn/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "chorrnn/anim.hpp"
#include "chorrnn/experiments.hpp"
#include "chorrnn/generator.hpp"
#include "chorrnn/mocap.hpp"
#include "chorrnn/model.hpp"
#include "chorrnn/server.hpp"
#include "chorrnn/session.hpp"
#include "chorrnn/training.hpp"

namespace chorrnn {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string data;
  std::string out;
  std::string head = "mdn";
  std::string normalize = "none";
  std::string storage = "f64";
  std::string metrics;
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t mixtures = 8;
  std::uint64_t model_seed = 0;
  TrainConfig train;
};

struct GenerateArgs {
  std::string model;
  std::string seed_frames;
  std::string out;
  std::string policy = "unbiased";
  std::size_t steps = 300;
  std::uint64_t rng_seed = 0;
};

struct SynthArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t count = 0;   // 0: kind default
  std::size_t frames = 0;  // 0: kind default
  std::size_t joints = 0;  // 0: kind default
};

struct CompareArgs {
  std::string data;
  std::string out;
  CompareHeadsConfig config;
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string models = "models";
  std::string sessions = "sessions";
  std::size_t max_frames = 100000;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw DataError("failed writing " + path.string());
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<MotionSequence> corpus = read_corpus(a.data);
  if (corpus.empty()) throw DataError("data directory " + a.data + " contains no .seq files");
  const NormScheme scheme = parse_norm_scheme(a.normalize);
  for (auto& seq : corpus) seq = normalize(seq, scheme).first;

  ModelConfig mc;
  mc.input_dim = corpus.front().width();
  mc.layers = a.layers;
  mc.hidden = a.hidden;
  mc.head = parse_head(a.head);
  mc.mixtures = a.mixtures;
  if (a.storage == "f32") {
    mc.storage = StorageType::kF32;
  } else if (a.storage != "f64") {
    throw std::invalid_argument("storage must be f32 or f64");
  }
  Rng rng(a.model_seed ? a.model_seed : a.train.seed);
  Model model = Model::create(mc, rng);
  model.meta.normalize = to_string(scheme);
  out << "model: " << model.param_count() << " parameters ("
      << param_count(mc.stack()) << " in the LSTM stack)\n";

  std::ofstream metrics;
  if (!a.metrics.empty()) {
    metrics.open(a.metrics, std::ios::app);
    if (!metrics) throw DataError("cannot open metrics log " + a.metrics);
  }
  const TrainResult r = train(model, corpus, a.train, [&](const StepMetrics& m) {
    const std::string line = format_metrics(m);
    if (metrics) metrics << line << '\n' << std::flush;
    if (m.step % 50 == 0 || m.step == 1) out << line << '\n';
  });
  if (r.skipped_sequences) {
    err << "warning: skipped " << r.skipped_sequences << " sequences shorter than chunk + 1\n";
  }
  save(model, a.out);
  if (r.diverged) {
    err << "error: loss became non-finite at step " << r.metrics.back().step
        << "; saved the last good weights to " << a.out << '\n';
    return kExitNumerical;
  }
  out << "saved " << a.out << " after " << r.metrics.size() << " steps, final loss "
      << (r.metrics.empty() ? 0.0 : r.metrics.back().loss) << '\n';
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const Model model = load(a.model);
  const MotionSequence seed = read_sequence(a.seed_frames);
  const SamplingPolicy policy = parse_policy(a.policy, a.rng_seed);
  const MotionSequence gen = rollout(model, seed, a.steps, policy);
  for (const auto& f : gen.frames) {
    for (double v : f) {
      if (!std::isfinite(v)) throw NumericalError("generated a non-finite coordinate");
    }
  }
  write_sequence(gen, fs::path(a.out));
  out << "wrote " << gen.length() << " frames to " << a.out << '\n';
  return kExitOk;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed, std::ostream& out) {
  const GradCheckReport r = gradcheck_models(trials, seed);
  for (const auto& c : r.cases) {
    out << "layers=" << c.config.layers << " hidden=" << c.config.hidden
        << " c=" << c.config.input_dim << " head=" << to_string(c.config.head)
        << " m=" << c.config.mixtures << " T=" << c.steps << " params=" << c.checked
        << " max_rel_error=" << c.max_rel_error << '\n';
  }
  const bool ok = r.max_rel_error < 1e-5;
  out << "max relative error " << r.max_rel_error << (ok ? " < 1e-5: PASS" : " >= 1e-5: FAIL") << '\n';
  return ok ? kExitOk : kExitNumerical;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthKind kind = parse_synth_kind(a.kind);
  std::vector<MotionSequence> corpus;
  if (kind == SynthKind::kLissajous) {
    LissajousParams p;
    if (a.count) p.sequences = a.count;
    if (a.frames) p.frames = a.frames;
    if (a.joints) p.joints = a.joints;
    corpus = synth_lissajous(p);
  } else {
    BranchingParams p;
    if (a.count) p.sequences = a.count;
    if (a.frames) p.frames = a.frames;
    if (a.joints) p.joints = a.joints;
    Rng rng(a.seed);
    corpus = synth_branching(p, rng);
  }
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04zu.seq", a.kind.c_str(), i);
    write_sequence(corpus[i], fs::path(a.out) / name);
  }
  out << "wrote " << corpus.size() << " sequences to " << a.out << '\n';
  return kExitOk;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  const std::vector<MotionSequence> corpus = read_corpus(a.data);
  if (corpus.empty()) throw DataError("data directory " + a.data + " contains no .seq files");
  const CompareHeadsReport r =
      compare_heads(corpus, a.config, [&](const std::string& line) { out << line << '\n'; });
  write_text(a.out, r.to_json() + "\n");
  out << "mse/data variance ratio " << r.mse_ratio << " (< " << a.config.mse_max_ratio << ": "
      << (r.mse_stagnates ? "PASS" : "FAIL") << ")\n"
      << "mdn/data variance ratio " << r.mdn_ratio << " (>= " << a.config.mdn_min_ratio << ": "
      << (r.mdn_keeps_moving ? "PASS" : "FAIL") << ")\n"
      << "branch basins +" << r.basin_positive << " / -" << r.basin_negative << " (each >= "
      << a.config.min_basin_hits << ": " << (r.bimodal ? "PASS" : "FAIL") << ")\n"
      << "report written to " << a.out << '\n';
  return kExitOk;
}

int cmd_export_anim(const std::string& in, const std::string& path, std::ostream& out) {
  const MotionSequence seq = read_sequence(in);
  write_text(path, animation_json(seq).dump() + "\n");
  out << "wrote animation for " << seq.length() << " frames to " << path << '\n';
  return kExitOk;
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  SessionStore store(a.models, a.sessions, a.max_frames);
  out << "serving session API on http://" << a.host << ":" << a.port << " (models: " << a.models
      << ", sessions: " << a.sessions << ")\n"
      << std::flush;
  if (!serve(store, a.host, a.port)) {
    err << "error: cannot listen on " << a.host << ":" << a.port << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"chorrnn: mixture-density LSTM for motion-capture choreography"};
  app.set_config("--config", "", "Read options from a key = value file", false);
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a directory of .seq files");
  train_cmd->add_option("--data", ta.data, "Directory of sequence files")->required();
  train_cmd->add_option("--out", ta.out, "Checkpoint to write (.chrn)")->required();
  train_cmd->add_option("--layers", ta.layers, "LSTM layers")->capture_default_str();
  train_cmd->add_option("--hidden", ta.hidden, "Units per layer")->capture_default_str();
  train_cmd->add_option("--mixtures", ta.mixtures, "Mixture components")->capture_default_str();
  train_cmd->add_option("--chunk", ta.train.chunk, "BPTT chunk length")->capture_default_str();
  train_cmd->add_option("--batch", ta.train.batch, "Chunks per batch")->capture_default_str();
  train_cmd->add_option("--lr", ta.train.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--decay", ta.train.rmsprop_decay, "RMSProp decay")->capture_default_str();
  train_cmd->add_option("--epsilon", ta.train.rmsprop_epsilon, "RMSProp epsilon")->capture_default_str();
  train_cmd->add_option("--clip", ta.train.clip_norm, "Global gradient norm clip")->capture_default_str();
  train_cmd->add_option("--epochs", ta.train.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--max-steps", ta.train.max_steps, "Stop after N steps (0: no limit)")
      ->capture_default_str();
  train_cmd->add_option("--seed", ta.train.seed, "Training seed")->capture_default_str();
  train_cmd->add_option("--model-seed", ta.model_seed, "Init seed (0: use --seed)")->capture_default_str();
  train_cmd->add_flag("--stateful", ta.train.stateful, "Carry state across chunks of a sequence");
  train_cmd->add_option("--head", ta.head, "Output head")
      ->check(CLI::IsMember({"mdn", "mse"}))
      ->capture_default_str();
  train_cmd->add_option("--normalize", ta.normalize, "Normalization scheme")
      ->check(CLI::IsMember({"none", "center-root", "zscore"}))
      ->capture_default_str();
  train_cmd->add_option("--storage", ta.storage, "Checkpoint weight precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  train_cmd->add_option("--metrics", ta.metrics, "Append per-step metrics to this file");

  GenerateArgs ga;
  auto* gen_cmd = app.add_subcommand("generate", "Continue a seed sequence with a trained model");
  gen_cmd->add_option("--model", ga.model, "Checkpoint")->required();
  gen_cmd->add_option("--seed-frames", ga.seed_frames, "Sequence file to warm up on")->required();
  gen_cmd->add_option("--steps", ga.steps, "Frames to generate")->capture_default_str();
  gen_cmd->add_option("--policy", ga.policy, "unbiased | biased:B | greedy")->capture_default_str();
  gen_cmd->add_option("--rng-seed", ga.rng_seed, "Sampling seed")->capture_default_str();
  gen_cmd->add_option("--out", ga.out, "Output sequence file")->required();

  std::size_t gc_trials = 10;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  gc_cmd->add_option("--trials", gc_trials, "Random configurations")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
  synth_cmd->add_option("--kind", sa.kind, "lissajous | branching")
      ->required()
      ->check(CLI::IsMember({"lissajous", "branching"}));
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();
  synth_cmd->add_option("--seed", sa.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--count", sa.count, "Sequences (0: default)")->capture_default_str();
  synth_cmd->add_option("--frames", sa.frames, "Frames per sequence (0: default)")->capture_default_str();
  synth_cmd->add_option("--joints", sa.joints, "Joints (0: default)")->capture_default_str();

  CompareArgs ca;
  auto* cmp_cmd = app.add_subcommand("compare-heads", "Train mse and mdn heads and compare rollouts");
  cmp_cmd->add_option("--data", ca.data, "Directory of branching sequences")->required();
  cmp_cmd->add_option("--out", ca.out, "JSON report")->required();
  cmp_cmd->add_option("--steps", ca.config.train.max_steps, "Training steps per head")->capture_default_str();
  cmp_cmd->add_option("--hidden", ca.config.hidden, "Units per layer")->capture_default_str();
  cmp_cmd->add_option("--layers", ca.config.layers, "LSTM layers")->capture_default_str();
  cmp_cmd->add_option("--mixtures", ca.config.mixtures, "Mixture components")->capture_default_str();
  cmp_cmd->add_option("--lr", ca.config.train.learning_rate, "Learning rate")->capture_default_str();
  cmp_cmd->add_option("--rollouts", ca.config.rollouts, "MDN rollouts")->capture_default_str();
  cmp_cmd->add_option("--window", ca.config.window, "Variance window")->capture_default_str();
  cmp_cmd->add_option("--seed", ca.config.train.seed, "Training seed")->capture_default_str();

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the session HTTP API");
  serve_cmd->add_option("--port", sv.port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--models", sv.models, "Directory of .chrn checkpoints")->capture_default_str();
  serve_cmd->add_option("--sessions", sv.sessions, "Session data directory")->capture_default_str();
  serve_cmd->add_option("--max-frames", sv.max_frames, "Frame cap per request")->capture_default_str();

  std::string anim_in, anim_out;
  auto* anim_cmd = app.add_subcommand("export-anim", "Write animation JSON for the browser viewer");
  anim_cmd->add_option("--in", anim_in, "Sequence file")->required();
  anim_cmd->add_option("--out", anim_out, "JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  out << "# resolved configuration\n" << app.config_to_str(true, false) << std::flush;

  try {
    if (*train_cmd) return cmd_train(ta, out, err);
    if (*gen_cmd) return cmd_generate(ga, out);
    if (*gc_cmd) return cmd_gradcheck(gc_trials, gc_seed, out);
    if (*synth_cmd) return cmd_synth(sa, out);
    if (*cmp_cmd) return cmd_compare(ca, out);
    if (*serve_cmd) return cmd_serve(sv, out, err);
    if (*anim_cmd) return cmd_export_anim(anim_in, anim_out, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace chorrnn
