// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "chorrnn/cli.hpp"
#include "chorrnn/experiments.hpp"
#include "chorrnn/server.hpp"
#include "chorrnn/session.hpp"
#include "httplib.h"
#include "oracles.hpp"

using namespace chorrnn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chorrnn_acceptance_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

Outcome parameter_count() {
  const std::size_t n = param_count({75, 3, 1024});
  const double rel = std::abs(static_cast<double>(n) - 21e6) / 21e6;
  return {n == 21300224 && rel <= 0.02, "param_count = " + std::to_string(n) + ", " + fmt("%.2f%%", 100 * rel) + " from 21M"};
}

struct MdnInstance {
  std::size_t m, c;
  Vector z, t;
};

std::vector<MdnInstance> mdn_instances() {
  Rng rng(2024);
  std::vector<MdnInstance> out;
  for (int k = 0; k < 100; ++k) {
    MdnInstance in{1 + rng.below(4), 1 + rng.below(5), {}, {}};
    in.z.resize(mdn::raw_width(in.m, in.c));
    for (double& v : in.z) v = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < in.m; ++i) in.z[mdn::sigma_offset(in.m, in.c) + i] = rng.uniform(-1.5, 1.0);
    in.t.resize(in.c);
    for (double& v : in.t) v = rng.uniform(-2.0, 2.0);
    out.push_back(std::move(in));
  }
  return out;
}

Outcome mdn_gradient() {
  double worst = 0.0;
  for (const auto& in : mdn_instances()) {
    const auto g = mdn::nll_grad_z(mdn::split_z(in.z, in.m, in.c), in.t);
    const auto fd = oracle::central_diff5(
        [&](const Vector& z) { return mdn::nll(mdn::split_z(z, in.m, in.c), in.t); }, in.z, 3e-4);
    for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, oracle::rel_err(g[k], fd[k]));
  }
  return {worst < 1e-6, "100 instances, max relative error " + fmt("%.3g", worst)};
}

Outcome end_to_end_gradient() {
  Rng rng(77);
  double worst = 0.0;
  std::size_t configs = 0, checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    ModelConfig cfg;
    cfg.input_dim = 1 + rng.below(3);
    cfg.layers = 1 + rng.below(2);
    cfg.hidden = 1 + rng.below(6);
    cfg.mixtures = 1 + rng.below(3);
    const std::size_t steps = 1 + rng.below(8);
    Model m = Model::zeros(cfg);
    for (auto t : m.weights.tensors()) {
      for (double& v : t) v = rng.uniform(-0.8, 0.8);
    }
    std::vector<Vector> xs(steps, Vector(cfg.input_dim)), ts = xs;
    for (auto& x : xs) {
      for (double& v : x) v = rng.gauss();
    }
    for (auto& x : ts) {
      for (double& v : x) v = rng.gauss();
    }
    const auto s0 = zero_state(cfg.stack());
    const auto lg = loss_and_grads(m, xs, ts, s0);
    auto params = m.weights.tensors();
    const auto grads = lg.grads.tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t k = 0; k < params[i].size(); ++k) {
        const double keep = params[i][k];
        params[i][k] = keep + 1e-5;
        const double up = loss(m, xs, ts, s0);
        params[i][k] = keep - 1e-5;
        const double down = loss(m, xs, ts, s0);
        params[i][k] = keep;
        worst = std::max(worst, oracle::rel_err(grads[i][k], (up - down) / 2e-5));
        ++checked;
      }
    }
    ++configs;
  }
  return {worst < 1e-5, std::to_string(configs) + " configs, " + std::to_string(checked) +
                            " parameters, max relative error " + fmt("%.3g", worst)};
}

Outcome alpha_gradient_sum() {
  double worst = 0.0;
  for (const auto& in : mdn_instances()) {
    const auto g = mdn::nll_grad_z(mdn::split_z(in.z, in.m, in.c), in.t);
    double s = 0.0;
    for (std::size_t i = 0; i < in.m; ++i) s += g[mdn::alpha_offset(in.m) + i];
    worst = std::max(worst, std::abs(s));
  }
  return {worst < 1e-10, "max |sum of alpha-logit gradients| " + fmt("%.3g", worst)};
}

Outcome overfit() {
  const auto seq = synth_lissajous(LissajousParams{})[0];
  const OverfitConfig cfg;
  const auto report = overfit_experiment(seq, cfg);

  // Determinism: an independent short run reproduces the start of the curve.
  Rng rng(cfg.model_seed);
  ModelConfig mc = cfg.model;
  mc.input_dim = seq.width();
  Model model = Model::create(mc, rng);
  TrainConfig tc = cfg.train;
  tc.max_steps = 2 * cfg.eval_every;
  std::vector<double> again;
  const std::vector<MotionSequence> corpus{seq};
  train(model, corpus, tc, [&](const StepMetrics& m) {
    if (m.step % cfg.eval_every == 0) again.push_back(chunked_loss(model, seq, cfg.train.chunk));
  });
  bool deterministic = again.size() == 2;
  for (std::size_t i = 0; deterministic && i < again.size(); ++i) {
    deterministic = again[i] == report.curve[i + 1].second;
  }
  const bool pass = report.gap_fraction >= 0.9 && deterministic;
  return {pass, "initial " + fmt("%.2f", report.initial_loss) + ", at " + std::to_string(cfg.budget_steps) +
                    " steps " + fmt("%.2f", report.budget_loss) + ", floor " + fmt("%.2f", report.floor_loss) +
                    ", gap closed " + fmt("%.3f", report.gap_fraction) + " (need 0.9)" +
                    (deterministic ? ", deterministic" : ", NOT deterministic")};
}

Outcome stagnation_contrast() {
  Rng rng(42);
  const auto corpus = synth_branching(BranchingParams{}, rng);
  const auto r = compare_heads(corpus, CompareHeadsConfig{}, {});
  return {r.pass(), "mse ratio " + fmt("%.4f", r.mse_ratio) + " (< 0.05), mdn ratio " + fmt("%.3f", r.mdn_ratio) +
                        " (>= 0.5), basins +" + std::to_string(r.basin_positive) + " / -" +
                        std::to_string(r.basin_negative) + " / neither " + std::to_string(r.basin_neither) +
                        " (each >= 20)"};
}

Outcome sampling_statistics() {
  mdn::MixtureParams p;
  p.m = 3;
  p.c = 2;
  p.alpha = {0.2, 0.5, 0.3};
  p.mu = Matrix(3, 2);
  const double mus[3][2] = {{-1.0, 0.5}, {0.0, 2.0}, {1.5, -1.0}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 2; ++k) p.mu(i, k) = mus[i][k];
  }
  p.sigma = {0.3, 0.6, 0.2};
  const std::size_t n = 100000;

  Rng rng(99);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t k = 0; k < n; ++k) ++counts[mdn::sample_component(p.alpha, rng)];
  bool pass = true;
  double worst_freq = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double dev = std::abs(static_cast<double>(counts[i]) / n - p.alpha[i]);
    const double bound = 4 * std::sqrt(p.alpha[i] * (1 - p.alpha[i]) / n);
    worst_freq = std::max(worst_freq, dev / bound);
    pass = pass && dev < bound;
  }

  Vector sum(2, 0.0), sq(2, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto s = mdn::sample(p, rng);
    for (std::size_t d = 0; d < 2; ++d) {
      sum[d] += s[d];
      sq[d] += s[d] * s[d];
    }
  }
  double worst_se = 0.0;
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 3; ++i) mean += p.alpha[i] * p.mu(i, d);
    const double emp = sum[d] / n;
    const double var = sq[d] / n - emp * emp;
    const double z = std::abs(emp - mean) / std::sqrt(var / n);
    worst_se = std::max(worst_se, z);
    pass = pass && z < 5.0;
  }
  return {pass, "worst frequency deviation " + fmt("%.2f", worst_freq) + " of the 4-sigma bound, worst mean deviation " +
                    fmt("%.2f", worst_se) + " standard errors"};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "chorrnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism_and_round_trips() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  LissajousParams lp;
  lp.joints = 3;
  lp.frames = 120;
  lp.sequences = 2;
  const auto corpus = synth_lissajous(lp);
  ModelConfig mc;
  mc.input_dim = 9;
  mc.hidden = 16;
  mc.mixtures = 3;
  TrainConfig tc;
  tc.chunk = 24;
  tc.batch = 4;
  tc.epochs = 5;
  tc.seed = 8;
  auto train_once = [&] {
    Rng rng(4);
    Model m = Model::create(mc, rng);
    const auto r = train(m, corpus, tc);
    std::vector<double> curve;
    for (const auto& s : r.metrics) curve.push_back(s.loss);
    return std::make_pair(std::move(m), curve);
  };
  const auto [model_a, curve_a] = train_once();
  const auto [model_b, curve_b] = train_once();
  expect(curve_a == curve_b && !curve_a.empty(), "training curves differ");
  expect(model_a.weights == model_b.weights, "trained weights differ");

  MotionSequence seed = corpus[0];
  seed.frames.resize(10);
  const auto policy = parse_policy("unbiased", 5);
  expect(rollout(model_a, seed, 50, policy) == rollout(model_b, seed, 50, policy), "rollouts differ");

  const fs::path dir = scratch_dir("determinism");
  save(model_a, dir / "m.chrn");
  const Model back = load(dir / "m.chrn");
  expect(back.weights == model_a.weights && back.config == model_a.config && back.meta == model_a.meta,
         "f64 checkpoint round trip is not exact");
  Model f32 = model_a;
  f32.config.storage = StorageType::kF32;
  const Model back32 = deserialize(serialize(f32));
  double worst32 = 0.0;
  const auto wa = model_a.weights.tensors();
  const auto wb = back32.weights.tensors();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    for (std::size_t k = 0; k < wa[i].size(); ++k) {
      worst32 = std::max(worst32, std::abs(wa[i][k] - wb[i][k]) / std::max(1.0, std::abs(wa[i][k])));
    }
  }
  expect(worst32 <= 1e-5, "f32 checkpoint error " + fmt("%.3g", worst32));

  Rng rng(6);
  MotionSequence rnd;
  rnd.joint_names = generic_joint_names(4);
  for (int t = 0; t < 100; ++t) {
    Vector f(12);
    for (double& v : f) v = rng.uniform(-3.0, 3.0);
    rnd.frames.push_back(f);
  }
  write_sequence(rnd, dir / "r.seq");
  const auto rback = read_sequence(dir / "r.seq");
  double worst_seq = 0.0;
  for (std::size_t t = 0; t < rnd.frames.size(); ++t) {
    for (std::size_t k = 0; k < 12; ++k) worst_seq = std::max(worst_seq, std::abs(rnd.frames[t][k] - rback.frames[t][k]));
  }
  expect(worst_seq < 1e-9 && rback.joint_names == rnd.joint_names, "sequence round trip error " + fmt("%.3g", worst_seq));

  write_sequence(seed, dir / "seed.seq");
  for (const char* name : {"g1.seq", "g2.seq"}) {
    expect(cli({"generate", "--model", (dir / "m.chrn").string(), "--seed-frames", (dir / "seed.seq").string(),
                "--steps", "40", "--policy", "unbiased", "--rng-seed", "12", "--out", (dir / name).string()}) == 0,
           "generate failed");
  }
  expect(slurp(dir / "g1.seq") == slurp(dir / "g2.seq") && !slurp(dir / "g1.seq").empty(),
         "generated files differ");

  const fs::path s1 = dir / "s1", s2 = dir / "s2";
  cli({"synth", "--kind", "branching", "--out", s1.string(), "--seed", "3", "--count", "4"});
  cli({"synth", "--kind", "branching", "--out", s2.string(), "--seed", "3", "--count", "4"});
  expect(slurp(s1 / "branching_0003.seq") == slurp(s2 / "branching_0003.seq") &&
             !slurp(s1 / "branching_0003.seq").empty(),
         "synthetic corpora differ");
  fs::remove_all(dir);

  std::string detail = "training curves, weights, rollouts, generated files, checkpoints (f64 exact, f32 " +
                       fmt("%.2g", worst32) + "), sequence files (" + fmt("%.2g", worst_seq) + ")";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

Outcome session_loop() {
  const fs::path dir = scratch_dir("session");
  fs::create_directories(dir / "models");
  {
    ModelConfig mc;
    mc.input_dim = 6;
    mc.hidden = 10;
    mc.mixtures = 2;
    Rng rng(3);
    save(Model::create(mc, rng), dir / "models" / "dancer.chrn");
  }
  SessionStore store(dir / "models", dir / "sessions");
  httplib::Server server;
  mount_session_api(server, store);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto post = [&](const std::string& path, const json& body) -> std::pair<int, json> {
    auto r = client.Post(path, body.dump(), "application/json");
    if (!r) return {0, json()};
    return {r->status, json::parse(r->body, nullptr, false)};
  };
  auto get_text = [&](const std::string& path) -> std::pair<int, std::string> {
    auto r = client.Get(path);
    if (!r) return {0, ""};
    return {r->status, r->body};
  };
  auto human = [](std::size_t frames, double base) {
    json f = json::array();
    for (std::size_t t = 0; t < frames; ++t) f.push_back(Vector(6, base + 0.02 * static_cast<double>(t)));
    return f;
  };

  auto [st_models, models] = post("/sessions", {{"model_id", "dancer"}});
  expect(st_models == 201, "create session status " + std::to_string(st_models));
  const std::string id = models.value("id", "");
  const std::string base = "/sessions/" + id;

  // A1
  auto [st1, doc1] = post(base + "/segments", {{"frames", human(12, 0.0)}, {"fps", 30.0}});
  expect(st1 == 200 && doc1["timeline"].size() == 1 && doc1["timeline"][0]["author"] == "human", "A1 rejected");

  std::vector<json> accepted;
  for (int round = 0; round < 2; ++round) {
    // B_i: three candidates, accept one.
    auto [stc, cands] = post(base + "/candidates",
                             {{"k", 3}, {"steps", 10}, {"policy", {{"mode", "unbiased"}, {"seed", 100 + round}}}});
    expect(stc == 200 && cands["candidates"].size() == 3, "candidate generation failed");
    expect(cands["session"]["pending"].size() == 3, "pending set not recorded");
    expect(cands["session"]["timeline"].size() == static_cast<std::size_t>(1 + 2 * round), "timeline changed by generate");
    const std::size_t pick = round == 0 ? 1 : 2;
    auto [sta, doc] = post(base + "/accept", {{"index", pick}});
    expect(sta == 200 && doc["pending"].empty(), "accept failed");
    expect(doc["timeline"].back()["author"] == "machine", "accepted segment not machine-authored");
    expect(doc["timeline"].back()["provenance"]["policy"]["seed"] == 100 + round + static_cast<int>(pick),
           "provenance seed not recorded");
    accepted.push_back(cands["candidates"][pick]["frames"]);
    auto [st_dup, dup] = post(base + "/accept", {{"index", 0}});
    expect(st_dup == 409 && dup.contains("code") && dup.contains("message"), "second accept not rejected");
    // A_{i+1}
    auto [sth, doch] = post(base + "/segments", {{"frames", human(8, 1.0 + round)}});
    expect(sth == 200 && doch["timeline"].size() == static_cast<std::size_t>(3 + 2 * round), "human segment rejected");
  }

  auto [st_bad, bad] = post(base + "/segments", {{"frames", json::array({json::array({1.0, 2.0, 3.0})})}});
  expect(st_bad >= 400 && st_bad < 500 && bad.contains("code"), "schema mismatch accepted");
  auto [st_nf, nf] = post("/sessions/unknown/accept", {{"index", 0}});
  expect(st_nf == 404, "unknown session status " + std::to_string(st_nf));

  auto [stf, full_text] = get_text(base + "/export?which=full");
  auto [sth, human_text] = get_text(base + "/export?which=human_only");
  auto [stm, machine_text] = get_text(base + "/export?which=machine_only");
  expect(stf == 200 && sth == 200 && stm == 200, "export failed");
  if (failures.empty()) {
    const auto full = parse_sequence_text(full_text);
    const auto hum = parse_sequence_text(human_text);
    const auto mac = parse_sequence_text(machine_text);
    expect(full.frames.size() == 12 + 10 + 8 + 10 + 8, "full export length " + std::to_string(full.frames.size()));
    expect(hum.frames.size() == 28, "human-only export length");
    expect(mac.frames.size() == 20, "machine-only export length");
    std::vector<Vector> machine_expected;
    for (const auto& a : accepted) {
      for (const auto& f : a) machine_expected.push_back(f.get<Vector>());
    }
    expect(mac.frames == machine_expected, "machine-only export differs from accepted candidates");
    expect(std::vector<Vector>(full.frames.begin() + 12, full.frames.begin() + 22) ==
               std::vector<Vector>(machine_expected.begin(), machine_expected.begin() + 10),
           "full export order wrong");
    expect(hum.frames.front() == Vector(6, 0.0), "human-only export order wrong");
  }

  // Reproduce every machine segment from its provenance alone.
  const Session s = store.get(id);
  std::size_t machine_segments = 0;
  for (std::size_t i = 0; i < s.timeline.size(); ++i) {
    if (s.timeline[i].author != Author::kMachine) continue;
    ++machine_segments;
    const auto& p = *s.timeline[i].provenance;
    const fs::path ckpt = dir / "models" / (p.model_id + ".chrn");
    const std::string raw = slurp(ckpt);
    expect(checksum_hex(std::vector<std::uint8_t>(raw.begin(), raw.end())) == p.model_checksum,
           "checkpoint checksum differs from provenance");
    const Model m = load(ckpt);
    const MotionSequence prefix = s.concatenated(i);
    expect(prefix.frames.size() == p.warmup_frames, "warm-up length mismatch");
    const auto regen = rollout(m, prefix, p.steps, p.policy);
    expect(regen.frames == s.timeline[i].frames.frames, "machine segment " + std::to_string(i) + " not reproducible");
  }
  expect(machine_segments == 2, "expected two machine segments");

  server.stop();
  thread.join();
  fs::remove_all(dir);
  std::string detail = "seed, 2 x (3 candidates, accept, repeat-accept 409, human segment), export full/human/machine, " +
                       std::to_string(machine_segments) + " machine segments regenerated from provenance";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "parameter count", parameter_count},
      {2, "mixture gradient vs finite differences", mdn_gradient},
      {3, "end-to-end gradient vs finite differences", end_to_end_gradient},
      {4, "alpha-logit gradients sum to zero", alpha_gradient_sum},
      {5, "overfit convergence", overfit},
      {6, "stagnation contrast (mse vs mixture head)", stagnation_contrast},
      {7, "sampling statistics", sampling_statistics},
      {8, "determinism and round trips", determinism_and_round_trips},
      {9, "session service loop over HTTP", session_loop},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d: %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
