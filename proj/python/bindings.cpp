#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chorrnn/anim.hpp"
#include "chorrnn/cli.hpp"
#include "chorrnn/errors.hpp"
#include "chorrnn/experiments.hpp"
#include "chorrnn/session.hpp"

#include <sstream>

namespace py = pybind11;
using namespace chorrnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vector> rows_of(const Array& a, const char* what) {
  if (a.ndim() != 2) throw ShapeError(std::string(what) + " must be a 2-D array");
  const auto r = a.unchecked<2>();
  std::vector<Vector> out(static_cast<std::size_t>(r.shape(0)), Vector(static_cast<std::size_t>(r.shape(1))));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    for (py::ssize_t j = 0; j < r.shape(1); ++j) out[i][j] = r(i, j);
  }
  return out;
}

Vector vec_of(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return Vector(a.data(), a.data() + a.size());
}

Array to_array(const std::vector<Vector>& rows) {
  const std::size_t w = rows.empty() ? 0 : rows.front().size();
  Array out({rows.size(), w});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < w; ++j) m(i, j) = rows[i][j];
  }
  return out;
}

Array to_array(const Vector& v) {
  Array out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

MotionSequence make_sequence(const Array& frames, double fps, std::optional<std::vector<std::string>> names) {
  MotionSequence s;
  s.fps = fps;
  s.frames = rows_of(frames, "frames");
  const std::size_t w = s.frames.empty() ? 0 : s.frames.front().size();
  if (names) {
    s.joint_names = *names;
  } else {
    if (w % 3 != 0) throw ShapeError("frame width must be a multiple of 3");
    s.joint_names = w == 75 ? kinect_joint_names() : generic_joint_names(w / 3);
  }
  s.validate();
  return s;
}

}  // namespace

PYBIND11_MODULE(_chorrnn, m) {
  m.doc() = "Mixture-density LSTM for motion-capture sequences";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<SessionError>(m, "SessionError", PyExc_RuntimeError);

  m.def("param_count",
        [](std::size_t input_dim, std::size_t layers, std::size_t hidden) {
          return param_count({input_dim, layers, hidden});
        },
        py::arg("input_dim"), py::arg("layers"), py::arg("hidden"),
        "Trainable parameters of the LSTM stack alone.");

  // -- sequences ------------------------------------------------------------
  py::class_<MotionSequence>(m, "MotionSequence")
      .def(py::init(&make_sequence), py::arg("frames"), py::arg("fps") = 30.0,
           py::arg("joint_names") = std::nullopt)
      .def_readwrite("fps", &MotionSequence::fps)
      .def_readwrite("joint_names", &MotionSequence::joint_names)
      .def_property_readonly("frames", [](const MotionSequence& s) { return to_array(s.frames); })
      .def("__len__", &MotionSequence::length)
      .def("__eq__", [](const MotionSequence& a, const MotionSequence& b) { return a == b; })
      .def("to_text", &sequence_to_text)
      .def_static("from_text", [](const std::string& t) { return parse_sequence_text(t); });

  m.def("read_sequence", [](const std::filesystem::path& p) { return read_sequence(p); });
  m.def("write_sequence", [](const MotionSequence& s, const std::filesystem::path& p) { write_sequence(s, p); });
  m.def("read_corpus", &read_corpus);
  m.def("synth_lissajous",
        [](std::size_t sequences, std::size_t frames, std::size_t joints, double amplitude) {
          LissajousParams p;
          p.sequences = sequences;
          p.frames = frames;
          p.joints = joints;
          p.amplitude = amplitude;
          return synth_lissajous(p);
        },
        py::arg("sequences") = 1, py::arg("frames") = 200, py::arg("joints") = 25, py::arg("amplitude") = 0.5);
  m.def("synth_branching",
        [](std::size_t sequences, std::uint64_t seed, std::size_t frames, std::size_t branch_at) {
          BranchingParams p;
          p.sequences = sequences;
          p.frames = frames;
          p.branch_at = branch_at;
          Rng rng(seed);
          return synth_branching(p, rng);
        },
        py::arg("sequences") = 64, py::arg("seed") = 1, py::arg("frames") = 40, py::arg("branch_at") = 20);
  m.def("branch_direction", &branch_direction);
  m.def("animation_json", [](const MotionSequence& s) { return animation_json(s).dump(); });

  // -- mixture head ---------------------------------------------------------
  py::module_ mdn_mod = m.def_submodule("mdn", "Gaussian mixture output layer");
  py::class_<mdn::MixtureParams>(mdn_mod, "MixtureParams")
      .def_readonly("m", &mdn::MixtureParams::m)
      .def_readonly("c", &mdn::MixtureParams::c)
      .def_property_readonly("alpha", [](const mdn::MixtureParams& p) { return to_array(p.alpha); })
      .def_property_readonly("sigma", [](const mdn::MixtureParams& p) { return to_array(p.sigma); })
      .def_property_readonly("mu", [](const mdn::MixtureParams& p) {
        std::vector<Vector> rows;
        for (std::size_t i = 0; i < p.m; ++i) rows.emplace_back(p.mu.row(i).begin(), p.mu.row(i).end());
        return to_array(rows);
      });
  mdn_mod.def("split_z", [](const Array& z, std::size_t m, std::size_t c) { return mdn::split_z(vec_of(z), m, c); },
              py::arg("z"), py::arg("m"), py::arg("c"));
  mdn_mod.def("nll", [](const mdn::MixtureParams& p, const Array& t) { return mdn::nll(p, vec_of(t)); });
  mdn_mod.def("nll_grad_z",
              [](const mdn::MixtureParams& p, const Array& t) { return to_array(mdn::nll_grad_z(p, vec_of(t))); });
  mdn_mod.def("sample", [](const mdn::MixtureParams& p, std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<Vector> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back(mdn::sample(p, rng));
    return to_array(out);
  }, py::arg("params"), py::arg("seed"), py::arg("n") = 1);
  mdn_mod.def("bias_params", &mdn::bias_params);
  mdn_mod.def("greedy_mean", [](const mdn::MixtureParams& p) { return to_array(mdn::greedy_mean(p)); });

  // -- model ----------------------------------------------------------------
  py::class_<Model>(m, "Model")
      .def_static("create",
                  [](std::size_t input_dim, std::size_t layers, std::size_t hidden, const std::string& head,
                     std::size_t mixtures, std::uint64_t seed) {
                    ModelConfig cfg;
                    cfg.input_dim = input_dim;
                    cfg.layers = layers;
                    cfg.hidden = hidden;
                    cfg.head = parse_head(head);
                    cfg.mixtures = mixtures;
                    Rng rng(seed);
                    return Model::create(cfg, rng);
                  },
                  py::arg("input_dim"), py::arg("layers") = 2, py::arg("hidden") = 64, py::arg("head") = "mdn",
                  py::arg("mixtures") = 8, py::arg("seed") = 1)
      .def_static("load", [](const std::filesystem::path& p) { return load(p); })
      .def("save",
           [](Model& self, const std::filesystem::path& p, const std::string& storage) {
             self.config.storage = storage == "f32" ? StorageType::kF32 : StorageType::kF64;
             save(self, p);
           },
           py::arg("path"), py::arg("storage") = "f64")
      .def_property_readonly("input_dim", [](const Model& s) { return s.config.input_dim; })
      .def_property_readonly("layers", [](const Model& s) { return s.config.layers; })
      .def_property_readonly("hidden", [](const Model& s) { return s.config.hidden; })
      .def_property_readonly("mixtures", [](const Model& s) { return s.config.mixtures; })
      .def_property_readonly("head", [](const Model& s) { return to_string(s.config.head); })
      .def_property_readonly("steps", [](const Model& s) { return s.meta.steps; })
      .def("param_count", &Model::param_count)
      .def("forward",
           [](const Model& self, const Array& xs) {
             return to_array(forward_seq(self, rows_of(xs, "xs"), zero_state(self.config.stack())).outputs);
           },
           "Raw head outputs for a sequence of inputs, starting from a zero state.")
      .def("loss",
           [](const Model& self, const Array& xs, const Array& targets) {
             return loss(self, rows_of(xs, "xs"), rows_of(targets, "targets"), zero_state(self.config.stack()));
           })
      .def("mixture", [](const Model& self, const Array& z) { return self.mixture(vec_of(z)); });

  m.def("train",
        [](Model& model, const std::vector<MotionSequence>& corpus, double lr, std::size_t batch, std::size_t chunk,
           std::size_t epochs, std::size_t max_steps, std::uint64_t seed, bool stateful) {
          TrainConfig tc;
          tc.learning_rate = lr;
          tc.batch = batch;
          tc.chunk = chunk;
          tc.epochs = epochs;
          tc.max_steps = max_steps;
          tc.seed = seed;
          tc.stateful = stateful;
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(model, corpus, tc);
          }
          std::vector<double> losses;
          for (const auto& s : r.metrics) losses.push_back(s.loss);
          if (r.diverged) throw NumericalError("training diverged; weights rolled back to the last good step");
          return losses;
        },
        py::arg("model"), py::arg("corpus"), py::arg("lr") = 1e-3, py::arg("batch") = 16, py::arg("chunk") = 64,
        py::arg("epochs") = 10, py::arg("max_steps") = 0, py::arg("seed") = 1, py::arg("stateful") = false,
        "Train in place with RMSProp. Returns the per-step loss curve.");

  m.def("rollout",
        [](const Model& model, const MotionSequence& seed_frames, std::size_t steps, const std::string& policy,
           std::uint64_t rng_seed) { return rollout(model, seed_frames, steps, parse_policy(policy, rng_seed)); },
        py::arg("model"), py::arg("seed_frames"), py::arg("steps"), py::arg("policy") = "unbiased",
        py::arg("rng_seed") = 0);
  m.def("naive_extrapolate", &naive_extrapolate);
  m.def("variance_profile",
        [](const MotionSequence& s, std::size_t window) { return variance_profile(s, window); });

  // -- experiments ----------------------------------------------------------
  m.def("gradcheck",
        [](std::size_t trials, std::uint64_t seed) { return gradcheck_models(trials, seed).max_rel_error; },
        py::arg("trials") = 10, py::arg("seed") = 1,
        "Largest relative error between analytic and finite-difference gradients.");
  m.def("compare_heads",
        [](const std::vector<MotionSequence>& corpus, std::size_t steps, std::size_t rollouts) {
          CompareHeadsConfig cfg;
          cfg.train.max_steps = steps;
          cfg.rollouts = rollouts;
          py::gil_scoped_release release;
          return compare_heads(corpus, cfg, {}).to_json();
        },
        py::arg("corpus"), py::arg("steps") = 1500, py::arg("rollouts") = 100,
        "Runs the mse-versus-mixture comparison and returns the JSON report.");

  // -- session store --------------------------------------------------------
  py::class_<SessionStore>(m, "SessionStore")
      .def(py::init<std::filesystem::path, std::filesystem::path, std::size_t>(), py::arg("models_dir"),
           py::arg("sessions_dir"), py::arg("max_frames") = 100000)
      .def("list_models", [](const SessionStore& s) {
        std::vector<std::string> ids;
        for (const auto& m : s.list_models()) ids.push_back(m.id);
        return ids;
      })
      .def("create_session", [](SessionStore& s, const std::string& model) { return s.create_session(model).id; })
      .def("get", [](const SessionStore& s, const std::string& id) { return session_to_json(s.get(id)).dump(); })
      .def("add_human_segment",
           [](SessionStore& s, const std::string& id, const MotionSequence& seq) {
             return session_to_json(s.add_human_segment(id, seq)).dump();
           })
      .def("generate_candidates",
           [](SessionStore& s, const std::string& id, std::size_t k, std::size_t steps, const std::string& policy,
              std::uint64_t seed) {
             std::vector<MotionSequence> out;
             for (auto& c : s.generate_candidates(id, k, steps, parse_policy(policy, seed))) out.push_back(c.frames);
             return out;
           },
           py::arg("id"), py::arg("k"), py::arg("steps"), py::arg("policy") = "unbiased", py::arg("seed") = 0)
      .def("accept_candidate",
           [](SessionStore& s, const std::string& id, std::size_t index) {
             return session_to_json(s.accept_candidate(id, index)).dump();
           })
      .def("export_timeline",
           [](const SessionStore& s, const std::string& id, const std::string& which) {
             return s.export_timeline(id, parse_export_selection(which));
           },
           py::arg("id"), py::arg("which") = "full")
      .def("reproduce", &SessionStore::reproduce);

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "chorrnn");
          std::vector<const char*> argv;
          for (const auto& a : args) argv.push_back(a.c_str());
          std::ostringstream out, err;
          const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        "Run the command-line tool in-process. Returns (exit_code, stdout, stderr).");
}
