#include "chorrnn/mocap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "chorrnn/errors.hpp"

namespace chorrnn {

const std::array<std::string, 25> kKinectJoints = {
    "spine-base",     "spine-mid",   "neck",           "head",        "shoulder-left",
    "elbow-left",     "wrist-left",  "hand-left",      "shoulder-right", "elbow-right",
    "wrist-right",    "hand-right",  "hip-left",       "knee-left",   "ankle-left",
    "foot-left",      "hip-right",   "knee-right",     "ankle-right", "foot-right",
    "spine-shoulder", "hand-tip-left", "thumb-left",   "hand-tip-right", "thumb-right",
};

const std::array<std::pair<std::size_t, std::size_t>, 24> kKinectBones = {{
    {0, 1},   {1, 20},  {20, 2},  {2, 3},                           // spine and head
    {20, 4},  {4, 5},   {5, 6},   {6, 7},   {7, 21}, {6, 22},       // left arm
    {20, 8},  {8, 9},   {9, 10},  {10, 11}, {11, 23}, {10, 24},     // right arm
    {0, 12},  {12, 13}, {13, 14}, {14, 15},                         // left leg
    {0, 16},  {16, 17}, {17, 18}, {18, 19},                         // right leg
}};

std::vector<std::string> kinect_joint_names() {
  return {kKinectJoints.begin(), kKinectJoints.end()};
}

std::vector<std::string> generic_joint_names(std::size_t joints) {
  std::vector<std::string> names;
  names.reserve(joints);
  for (std::size_t j = 0; j < joints; ++j) names.push_back("j" + std::to_string(j));
  return names;
}

void MotionSequence::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw DataError("sequence fps must be positive");
  if (joint_names.empty()) throw DataError("sequence has no joints");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != width()) {
      throw DataError("frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
                      " values, expected " + std::to_string(width()));
    }
    for (double v : frames[t]) {
      if (!std::isfinite(v)) throw DataError("frame " + std::to_string(t) + " has a non-finite value");
    }
  }
}

// ---------------------------------------------------------------------------
// Text format

namespace {

constexpr const char* kFormatTag = "chorseq";
constexpr int kFormatVersion = 1;

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw DataError(source + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

MotionSequence parse_sequence(std::istream& in, const std::string& source) {
  MotionSequence seq;
  enum class Stage { kTag, kFps, kJoints, kData, kFrames } stage = Stage::kTag;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    switch (stage) {
      case Stage::kTag:
        if (toks.size() != 2 || toks[0] != kFormatTag) {
          parse_fail(source, lineno, "expected header 'chorseq 1'");
        }
        if (toks[1] != std::to_string(kFormatVersion)) {
          parse_fail(source, lineno, "unsupported format version '" + toks[1] + "'");
        }
        stage = Stage::kFps;
        break;
      case Stage::kFps:
        if (toks.size() != 2 || toks[0] != "fps" || !parse_double(toks[1], seq.fps) ||
            !(seq.fps > 0.0) || !std::isfinite(seq.fps)) {
          parse_fail(source, lineno, "expected 'fps <positive number>'");
        }
        stage = Stage::kJoints;
        break;
      case Stage::kJoints:
        if (toks.size() < 2 || toks[0] != "joints") {
          parse_fail(source, lineno, "expected 'joints <name> ...'");
        }
        seq.joint_names.assign(toks.begin() + 1, toks.end());
        stage = Stage::kData;
        break;
      case Stage::kData:
        if (toks.size() != 1 || toks[0] != "data") parse_fail(source, lineno, "expected 'data'");
        stage = Stage::kFrames;
        break;
      case Stage::kFrames: {
        if (toks.size() != seq.width()) {
          parse_fail(source, lineno,
                     "frame has " + std::to_string(toks.size()) + " values, expected " +
                         std::to_string(seq.width()) + " (" + std::to_string(seq.joints()) +
                         " joints x 3)");
        }
        Vector frame(toks.size());
        for (std::size_t k = 0; k < toks.size(); ++k) {
          if (!parse_double(toks[k], frame[k])) {
            parse_fail(source, lineno, "value " + std::to_string(k + 1) + " '" + toks[k] +
                                           "' is not a number");
          }
          if (!std::isfinite(frame[k])) {
            parse_fail(source, lineno, "value " + std::to_string(k + 1) + " is not finite");
          }
        }
        seq.frames.push_back(std::move(frame));
        break;
      }
    }
  }
  if (stage != Stage::kFrames) parse_fail(source, lineno, "incomplete header");
  return seq;
}

MotionSequence parse_sequence_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_sequence(in, source);
}

void write_sequence(const MotionSequence& seq, std::ostream& out) {
  out << sequence_to_text(seq);
}

std::string sequence_to_text(const MotionSequence& seq) {
  seq.validate();
  std::string out = std::string(kFormatTag) + " " + std::to_string(kFormatVersion) + "\nfps ";
  append_double(out, seq.fps);
  out += "\njoints";
  for (const auto& name : seq.joint_names) {
    if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("joint name '" + name + "' is empty or contains whitespace");
    }
    out += ' ';
    out += name;
  }
  out += "\ndata\n";
  for (const auto& frame : seq.frames) {
    for (std::size_t k = 0; k < frame.size(); ++k) {
      if (k) out += ' ';
      append_double(out, frame[k]);
    }
    out += '\n';
  }
  return out;
}

MotionSequence read_sequence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sequence file " + path.string());
  return parse_sequence(in, path.string());
}

void write_sequence(const MotionSequence& seq, const std::filesystem::path& path) {
  const std::string text = sequence_to_text(seq);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<MotionSequence> read_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("data directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".seq") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<MotionSequence> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_sequence(f));
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

NormScheme parse_norm_scheme(const std::string& name) {
  if (name == "none") return NormScheme::kNone;
  if (name == "center-root") return NormScheme::kCenterRoot;
  if (name == "zscore") return NormScheme::kZScore;
  throw std::invalid_argument("unknown normalization scheme '" + name +
                              "' (expected none, center-root or zscore)");
}

std::string to_string(NormScheme scheme) {
  switch (scheme) {
    case NormScheme::kCenterRoot: return "center-root";
    case NormScheme::kZScore: return "zscore";
    default: return "none";
  }
}

Vector NormTransform::apply(std::span<const double> frame) const {
  if (frame.size() != offset.size()) throw ShapeError("normalize: frame width mismatch");
  Vector out(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) out[k] = (frame[k] - offset[k]) / scale[k];
  return out;
}

Vector NormTransform::invert(std::span<const double> frame) const {
  if (frame.size() != offset.size()) throw ShapeError("denormalize: frame width mismatch");
  Vector out(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) out[k] = frame[k] * scale[k] + offset[k];
  return out;
}

std::pair<MotionSequence, NormTransform> normalize(const MotionSequence& seq, NormScheme scheme) {
  if (seq.frames.empty()) throw DataError("cannot normalize an empty sequence");
  seq.validate();
  const std::size_t w = seq.width();
  NormTransform tr;
  tr.scheme = scheme;
  tr.offset.assign(w, 0.0);
  tr.scale.assign(w, 1.0);
  switch (scheme) {
    case NormScheme::kNone:
      break;
    case NormScheme::kCenterRoot:
      for (std::size_t k = 0; k < w; ++k) tr.offset[k] = seq.frames[0][k % 3];
      break;
    case NormScheme::kZScore: {
      const double n = static_cast<double>(seq.frames.size());
      for (const auto& f : seq.frames) {
        for (std::size_t k = 0; k < w; ++k) tr.offset[k] += f[k];
      }
      for (double& v : tr.offset) v /= n;
      Vector var(w, 0.0);
      for (const auto& f : seq.frames) {
        for (std::size_t k = 0; k < w; ++k) var[k] += (f[k] - tr.offset[k]) * (f[k] - tr.offset[k]);
      }
      for (std::size_t k = 0; k < w; ++k) {
        if (!(var[k] > 0.0)) {
          throw DataError("zscore: coordinate " + std::to_string(k) + " (joint " +
                          seq.joint_names[k / 3] + ") has zero variance");
        }
        tr.scale[k] = std::sqrt(var[k] / n);
      }
      break;
    }
  }
  MotionSequence out = seq;
  for (auto& f : out.frames) f = tr.apply(f);
  return {std::move(out), std::move(tr)};
}

MotionSequence denormalize(const MotionSequence& seq, const NormTransform& transform) {
  MotionSequence out = seq;
  for (auto& f : out.frames) f = transform.invert(f);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "lissajous") return SynthKind::kLissajous;
  if (name == "branching") return SynthKind::kBranching;
  throw std::invalid_argument("unknown corpus kind '" + name +
                              "' (expected lissajous or branching)");
}

std::vector<MotionSequence> synth_lissajous(const LissajousParams& params) {
  const auto names = params.joints == kKinectJoints.size() ? kinect_joint_names()
                                                           : generic_joint_names(params.joints);
  std::vector<MotionSequence> out;
  out.reserve(params.sequences);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t s = 0; s < params.sequences; ++s) {
    MotionSequence seq;
    seq.fps = params.fps;
    seq.joint_names = names;
    seq.frames.reserve(params.frames);
    for (std::size_t f = 0; f < params.frames; ++f) {
      const double t = static_cast<double>(s * params.frames + f);
      Vector frame(3 * params.joints);
      for (std::size_t j = 0; j < params.joints; ++j) {
        const double phi = two_pi * static_cast<double>(j) / static_cast<double>(params.joints);
        const double anchor_y = 0.05 * static_cast<double>(j);
        frame[3 * j + 0] = params.amplitude * std::sin(params.freq_x * t + phi);
        frame[3 * j + 1] = anchor_y + params.amplitude * std::sin(params.freq_y * t + 2.0 * phi);
        frame[3 * j + 2] = params.amplitude * std::sin(params.freq_z * t + 3.0 * phi);
      }
      seq.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<MotionSequence> synth_branching(const BranchingParams& params, Rng& rng) {
  if (params.branch_at == 0 || params.branch_at + 1 >= params.frames) {
    throw std::invalid_argument("branching: need 0 < branch_at < frames - 1");
  }
  if (params.joints == 0) throw std::invalid_argument("branching: need at least one joint");
  const auto names = generic_joint_names(params.joints);
  std::vector<MotionSequence> out;
  out.reserve(params.sequences);
  const double b = static_cast<double>(params.branch_at);
  for (std::size_t s = 0; s < params.sequences; ++s) {
    const double dir = rng.uniform() < 0.5 ? 1.0 : -1.0;
    MotionSequence seq;
    seq.fps = params.fps;
    seq.joint_names = names;
    seq.frames.reserve(params.frames);
    for (std::size_t f = 0; f < params.frames; ++f) {
      const double t = static_cast<double>(f);
      const double walked = dir * params.step * std::max(0.0, t - b);
      Vector frame(3 * params.joints, 0.0);
      for (std::size_t j = 0; j < params.joints; ++j) {
        frame[3 * j + 0] = 0.3 * static_cast<double>(j);
        frame[3 * j + 1] = walked;
      }
      frame[2] = std::min(t, b) / b;
      seq.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

int branch_direction(const MotionSequence& seq) {
  if (seq.frames.empty() || seq.width() < 3) throw DataError("branch_direction: empty sequence");
  return seq.frames.back()[1] >= 0.0 ? 1 : -1;
}

}  // namespace chorrnn
