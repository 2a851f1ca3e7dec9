#ifndef CHORRNN_MOCAP_HPP
#define CHORRNN_MOCAP_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "chorrnn/math.hpp"

namespace chorrnn {

// Kinect v2 body joint names, in SDK enumeration order.
extern const std::array<std::string, 25> kKinectJoints;

// Parent-child pairs (indices into kKinectJoints) forming the stick figure.
extern const std::array<std::pair<std::size_t, std::size_t>, 24> kKinectBones;

std::vector<std::string> kinect_joint_names();

// A motion-capture take. Each frame holds 3 coordinates per joint, joint
// major (x0 y0 z0 x1 y1 z1 ...), in meters.
struct MotionSequence {
  double fps = 30.0;
  std::vector<std::string> joint_names;
  std::vector<Vector> frames;

  std::size_t joints() const { return joint_names.size(); }
  std::size_t width() const { return 3 * joint_names.size(); }
  std::size_t length() const { return frames.size(); }

  // Throws DataError on ragged frames, non-finite values or fps <= 0.
  void validate() const;

  bool operator==(const MotionSequence&) const = default;
};

// Joint names "j0", "j1", ... for synthetic data of arbitrary size.
std::vector<std::string> generic_joint_names(std::size_t joints);

// Sequence text format:
//
//   chorseq 1
//   fps <number>
//   joints <name> <name> ...
//   data
//   <3 * joints numbers per line, one frame per line>
//
// Lines starting with '#' and blank lines are ignored anywhere. Numbers are
// written in shortest round-trip decimal form.
MotionSequence parse_sequence(std::istream& in, const std::string& source = "<stream>");
MotionSequence parse_sequence_text(const std::string& text, const std::string& source = "<text>");
void write_sequence(const MotionSequence& seq, std::ostream& out);
std::string sequence_to_text(const MotionSequence& seq);

MotionSequence read_sequence(const std::filesystem::path& path);
void write_sequence(const MotionSequence& seq, const std::filesystem::path& path);

// All files with the .seq extension in a directory, in lexicographic order.
std::vector<MotionSequence> read_corpus(const std::filesystem::path& dir);

enum class NormScheme { kNone, kCenterRoot, kZScore };

NormScheme parse_norm_scheme(const std::string& name);
std::string to_string(NormScheme scheme);

// x' = (x - offset) / scale, coordinate-wise.
struct NormTransform {
  NormScheme scheme = NormScheme::kNone;
  Vector offset;
  Vector scale;

  Vector apply(std::span<const double> frame) const;
  Vector invert(std::span<const double> frame) const;
};

// center-root: subtract the first joint's frame-0 position from every joint.
// zscore: per-coordinate mean and standard deviation over all frames; a
// coordinate with zero variance is an error.
std::pair<MotionSequence, NormTransform> normalize(const MotionSequence& seq, NormScheme scheme);
MotionSequence denormalize(const MotionSequence& seq, const NormTransform& transform);

enum class SynthKind { kLissajous, kBranching };

SynthKind parse_synth_kind(const std::string& name);

struct LissajousParams {
  std::size_t sequences = 1;
  std::size_t frames = 200;
  std::size_t joints = 25;
  double fps = 30.0;
  double amplitude = 0.5;
  // Angular frequencies per axis in radians per frame.
  double freq_x = 0.10;
  double freq_y = 0.15;
  double freq_z = 0.05;
};

// Joint j follows (A sin(wx t + phi_j), A sin(wy t + 2 phi_j), A sin(wz t + 3 phi_j))
// around a per-joint anchor, with phi_j = 2 pi j / joints. Sequence s starts at
// t = s * frames. No randomness is used.
std::vector<MotionSequence> synth_lissajous(const LissajousParams& params);

struct BranchingParams {
  std::size_t sequences = 64;
  std::size_t frames = 40;
  std::size_t joints = 2;
  std::size_t branch_at = 20;
  double fps = 30.0;
  double step = 0.1;
};

// Every joint rests at its anchor while a countdown coordinate (z of joint 0)
// climbs from 0 to 1 over the first `branch_at` frames. From frame
// `branch_at + 1` on, every joint walks along y by +step or -step per frame,
// the direction drawn once per sequence with probability 1/2.
std::vector<MotionSequence> synth_branching(const BranchingParams& params, Rng& rng);

// Direction (+1 or -1) a branching sequence took, read from its last frame.
int branch_direction(const MotionSequence& seq);

}  // namespace chorrnn

#endif  // CHORRNN_MOCAP_HPP
