#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "chorrnn/errors.hpp"
#include "chorrnn/mocap.hpp"

using namespace chorrnn;

namespace {

MotionSequence random_sequence(std::size_t frames, std::size_t joints, Rng& rng) {
  MotionSequence s;
  s.fps = 30.0;
  s.joint_names = generic_joint_names(joints);
  for (std::size_t t = 0; t < frames; ++t) {
    Vector f(3 * joints);
    for (double& v : f) v = rng.uniform(-2.0, 2.0);
    s.frames.push_back(f);
  }
  return s;
}

std::string error_of(const std::string& text) {
  try {
    parse_sequence_text(text, "input.seq");
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("kinect skeleton tables") {
  CHECK(kKinectJoints.front() == "spine-base");
  CHECK(kKinectJoints.back() == "thumb-right");
  for (const auto& [a, b] : kKinectBones) {
    CHECK(a < 25);
    CHECK(b < 25);
    CHECK(a != b);
  }
}

TEST_CASE("minimal file parses") {
  const auto s = parse_sequence_text(
      "chorseq 1\n"
      "# comment\n"
      "fps 25\n"
      "joints a b\n"
      "data\n"
      "1 2 3 4 5 6\n"
      "\n"
      "-1 -2 -3 -4 -5 -6.5e-1\n");
  CHECK(s.fps == 25.0);
  CHECK(s.joint_names == std::vector<std::string>{"a", "b"});
  REQUIRE(s.frames.size() == 2);
  CHECK(s.frames[0].size() == 6);
  CHECK(s.frames[1][5] == -0.65);
}

TEST_CASE("parse errors carry locations") {
  const std::string header = "chorseq 1\nfps 30\njoints a b\ndata\n";
  SUBCASE("short frame names the expected width") {
    const auto msg = error_of(header + "1 2 3 4 5 6\n1 2 3 4 5\n");
    CHECK(msg.find("input.seq:6") != std::string::npos);
    CHECK(msg.find("6") != std::string::npos);
  }
  SUBCASE("25 joints, 74 values") {
    std::string text = "chorseq 1\nfps 30\njoints";
    for (const auto& j : kKinectJoints) text += " " + j;
    text += "\ndata\n";
    for (int k = 0; k < 74; ++k) text += "0 ";
    const auto msg = error_of(text + "\n");
    CHECK(msg.find("75") != std::string::npos);
    CHECK(msg.find(":5") != std::string::npos);
  }
  SUBCASE("non-finite value") {
    CHECK(error_of(header + "1 2 nan 4 5 6\n").find("input.seq:5") != std::string::npos);
    CHECK_FALSE(error_of(header + "1 2 inf 4 5 6\n").empty());
  }
  SUBCASE("garbage token") {
    CHECK(error_of(header + "1 2 x 4 5 6\n").find("input.seq:5") != std::string::npos);
  }
  SUBCASE("bad magic or version") {
    CHECK(error_of("chorseq 2\nfps 30\njoints a\ndata\n").find("input.seq:1") != std::string::npos);
    CHECK_FALSE(error_of("hello\n").empty());
  }
  SUBCASE("non-positive fps") {
    CHECK_FALSE(error_of("chorseq 1\nfps 0\njoints a\ndata\n").empty());
  }
  SUBCASE("missing data section") {
    CHECK_FALSE(error_of("chorseq 1\nfps 30\njoints a\n").empty());
  }
}

TEST_CASE("text round trip is exact") {
  Rng rng(1);
  const auto s = random_sequence(100, 4, rng);
  const auto back = parse_sequence_text(sequence_to_text(s));
  CHECK(back == s);
}

TEST_CASE("file round trip and corpus order") {
  Rng rng(2);
  const auto dir = std::filesystem::temp_directory_path() / "chorrnn_test_corpus";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto a = random_sequence(5, 2, rng), b = random_sequence(7, 2, rng);
  write_sequence(b, dir / "b.seq");
  write_sequence(a, dir / "a.seq");
  std::ofstream(dir / "notes.txt") << "ignored\n";
  CHECK(read_sequence(dir / "a.seq") == a);
  const auto corpus = read_corpus(dir);
  REQUIRE(corpus.size() == 2);
  CHECK(corpus[0] == a);
  CHECK(corpus[1] == b);
  std::filesystem::remove_all(dir);
}

TEST_CASE("normalization") {
  Rng rng(3);
  const auto s = random_sequence(50, 3, rng);
  SUBCASE("center-root puts the frame-0 root at the origin") {
    const auto [n, t] = normalize(s, NormScheme::kCenterRoot);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(n.frames[0][k]) < 1e-15);
    const auto back = denormalize(n, t);
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      for (std::size_t k = 0; k < s.width(); ++k) CHECK(std::abs(back.frames[f][k] - s.frames[f][k]) < 1e-12);
    }
  }
  SUBCASE("zscore gives zero mean and unit variance per coordinate") {
    const auto [n, t] = normalize(s, NormScheme::kZScore);
    for (std::size_t k = 0; k < s.width(); ++k) {
      double mean = 0.0, sq = 0.0;
      for (const auto& f : n.frames) mean += f[k];
      mean /= static_cast<double>(n.frames.size());
      for (const auto& f : n.frames) sq += (f[k] - mean) * (f[k] - mean);
      CHECK(std::abs(mean) < 1e-12);
      CHECK(sq / static_cast<double>(n.frames.size()) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto back = denormalize(n, t);
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
      for (std::size_t k = 0; k < s.width(); ++k) CHECK(std::abs(back.frames[f][k] - s.frames[f][k]) < 1e-12);
    }
  }
  SUBCASE("zscore rejects a constant coordinate") {
    auto c = s;
    for (auto& f : c.frames) f[1] = 0.5;
    CHECK_THROWS_AS(normalize(c, NormScheme::kZScore), DataError);
  }
  SUBCASE("none is the identity") {
    CHECK(normalize(s, NormScheme::kNone).first == s);
  }
  SUBCASE("scheme names") {
    CHECK(parse_norm_scheme("center-root") == NormScheme::kCenterRoot);
    CHECK(to_string(NormScheme::kZScore) == "zscore");
    CHECK_THROWS(parse_norm_scheme("minmax"));
  }
}

TEST_CASE("synthetic lissajous") {
  LissajousParams p;
  p.sequences = 2;
  p.frames = 30;
  p.joints = 4;
  const auto a = synth_lissajous(p);
  CHECK(a == synth_lissajous(p));
  REQUIRE(a.size() == 2);
  CHECK(a[0].frames.size() == 30);
  CHECK(a[0].width() == 12);
  for (const auto& f : a[0].frames) {
    for (double v : f) CHECK(std::isfinite(v));
  }
  p.amplitude = 0.0;
  const auto flat = synth_lissajous(p);
  for (const auto& f : flat[0].frames) CHECK(f == flat[0].frames[0]);
}

TEST_CASE("synthetic branching") {
  BranchingParams p;
  p.sequences = 10000;
  Rng a(4), b(4);
  const auto corpus = synth_branching(p, a);
  CHECK(corpus == synth_branching(p, b));
  std::size_t left = 0;
  for (const auto& s : corpus) {
    if (branch_direction(s) < 0) ++left;
    // Everything before the branch is shared.
    for (std::size_t t = 0; t <= p.branch_at; ++t) CHECK(s.frames[t] == corpus[0].frames[t]);
  }
  CHECK(std::abs(static_cast<double>(left) / p.sequences - 0.5) < 0.02);
  CHECK_THROWS(parse_synth_kind("spiral"));
}
