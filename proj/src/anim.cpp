#include "chorrnn/anim.hpp"

#include <algorithm>

namespace chorrnn {

std::vector<std::pair<std::size_t, std::size_t>> bones_for(const std::vector<std::string>& joint_names) {
  if (joint_names.size() == kKinectJoints.size() &&
      std::equal(joint_names.begin(), joint_names.end(), kKinectJoints.begin())) {
    return {kKinectBones.begin(), kKinectBones.end()};
  }
  return {};
}

nlohmann::json animation_json(const MotionSequence& seq) {
  seq.validate();
  nlohmann::json j;
  j["fps"] = seq.fps;
  j["joint_names"] = seq.joint_names;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : seq.frames) frames.push_back(f);
  j["frames"] = std::move(frames);
  nlohmann::json bones = nlohmann::json::array();
  for (const auto& [a, b] : bones_for(seq.joint_names)) bones.push_back({a, b});
  j["bones"] = std::move(bones);
  nlohmann::json traj = nlohmann::json::array();
  for (std::size_t joint = 0; joint < seq.joints(); ++joint) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& f : seq.frames) points.push_back({f[3 * joint], f[3 * joint + 1], f[3 * joint + 2]});
    traj.push_back({{"joint", joint}, {"name", seq.joint_names[joint]}, {"points", std::move(points)}});
  }
  j["trajectories"] = std::move(traj);
  return j;
}

}  // namespace chorrnn
