#ifndef CHORRNN_ANIM_HPP
#define CHORRNN_ANIM_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "json.hpp"

#include "chorrnn/mocap.hpp"

namespace chorrnn {

// Bone edges for a joint list: the Kinect skeleton when the names match it,
// otherwise none.
std::vector<std::pair<std::size_t, std::size_t>> bones_for(const std::vector<std::string>& joint_names);

// {fps, joint_names, frames: [[...]], bones: [[parent, child]...],
//  trajectories: [{joint, name, points: [[x, y, z]...]}]}
nlohmann::json animation_json(const MotionSequence& seq);

}  // namespace chorrnn

#endif  // CHORRNN_ANIM_HPP
