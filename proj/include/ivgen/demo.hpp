#pragma once

#include <cstdint>
#include <string>

#include "ivgen/session.hpp"

namespace ivgen {

// Ready-made session for a (content, motion) label pair: the image is frame 0
// of sample_scene(content, motion, scene_seed) and the config background is
// the scene's background. No strokes and no trajectory.
Session demo_session(const std::string& content, const std::string& motion, const PipelineConfig& base = {},
                     std::uint64_t scene_seed = 0);

// Drag of the scene's first blob by (dx, dy): handle at its center, target at
// center + (dx, dy), mask a disk of three radii around the handle.
TrajectoryInstruction demo_drag(const SceneSpec& scene, double dx, double dy);

}  // namespace ivgen
