#include "ivgen/demo.hpp"

#include "ivgen/error.hpp"

namespace ivgen {

Session demo_session(const std::string& content, const std::string& motion, const PipelineConfig& base,
                     std::uint64_t scene_seed) {
  const SceneSpec scene = sample_scene(content, motion, scene_seed, base.height, base.width);
  Session s;
  s.id = content + "-" + motion;
  s.config = base;
  s.config.background = scene.background;
  s.config.validate();
  s.instructions.image.pixels = render_frames(scene, 1, base.height, base.width).frames[0];
  s.instructions.content.label = content;
  s.instructions.motion.label = motion;
  return s;
}

TrajectoryInstruction demo_drag(const SceneSpec& scene, double dx, double dy) {
  if (scene.blobs.empty()) throw ValidationError("scene has no blobs", "scene");
  const Blob& blob = scene.blobs.front();
  TrajectoryInstruction r;
  r.handles = {blob.center};
  r.targets = {Point{blob.center.x + dx, blob.center.y + dy}};
  r.mask = Mask::disk(scene.height, scene.width, blob.center, 3.0 * blob.radius);
  return r;
}

}  // namespace ivgen
