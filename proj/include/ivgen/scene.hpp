#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivgen/tensor.hpp"

namespace ivgen {

// Closed token sets standing in for free-text prompts.
const std::vector<std::string>& content_vocabulary();
const std::vector<std::string>& motion_vocabulary();
bool is_content_label(std::string_view label);
bool is_motion_label(std::string_view label);

struct Point {
  double x = 0.0;  // column, pixels
  double y = 0.0;  // row, pixels
  friend bool operator==(const Point&, const Point&) = default;
};

struct Blob {
  Point center;
  Point velocity;  // pixels per frame
  double radius = 1.0;
  std::vector<double> intensity;  // per channel, [0,1]
  friend bool operator==(const Blob&, const Blob&) = default;
};

struct SceneSpec {
  std::vector<Blob> blobs;
  std::vector<double> background;  // per channel, [0,1]
  std::string content_label;
  std::string motion_label;
  std::size_t height = 32;  // canvas the centers were drawn for
  std::size_t width = 32;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct FrameStack {
  std::vector<Tensor> frames;  // each [C,H,W] in [0,1]
  double frame_rate = 8.0;     // metadata only

  std::size_t size() const noexcept { return frames.size(); }
  const Tensor& operator[](std::size_t i) const { return frames[i]; }
  friend bool operator==(const FrameStack&, const FrameStack&) = default;
};

void validate_scene(const SceneSpec& scene);
void validate_frames(const FrameStack& stack, const std::string& what);

inline constexpr std::size_t kSceneChannels = 3;

// Deterministic in (labels, seed, canvas). The content label picks blob
// count, size, placement and color family; the motion label picks the
// velocity family. Geometry does not depend on the motion label.
SceneSpec sample_scene(const std::string& content_label, const std::string& motion_label, std::uint64_t seed,
                       std::size_t height = 32, std::size_t width = 32);

// Frame i (0-based) places every blob at center + i * velocity. Blobs use a
// Gaussian radial profile with standard deviation `radius`, truncated at
// 3 * radius, composited additively over the background and clamped to [0,1].
FrameStack render_frames(const SceneSpec& scene, std::size_t num_frames, std::size_t height, std::size_t width);

// Intensity-weighted mean pixel position after subtracting `background`
// (one value per channel). Throws UndefinedCentroidError when no foreground
// mass remains.
Point centroid(const Tensor& image, std::span<const double> background);
Point centroid(const Tensor& image);

}  // namespace ivgen
