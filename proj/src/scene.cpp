#include "ivgen/scene.hpp"

#include <algorithm>
#include <cmath>

#include "ivgen/error.hpp"
#include "ivgen/random.hpp"

namespace ivgen {
namespace {

struct ContentFamily {
  std::string_view label;
  int count;
  double radius_min, radius_max;  // at a 32 px canvas
  std::array<double, 3> color;
  bool centered;  // single blob placed near the canvas center
};

constexpr std::array<ContentFamily, 4> kContentFamilies{{
    {"one_blob", 1, 2.0, 2.8, {0.90, 0.35, 0.25}, true},
    {"two_blobs", 2, 1.8, 2.4, {0.25, 0.45, 0.90}, false},
    {"three_blobs", 3, 1.4, 2.0, {0.30, 0.85, 0.35}, false},
    {"big_blob", 1, 4.5, 5.5, {0.90, 0.85, 0.30}, true},
}};

struct MotionFamily {
  std::string_view label;
  double dx_min, dx_max, dy_min, dy_max;
};

constexpr std::array<MotionFamily, 4> kMotionFamilies{{
    {"static", 0.0, 0.0, 0.0, 0.0},
    {"drift_right", 0.5, 1.5, -0.2, 0.2},
    {"drift_left", -1.5, -0.5, -0.2, 0.2},
    {"drift_down", -0.2, 0.2, 0.5, 1.5},
}};

template <class Families>
std::vector<std::string> labels_of(const Families& families) {
  std::vector<std::string> out;
  for (const auto& f : families) out.emplace_back(f.label);
  return out;
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

const std::vector<std::string>& content_vocabulary() {
  static const std::vector<std::string> v = labels_of(kContentFamilies);
  return v;
}

const std::vector<std::string>& motion_vocabulary() {
  static const std::vector<std::string> v = labels_of(kMotionFamilies);
  return v;
}

bool is_content_label(std::string_view label) {
  return std::any_of(kContentFamilies.begin(), kContentFamilies.end(), [&](const auto& f) { return f.label == label; });
}

bool is_motion_label(std::string_view label) {
  return std::any_of(kMotionFamilies.begin(), kMotionFamilies.end(), [&](const auto& f) { return f.label == label; });
}

void validate_scene(const SceneSpec& scene) {
  if (scene.background.empty()) throw ValidationError("needs at least one channel", "scene.background");
  for (double b : scene.background) {
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("must lie in [0,1]", "scene.background");
  }
  for (std::size_t i = 0; i < scene.blobs.size(); ++i) {
    const Blob& blob = scene.blobs[i];
    const std::string path = "scene.blobs[" + std::to_string(i) + "]";
    if (!(blob.radius > 0.0)) throw ValidationError("radius must be positive", path + ".radius");
    if (blob.intensity.size() != scene.background.size()) {
      throw ValidationError("channel count differs from background", path + ".intensity");
    }
    for (double v : blob.intensity) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("must lie in [0,1]", path + ".intensity");
    }
    if (!(blob.center.x >= 0.0 && blob.center.x <= static_cast<double>(scene.width) - 1.0 && blob.center.y >= 0.0 &&
          blob.center.y <= static_cast<double>(scene.height) - 1.0)) {
      throw ValidationError("center outside the frame", path + ".center");
    }
  }
}

void validate_frames(const FrameStack& stack, const std::string& what) {
  if (stack.frames.empty()) throw ValidationError("frame stack is empty", what);
  for (std::size_t i = 0; i < stack.frames.size(); ++i) {
    require_pixel_image(stack.frames[i], what + "[" + std::to_string(i) + "]");
    require_same_shape(stack.frames[0], stack.frames[i], what + "[" + std::to_string(i) + "]");
  }
}

SceneSpec sample_scene(const std::string& content_label, const std::string& motion_label, std::uint64_t seed,
                       std::size_t height, std::size_t width) {
  auto content = std::find_if(kContentFamilies.begin(), kContentFamilies.end(),
                              [&](const auto& f) { return f.label == content_label; });
  if (content == kContentFamilies.end()) {
    throw ValidationError("unknown content label '" + content_label + "'", "content.label");
  }
  auto motion = std::find_if(kMotionFamilies.begin(), kMotionFamilies.end(),
                             [&](const auto& f) { return f.label == motion_label; });
  if (motion == kMotionFamilies.end()) {
    throw ValidationError("unknown motion label '" + motion_label + "'", "motion.label");
  }
  if (height == 0 || width == 0) throw ValidationError("canvas must be non-empty", "scene.canvas");

  Rng geometry = make_rng(seed, 0xC0);
  Rng dynamics = make_rng(seed, 0xD1);
  const double scale = static_cast<double>(std::min(height, width)) / 32.0;
  const double w = static_cast<double>(width), h = static_cast<double>(height);

  SceneSpec scene;
  scene.content_label = content_label;
  scene.motion_label = motion_label;
  scene.height = height;
  scene.width = width;
  const double bg = uniform(geometry, 0.05, 0.15);
  scene.background.assign(kSceneChannels, bg);

  for (int k = 0; k < content->count; ++k) {
    Blob blob;
    blob.radius = uniform(geometry, content->radius_min, content->radius_max) * scale;
    if (content->centered) {
      const double jitter_x = w / 8.0, jitter_y = h / 8.0;
      blob.center = {uniform(geometry, (w - 1) / 2 - jitter_x, (w - 1) / 2 + jitter_x),
                     uniform(geometry, (h - 1) / 2 - jitter_y, (h - 1) / 2 + jitter_y)};
    } else {
      const double margin_x = std::min(3.0 * blob.radius, (w - 1) / 2);
      const double margin_y = std::min(3.0 * blob.radius, (h - 1) / 2);
      blob.center = {uniform(geometry, margin_x, w - 1 - margin_x), uniform(geometry, margin_y, h - 1 - margin_y)};
    }
    blob.intensity.resize(kSceneChannels);
    for (std::size_t c = 0; c < kSceneChannels; ++c) {
      blob.intensity[c] = std::clamp(content->color[c] + uniform(geometry, -0.05, 0.05), 0.0, 1.0);
    }
    blob.velocity = {uniform(dynamics, motion->dx_min, motion->dx_max),
                     uniform(dynamics, motion->dy_min, motion->dy_max)};
    scene.blobs.push_back(std::move(blob));
  }
  return scene;
}

FrameStack render_frames(const SceneSpec& scene, std::size_t num_frames, std::size_t height, std::size_t width) {
  if (num_frames == 0 || height == 0 || width == 0) throw ValidationError("N_F, H and W must be positive", "render");
  validate_scene(scene);
  const std::size_t channels = scene.background.size();
  FrameStack stack;
  stack.frames.reserve(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    Tensor frame({channels, height, width});
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) frame.at(c, y, x) = scene.background[c];
      }
    }
    for (const Blob& blob : scene.blobs) {
      const double cx = blob.center.x + static_cast<double>(i) * blob.velocity.x;
      const double cy = blob.center.y + static_cast<double>(i) * blob.velocity.y;
      const double support = 3.0 * blob.radius;
      const long x0 = std::max(0L, static_cast<long>(std::floor(cx - support)));
      const long x1 = std::min(static_cast<long>(width) - 1, static_cast<long>(std::ceil(cx + support)));
      const long y0 = std::max(0L, static_cast<long>(std::floor(cy - support)));
      const long y1 = std::min(static_cast<long>(height) - 1, static_cast<long>(std::ceil(cy + support)));
      for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          const double r2 = dx * dx + dy * dy;
          if (r2 >= support * support) continue;
          const double g = std::exp(-r2 / (2.0 * blob.radius * blob.radius));
          for (std::size_t c = 0; c < channels; ++c) {
            frame.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) +=
                g * (blob.intensity[c] - scene.background[c]);
          }
        }
      }
    }
    for (double& v : frame.values()) v = std::clamp(v, 0.0, 1.0);
    stack.frames.push_back(std::move(frame));
  }
  return stack;
}

Point centroid(const Tensor& image, std::span<const double> background) {
  if (image.rank() != 3) throw ValidationError("expected a [C,H,W] image", "image");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  if (background.size() != channels) throw ValidationError("background needs one value per channel", "background");
  double mass = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double w = image.at(c, y, x) - background[c];
        mass += w;
        mx += w * static_cast<double>(x);
        my += w * static_cast<double>(y);
      }
    }
  }
  if (!(mass > 1e-12)) throw UndefinedCentroidError("no foreground mass after background subtraction");
  return {mx / mass, my / mass};
}

Point centroid(const Tensor& image) {
  if (image.rank() != 3) throw ValidationError("expected a [C,H,W] image", "image");
  std::vector<double> zero(image.dim(0), 0.0);
  return centroid(image, zero);
}

}  // namespace ivgen
