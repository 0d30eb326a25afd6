#include "ivgen/instructions.hpp"

#include <algorithm>
#include <cmath>

#include "ivgen/error.hpp"

namespace ivgen {
namespace {

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

bool in_bounds(Point p, std::size_t height, std::size_t width) {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
         p.x <= static_cast<double>(width) - 1.0 && p.y <= static_cast<double>(height) - 1.0;
}

double distance_to_segment(double px, double py, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(((px - a.x) * vx + (py - a.y) * vy) / len2, 0.0, 1.0);
  const double dx = px - (a.x + u * vx), dy = py - (a.y + u * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Mask::Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (bits_.size() != height_ * width_) throw ValidationError("mask size does not match its shape", "mask");
  for (auto& b : bits_) b = b ? 1 : 0;
}

Mask Mask::disk(std::size_t height, std::size_t width, Point center, double radius) {
  Mask m(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - center.x, dy = static_cast<double>(y) - center.y;
      if (dx * dx + dy * dy <= radius * radius) m.set(y, x);
    }
  }
  return m;
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool Mask::contains(Point p) const {
  const long x = std::lround(p.x), y = std::lround(p.y);
  if (x < 0 || y < 0 || x >= static_cast<long>(width_) || y >= static_cast<long>(height_)) return false;
  return at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
}

void validate_strokes(std::span<const Stroke> strokes, std::size_t channels, std::size_t height, std::size_t width,
                      const std::string& path) {
  for (std::size_t s = 0; s < strokes.size(); ++s) {
    const Stroke& stroke = strokes[s];
    const std::string sp = indexed(path, s);
    if (stroke.polyline.empty()) throw ValidationError("polyline needs at least one point", sp + ".points");
    if (!(stroke.radius > 0.0) || !std::isfinite(stroke.radius)) {
      throw ValidationError("radius must be positive", sp + ".radius");
    }
    if (stroke.color.size() != channels) {
      throw ValidationError("expected " + std::to_string(channels) + " color channels", sp + ".color");
    }
    for (double v : stroke.color) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("color values must lie in [0,1]", sp + ".color");
    }
    for (std::size_t i = 0; i < stroke.polyline.size(); ++i) {
      if (!in_bounds(stroke.polyline[i], height, width)) {
        throw ValidationError("point outside the image", indexed(sp + ".points", i));
      }
    }
  }
}

void validate_trajectory(const TrajectoryInstruction& r, std::size_t height, std::size_t width,
                         const std::string& path) {
  if (r.handles.empty()) throw ValidationError("TrajectoryInstruction needs at least one handle", path + ".handles");
  if (r.handles.size() != r.targets.size()) {
    throw ValidationError("TrajectoryInstruction handles and targets differ in length", path + ".targets");
  }
  if (r.mask.height() != height || r.mask.width() != width) {
    throw ValidationError("TrajectoryInstruction mask shape does not match the image", path + ".mask");
  }
  if (r.mask.count() == 0) throw ValidationError("TrajectoryInstruction mask is empty", path + ".mask");
  for (std::size_t i = 0; i < r.handles.size(); ++i) {
    if (!in_bounds(r.handles[i], height, width)) {
      throw ValidationError("TrajectoryInstruction handle outside the image", indexed(path + ".handles", i));
    }
    if (!r.mask.contains(r.handles[i])) {
      throw ValidationError("TrajectoryInstruction handle lies outside the mask", indexed(path + ".handles", i));
    }
    if (!std::isfinite(r.targets[i].x) || !std::isfinite(r.targets[i].y)) {
      throw ValidationError("TrajectoryInstruction target is not finite", indexed(path + ".targets", i));
    }
  }
}

void validate_motion(const MotionInstruction& m, const std::string& path) {
  if (!is_motion_label(m.label)) throw ValidationError("unknown motion label '" + m.label + "'", path + ".label");
  if (m.magnitude && !(*m.magnitude > 0.0 && std::isfinite(*m.magnitude))) {
    throw ValidationError("magnitude must be positive", path + ".magnitude");
  }
}

void validate_lambda(double lambda, const std::string& path) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("must lie in [0,1]", path);
}

void validate_instructions(const InstructionSet& set) {
  require_pixel_image(set.image.pixels, "image");
  const std::size_t c = set.image.pixels.dim(0), h = set.image.pixels.dim(1), w = set.image.pixels.dim(2);
  if (!is_content_label(set.content.label)) {
    throw ValidationError("unknown content label '" + set.content.label + "'", "content.label");
  }
  validate_strokes(set.content.strokes, c, h, w);
  validate_motion(set.motion);
  if (set.trajectory) validate_trajectory(*set.trajectory, h, w);
  validate_lambda(set.lambda);
}

Tensor apply_paint(const Tensor& image, std::span<const Stroke> strokes) {
  require_pixel_image(image, "image");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  validate_strokes(strokes, channels, height, width);
  Tensor out = image;
  for (const Stroke& stroke : strokes) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y);
        double d = std::hypot(px - stroke.polyline[0].x, py - stroke.polyline[0].y);
        for (std::size_t i = 1; i < stroke.polyline.size() && d > stroke.radius; ++i) {
          d = std::min(d, distance_to_segment(px, py, stroke.polyline[i - 1], stroke.polyline[i]));
        }
        if (d <= stroke.radius) {
          for (std::size_t c = 0; c < channels; ++c) out.at(c, y, x) = stroke.color[c];
        }
      }
    }
  }
  return out;
}

PixelOffset trajectory_offset(const TrajectoryInstruction& r) {
  if (r.handles.empty() || r.handles.size() != r.targets.size()) {
    throw ValidationError("handles and targets must be non-empty and equal length", "trajectory");
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < r.handles.size(); ++i) {
    sx += r.targets[i].x - r.handles[i].x;
    sy += r.targets[i].y - r.handles[i].y;
  }
  const double n = static_cast<double>(r.handles.size());
  return {std::lround(sx / n), std::lround(sy / n)};
}

Tensor apply_trajectory(const Tensor& image, const TrajectoryInstruction& r, std::span<const double> background) {
  require_pixel_image(image, "image");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  validate_trajectory(r, height, width);
  if (background.size() != channels) throw ValidationError("needs one value per channel", "background");

  const PixelOffset d = trajectory_offset(r);
  Tensor out = image;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!r.mask.at(y, x)) continue;
      for (std::size_t c = 0; c < channels; ++c) out.at(c, y, x) = background[c];
    }
  }
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!r.mask.at(y, x)) continue;
      const long tx = static_cast<long>(x) + d.dx, ty = static_cast<long>(y) + d.dy;
      if (tx < 0 || ty < 0 || tx >= static_cast<long>(width) || ty >= static_cast<long>(height)) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(c, static_cast<std::size_t>(ty), static_cast<std::size_t>(tx)) = image.at(c, y, x);
      }
    }
  }
  return out;
}

CompiledInstructions compile(const InstructionSet& set) {
  validate_instructions(set);
  return {ImageCondition{set.image.pixels, set.content.label, set.content.strokes},
          VideoCondition{set.motion, set.trajectory, set.lambda}};
}

}  // namespace ivgen
