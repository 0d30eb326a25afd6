#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivgen/scene.hpp"
#include "ivgen/tensor.hpp"

namespace ivgen {

// Binary raster [H,W].
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width) : height_(height), width_(width), bits_(height * width, 0) {}
  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  // Pixels within `radius` of `center`.
  static Mask disk(std::size_t height, std::size_t width, Point center, double radius);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t y, std::size_t x, bool on = true) { bits_[y * width_ + x] = on ? 1 : 0; }
  std::size_t count() const noexcept;
  bool contains(Point p) const;  // nearest pixel is inside the mask
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Stroke {
  std::vector<Point> polyline;
  double radius = 1.0;
  std::vector<double> color;  // per channel, [0,1]
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct ImageInstruction {
  Tensor pixels;  // x, [C,H,W] in [0,1]
  friend bool operator==(const ImageInstruction&, const ImageInstruction&) = default;
};

struct ContentInstruction {
  std::string label = "one_blob";  // y
  std::vector<Stroke> strokes;
  friend bool operator==(const ContentInstruction&, const ContentInstruction&) = default;
};

struct MotionInstruction {
  std::string label = "static";  // y'
  std::optional<double> magnitude;
  double effective_magnitude() const { return magnitude.value_or(1.0); }
  friend bool operator==(const MotionInstruction&, const MotionInstruction&) = default;
};

struct TrajectoryInstruction {
  std::vector<Point> handles;
  std::vector<Point> targets;
  Mask mask;
  friend bool operator==(const TrajectoryInstruction&, const TrajectoryInstruction&) = default;
};

inline constexpr double kDefaultLambda = 0.5;

struct InstructionSet {
  ImageInstruction image;
  ContentInstruction content;
  MotionInstruction motion;
  std::optional<TrajectoryInstruction> trajectory;
  double lambda = kDefaultLambda;
  friend bool operator==(const InstructionSet&, const InstructionSet&) = default;
};

// Each validator throws ValidationError with a field path rooted at `path`.
void validate_strokes(std::span<const Stroke> strokes, std::size_t channels, std::size_t height, std::size_t width,
                      const std::string& path = "content.strokes");
void validate_trajectory(const TrajectoryInstruction& r, std::size_t height, std::size_t width,
                         const std::string& path = "trajectory");
void validate_motion(const MotionInstruction& m, const std::string& path = "motion");
void validate_lambda(double lambda, const std::string& path = "lambda");
void validate_instructions(const InstructionSet& set);

// Opaque overwrite of every pixel within `radius` of each polyline; later
// strokes win.
Tensor apply_paint(const Tensor& image, std::span<const Stroke> strokes);

// Mean handle->target displacement snapped to whole pixels.
struct PixelOffset {
  long dx = 0;
  long dy = 0;
  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};
PixelOffset trajectory_offset(const TrajectoryInstruction& r);

// Translates the masked region by trajectory_offset(r). Vacated pixels take
// `background`; destinations outside the frame are dropped.
Tensor apply_trajectory(const Tensor& image, const TrajectoryInstruction& r, std::span<const double> background);

struct ImageCondition {
  Tensor image;               // x
  std::string content_label;  // y
  std::vector<Stroke> strokes;
};

struct VideoCondition {
  MotionInstruction motion;                         // y'
  std::optional<TrajectoryInstruction> trajectory;  // r
  double lambda = kDefaultLambda;
};

struct CompiledInstructions {
  ImageCondition img_condition;
  VideoCondition video_condition;
};

CompiledInstructions compile(const InstructionSet& set);

}  // namespace ivgen
