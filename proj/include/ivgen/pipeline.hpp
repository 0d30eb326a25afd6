#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ivgen/diffusion.hpp"
#include "ivgen/gaussian_world.hpp"
#include "ivgen/instructions.hpp"
#include "ivgen/scene.hpp"
#include "ivgen/tensor.hpp"

namespace ivgen {

// GroupNorm -> SiLU -> Conv2D post-process applied to (frame - reference).
struct AlignParams {
  std::size_t groups = 3;
  double epsilon = 1e-5;
  std::size_t kernel_size = 1;  // odd
  std::vector<double> kernel;   // [out][in][ky][kx], C*C*k*k values
  std::vector<double> bias;     // per output channel
  bool residual_add = true;

  // 1x1 identity kernel, zero bias, one channel per group, eps 1e-5.
  static AlignParams identity(std::size_t channels);
  void validate(std::size_t channels) const;
  friend bool operator==(const AlignParams&, const AlignParams&) = default;
};

struct PipelineConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t num_frames = 8;
  int steps = 50;
  double beta_start = 0.002;  // 1e-4 .. 0.02 rescaled by 1000 / steps
  double beta_end = 0.4;
  ScheduleKind schedule_kind = ScheduleKind::kLinear;
  SamplingMode sampling_mode = SamplingMode::kDeterministic;
  double img_strength = 0.3;
  double image_sigma = 0.005;  // spread of each content label's image world (latent units)
  double video_sigma = 1e-5;   // spread of the video world around its motion template
  std::vector<double> background{0.1, 0.1, 0.1};
  std::optional<AlignParams> align;  // identity when unset
  double frame_rate = 8.0;

  std::size_t channels() const noexcept { return kSceneChannels; }
  NoiseSchedule schedule() const;
  AlignParams align_params() const { return align.value_or(AlignParams::identity(channels())); }
  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Fixed invertible map between pixel range [0,1] and latent range [-1,1].
Tensor encode(const Tensor& pixels);
// Inverse of encode, clamped to [0,1].
Tensor decode(const Tensor& latent);

// Wall-clock per instruction phase, in milliseconds.
struct PhaseTimings {
  double image_ms = 0.0;       // encoding + noising the image instruction
  double content_ms = 0.0;     // painting + label-conditioned denoising
  double motion_ms = 0.0;      // video diffusion + frame alignment
  double trajectory_ms = 0.0;  // drag edit of the intermediate image
  double total_ms = 0.0;
};

// Image stage: condition is the content label.
using ImageDenoiser = Denoiser<std::string>;

// Gaussian world per content label centered on the encoded canonical render
// (sample_scene(label, "static", 0)) at the given resolution.
GaussianWorld label_world(const std::string& content_label, std::size_t height, std::size_t width, double sigma);
ImageDenoiser make_label_denoiser(const NoiseSchedule& sched, std::size_t height, std::size_t width, double sigma);

// Image-to-image stage. Paints y's strokes onto x, noises to step
// ceil(strength * T) and denoises conditioned on y's label. Strength 0
// returns the painted image.
Tensor p_img(const ImageInstruction& x, const ContentInstruction& y, double strength, std::uint64_t seed,
             const NoiseSchedule& sched, const ImageDenoiser& denoiser,
             SamplingMode mode = SamplingMode::kDeterministic, PhaseTimings* timings = nullptr);

// Video stage condition: the encoded conditioning image and the motion token.
struct VideoDenoiserCondition {
  Tensor cond_latent;  // [C,H,W]
  MotionInstruction motion;
};

// Stacks the conditioning latent as extra channels on every frame:
// [N,C,H,W] + [C,H,W] -> [N,2C,H,W].
Tensor concat_condition(const Tensor& video_latent, const Tensor& cond_latent);

// Predictor over the concatenated input; returns noise of shape [N,C,H,W].
using VideoNoisePredictor =
    std::function<Tensor(const Tensor& conditioned, int t, const MotionInstruction& motion)>;
using VideoDenoiser = Denoiser<VideoDenoiserCondition>;

VideoDenoiser make_video_denoiser(VideoNoisePredictor predictor);

// Pixels per frame for the motion token, scaled by its magnitude.
Point motion_velocity(const MotionInstruction& motion);

// Bilinear translation by (dx, dy) with edge replication; linear in `image`.
Tensor translate(const Tensor& image, double dx, double dy);

// Mean video for a conditioning latent: frame i is the latent translated by
// i * motion_velocity(motion).
Tensor motion_template(const Tensor& cond_latent, const MotionInstruction& motion, std::size_t num_frames);

// Closed-form predictor for a Gaussian video world around motion_template.
VideoNoisePredictor make_analytic_video_predictor(const NoiseSchedule& sched, double sigma);

// Runs one shared reverse chain; each step predicts noise under the x~ and
// x~' conditions from the same state and advances with their lambda blend.
Tensor p_video_latent(const Tensor& intermediate, const Tensor& edited, const MotionInstruction& motion,
                      double lambda, std::size_t num_frames, std::uint64_t seed, const NoiseSchedule& sched,
                      const VideoDenoiser& denoiser, SamplingMode mode = SamplingMode::kDeterministic);
FrameStack p_video(const Tensor& intermediate, const Tensor& edited, const MotionInstruction& motion, double lambda,
                   std::size_t num_frames, std::uint64_t seed, const NoiseSchedule& sched,
                   const VideoDenoiser& denoiser, SamplingMode mode = SamplingMode::kDeterministic);

Tensor group_norm(const Tensor& input, std::size_t groups, double epsilon);
Tensor silu(const Tensor& input);
Tensor conv2d_same(const Tensor& input, std::size_t kernel_size, std::span<const double> kernel,
                   std::span<const double> bias);

// Conv2D(SiLU(GroupNorm(frame - reference))), plus reference when
// params.residual_add. Not clamped.
Tensor align_frame(const Tensor& frame, const Tensor& reference, const AlignParams& params);

// Image the frames are aligned against: the lambda blend of x~ and x~'.
Tensor alignment_reference(const Tensor& intermediate, const Tensor& edited, double lambda);

struct GenerationResult {
  Tensor intermediate;  // x~
  Tensor edited;        // x~'
  FrameStack raw;       // v_i
  FrameStack aligned;   // v_i', clamped to [0,1]
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  PhaseTimings timings;
};

// The two stage denoisers a generation runs with.
struct Engine {
  NoiseSchedule schedule;
  ImageDenoiser image_denoiser;
  VideoDenoiser video_denoiser;

  static Engine analytic(const PipelineConfig& config);
};

// Stream ids separating the image and video stage randomness of one seed.
inline constexpr std::uint64_t kImageStageStream = 1;
inline constexpr std::uint64_t kVideoStageStream = 2;
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stream);

GenerationResult generate(const InstructionSet& set, const PipelineConfig& config, std::uint64_t seed);
GenerationResult generate(const InstructionSet& set, const PipelineConfig& config, std::uint64_t seed,
                          const Engine& engine);

}  // namespace ivgen
