#include "ivgen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>

#include "ivgen/error.hpp"
#include "ivgen/random.hpp"

namespace ivgen {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

constexpr std::uint64_t kNoisingStream = 0xA;
constexpr std::uint64_t kInitialLatentStream = 0xB;

Tensor clamp01(Tensor t) {
  for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

}  // namespace

AlignParams AlignParams::identity(std::size_t channels) {
  AlignParams p;
  p.groups = channels;
  p.kernel_size = 1;
  p.kernel.assign(channels * channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) p.kernel[c * channels + c] = 1.0;
  p.bias.assign(channels, 0.0);
  return p;
}

void AlignParams::validate(std::size_t channels) const {
  if (groups == 0 || channels % groups != 0) {
    throw ValidationError("group count " + std::to_string(groups) + " does not divide " + std::to_string(channels) +
                              " channels",
                          "align.groups");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("must be positive", "align.epsilon");
  if (kernel_size % 2 == 0) throw ValidationError("kernel size must be odd", "align.kernel_size");
  if (kernel.size() != channels * channels * kernel_size * kernel_size) {
    throw ValidationError("expected " + std::to_string(channels * channels * kernel_size * kernel_size) + " weights",
                          "align.kernel");
  }
  if (bias.size() != channels) throw ValidationError("expected one bias per channel", "align.bias");
  for (double v : kernel) {
    if (!std::isfinite(v)) throw ValidationError("non-finite weight", "align.kernel");
  }
  for (double v : bias) {
    if (!std::isfinite(v)) throw ValidationError("non-finite bias", "align.bias");
  }
}

NoiseSchedule PipelineConfig::schedule() const { return build_schedule(steps, beta_start, beta_end, schedule_kind); }

void PipelineConfig::validate() const {
  if (height == 0 || width == 0) throw ValidationError("resolution must be positive", "config.height");
  if (num_frames == 0) throw ValidationError("must be positive", "config.num_frames");
  (void)schedule();
  if (!(img_strength >= 0.0 && img_strength <= 1.0)) throw ValidationError("must lie in [0,1]", "config.img_strength");
  if (!(image_sigma >= 0.0) || !std::isfinite(image_sigma)) {
    throw ValidationError("must be >= 0", "config.image_sigma");
  }
  if (!(video_sigma >= 0.0) || !std::isfinite(video_sigma)) {
    throw ValidationError("must be >= 0", "config.video_sigma");
  }
  if (background.size() != channels()) throw ValidationError("needs one value per channel", "config.background");
  for (double b : background) {
    if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("must lie in [0,1]", "config.background");
  }
  if (!(frame_rate > 0.0)) throw ValidationError("must be positive", "config.frame_rate");
  align_params().validate(channels());
}

Tensor encode(const Tensor& pixels) {
  Tensor out(pixels.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * pixels[i] - 1.0;
  return out;
}

Tensor decode(const Tensor& latent) {
  Tensor out(latent.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((latent[i] + 1.0) * 0.5, 0.0, 1.0);
  return out;
}

GaussianWorld label_world(const std::string& content_label, std::size_t height, std::size_t width, double sigma) {
  const SceneSpec scene = sample_scene(content_label, "static", 0, height, width);
  return GaussianWorld::single(encode(render_frames(scene, 1, height, width).frames[0]), sigma);
}

ImageDenoiser make_label_denoiser(const NoiseSchedule& sched, std::size_t height, std::size_t width, double sigma) {
  auto worlds = std::make_shared<std::map<std::string, GaussianWorld>>();
  for (const auto& label : content_vocabulary()) worlds->emplace(label, label_world(label, height, width, sigma));
  return [worlds, sched](const Tensor& z_t, int t, const std::string& label) {
    auto it = worlds->find(label);
    if (it == worlds->end()) throw ValidationError("unknown content label '" + label + "'", "content.label");
    return analytic_epsilon(it->second, z_t, t, sched);
  };
}

Tensor p_img(const ImageInstruction& x, const ContentInstruction& y, double strength, std::uint64_t seed,
             const NoiseSchedule& sched, const ImageDenoiser& denoiser, SamplingMode mode, PhaseTimings* timings) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw ValidationError("must lie in [0,1]", "img_strength");
  auto start = Clock::now();
  Tensor painted = apply_paint(x.pixels, y.strokes);
  if (timings) timings->content_ms += elapsed_ms(start);
  if (strength == 0.0) return painted;

  start = Clock::now();
  const int start_step = std::max(1, static_cast<int>(std::ceil(strength * sched.num_steps())));
  Rng rng = make_rng(seed, kNoisingStream);
  const Tensor z0 = encode(painted);
  Tensor z_start = forward_diffuse(z0, standard_normal(z0.shape(), rng), start_step, sched);
  if (timings) timings->image_ms += elapsed_ms(start);

  start = Clock::now();
  StepPredictor predict = [&](const Tensor& z, int t) { return denoiser(z, t, y.label); };
  Tensor out = decode(run_chain(predict, sched, std::move(z_start), start_step, mode, seed));
  if (timings) timings->content_ms += elapsed_ms(start);
  return out;
}

Tensor concat_condition(const Tensor& video_latent, const Tensor& cond_latent) {
  if (video_latent.rank() != 4 || cond_latent.rank() != 3) {
    throw ValidationError("expected a [N,C,H,W] latent and a [C,H,W] condition", "condition");
  }
  const std::size_t n = video_latent.dim(0), c = video_latent.dim(1), h = video_latent.dim(2),
                    w = video_latent.dim(3);
  if (cond_latent.shape() != Shape{c, h, w}) {
    throw ValidationError("condition shape " + shape_to_string(cond_latent.shape()) + " does not match frames",
                          "condition");
  }
  const std::size_t plane = c * h * w;
  Tensor out({n, 2 * c, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.values().subspan(i * 2 * plane);
    std::copy_n(video_latent.values().subspan(i * plane).begin(), plane, dst.begin());
    std::copy_n(cond_latent.values().begin(), plane, dst.begin() + static_cast<std::ptrdiff_t>(plane));
  }
  return out;
}

VideoDenoiser make_video_denoiser(VideoNoisePredictor predictor) {
  return [predictor = std::move(predictor)](const Tensor& z_t, int t, const VideoDenoiserCondition& cond) {
    return predictor(concat_condition(z_t, cond.cond_latent), t, cond.motion);
  };
}

Point motion_velocity(const MotionInstruction& motion) {
  validate_motion(motion);
  const double m = motion.effective_magnitude();
  if (motion.label == "drift_right") return {m, 0.0};
  if (motion.label == "drift_left") return {-m, 0.0};
  if (motion.label == "drift_down") return {0.0, m};
  return {0.0, 0.0};
}

Tensor translate(const Tensor& image, double dx, double dy) {
  if (image.rank() != 3) throw ValidationError("expected a [C,H,W] tensor", "translate");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  Tensor out(image.shape());
  const auto clamp_index = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n) - 1.0));
  };
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = std::clamp(static_cast<double>(y) - dy, 0.0, static_cast<double>(height) - 1.0);
    const std::size_t y0 = clamp_index(std::floor(sy), height), y1 = clamp_index(std::floor(sy) + 1.0, height);
    const double fy = sy - std::floor(sy);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = std::clamp(static_cast<double>(x) - dx, 0.0, static_cast<double>(width) - 1.0);
      const std::size_t x0 = clamp_index(std::floor(sx), width), x1 = clamp_index(std::floor(sx) + 1.0, width);
      const double fx = sx - std::floor(sx);
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = (1.0 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1.0 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Tensor motion_template(const Tensor& cond_latent, const MotionInstruction& motion, std::size_t num_frames) {
  const Point v = motion_velocity(motion);
  std::vector<Tensor> frames;
  frames.reserve(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    frames.push_back(i == 0 ? cond_latent : translate(cond_latent, v.x * static_cast<double>(i),
                                                      v.y * static_cast<double>(i)));
  }
  return Tensor::stack(frames);
}

VideoNoisePredictor make_analytic_video_predictor(const NoiseSchedule& sched, double sigma) {
  return [sched, sigma](const Tensor& conditioned, int t, const MotionInstruction& motion) {
    if (conditioned.rank() != 4 || conditioned.dim(1) % 2 != 0) {
      throw ValidationError("expected [N,2C,H,W] conditioned input", "video denoiser");
    }
    const std::size_t n = conditioned.dim(0), c = conditioned.dim(1) / 2, h = conditioned.dim(2),
                      w = conditioned.dim(3);
    const std::size_t plane = c * h * w;
    Tensor latent({n, c, h, w});
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(conditioned.values().subspan(i * 2 * plane).begin(), plane,
                  latent.values().subspan(i * plane).begin());
    }
    std::vector<double> cond(conditioned.values().begin() + static_cast<std::ptrdiff_t>(plane),
                             conditioned.values().begin() + static_cast<std::ptrdiff_t>(2 * plane));
    const GaussianWorld world =
        GaussianWorld::single(motion_template(Tensor({c, h, w}, std::move(cond)), motion, n), sigma);
    return analytic_epsilon(world, latent, t, sched);
  };
}

Tensor p_video_latent(const Tensor& intermediate, const Tensor& edited, const MotionInstruction& motion,
                      double lambda, std::size_t num_frames, std::uint64_t seed, const NoiseSchedule& sched,
                      const VideoDenoiser& denoiser, SamplingMode mode) {
  require_pixel_image(intermediate, "intermediate");
  require_pixel_image(edited, "edited");
  require_same_shape(intermediate, edited, "edited");
  validate_lambda(lambda);
  validate_motion(motion);
  if (num_frames == 0) throw ValidationError("must be positive", "num_frames");

  const VideoDenoiserCondition original{encode(intermediate), motion};
  const VideoDenoiserCondition user_edit{encode(edited), motion};
  Shape shape{num_frames};
  shape.insert(shape.end(), intermediate.shape().begin(), intermediate.shape().end());
  Rng rng = make_rng(seed, kInitialLatentStream);
  Tensor z_T = standard_normal(shape, rng);

  // Without an edit both predictions coincide and the blend is skipped.
  const bool same = bit_equal(intermediate, edited);
  StepPredictor predict = [&](const Tensor& z, int t) {
    if (same) return denoiser(z, t, original);
    return blend_noise(denoiser(z, t, original), denoiser(z, t, user_edit), lambda);
  };
  return run_chain(predict, sched, std::move(z_T), sched.num_steps(), mode, seed);
}

FrameStack p_video(const Tensor& intermediate, const Tensor& edited, const MotionInstruction& motion, double lambda,
                   std::size_t num_frames, std::uint64_t seed, const NoiseSchedule& sched,
                   const VideoDenoiser& denoiser, SamplingMode mode) {
  const Tensor latent = p_video_latent(intermediate, edited, motion, lambda, num_frames, seed, sched, denoiser, mode);
  FrameStack stack;
  stack.frames.reserve(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) stack.frames.push_back(decode(latent.slice(i)));
  return stack;
}

Tensor group_norm(const Tensor& input, std::size_t groups, double epsilon) {
  if (input.rank() != 3) throw ValidationError("expected a [C,H,W] tensor", "group_norm");
  const std::size_t channels = input.dim(0);
  if (groups == 0 || channels % groups != 0) {
    throw ValidationError("group count " + std::to_string(groups) + " does not divide " + std::to_string(channels) +
                              " channels",
                          "align.groups");
  }
  const std::size_t group_len = input.size() / groups;
  Tensor out(input.shape());
  for (std::size_t g = 0; g < groups; ++g) {
    const auto in = input.values().subspan(g * group_len, group_len);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(group_len);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(group_len);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    auto dst = out.values().subspan(g * group_len, group_len);
    for (std::size_t i = 0; i < group_len; ++i) dst[i] = (in[i] - mean) * inv;
  }
  return out;
}

Tensor silu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] / (1.0 + std::exp(-input[i]));
  return out;
}

Tensor conv2d_same(const Tensor& input, std::size_t kernel_size, std::span<const double> kernel,
                   std::span<const double> bias) {
  if (input.rank() != 3) throw ValidationError("expected a [C,H,W] tensor", "conv2d");
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t k = kernel_size;
  if (k % 2 == 0 || kernel.size() != channels * channels * k * k || bias.size() != channels) {
    throw ValidationError("kernel/bias do not match the input channels", "align.kernel");
  }
  const long half = static_cast<long>(k / 2);
  Tensor out(input.shape());
  for (std::size_t o = 0; o < channels; ++o) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        double acc = bias[o];
        for (std::size_t i = 0; i < channels; ++i) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long sy = static_cast<long>(y) + static_cast<long>(ky) - half;
            if (sy < 0 || sy >= static_cast<long>(height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long sx = static_cast<long>(x) + static_cast<long>(kx) - half;
              if (sx < 0 || sx >= static_cast<long>(width)) continue;
              acc += kernel[((o * channels + i) * k + ky) * k + kx] *
                     input.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor align_frame(const Tensor& frame, const Tensor& reference, const AlignParams& params) {
  require_same_shape(frame, reference, "reference");
  if (frame.rank() != 3) throw ValidationError("expected a [C,H,W] frame", "frame");
  params.validate(frame.dim(0));
  Tensor diff(frame.shape());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = frame[i] - reference[i];
  Tensor out = conv2d_same(silu(group_norm(diff, params.groups, params.epsilon)), params.kernel_size, params.kernel,
                           params.bias);
  if (params.residual_add) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += reference[i];
  }
  return out;
}

Tensor alignment_reference(const Tensor& intermediate, const Tensor& edited, double lambda) {
  validate_lambda(lambda);
  require_same_shape(intermediate, edited, "edited");
  if (bit_equal(intermediate, edited)) return intermediate;
  return blend_noise(intermediate, edited, lambda);
}

Engine Engine::analytic(const PipelineConfig& config) {
  NoiseSchedule sched = config.schedule();
  return Engine{sched, make_label_denoiser(sched, config.height, config.width, config.image_sigma),
                make_video_denoiser(make_analytic_video_predictor(sched, config.video_sigma))};
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GenerationResult generate(const InstructionSet& set, const PipelineConfig& config, std::uint64_t seed) {
  config.validate();
  return generate(set, config, seed, Engine::analytic(config));
}

GenerationResult generate(const InstructionSet& set, const PipelineConfig& config, std::uint64_t seed,
                          const Engine& engine) {
  const auto total_start = Clock::now();
  config.validate();
  auto start = Clock::now();
  const CompiledInstructions compiled = compile(set);
  const Shape expected{config.channels(), config.height, config.width};
  if (set.image.pixels.shape() != expected) {
    throw ValidationError("image shape " + shape_to_string(set.image.pixels.shape()) + " differs from configured " +
                              shape_to_string(expected),
                          "image");
  }
  GenerationResult result;
  result.timings.image_ms += elapsed_ms(start);
  result.lambda = compiled.video_condition.lambda;
  result.seed = seed;

  result.intermediate = p_img(set.image, set.content, config.img_strength, stage_seed(seed, kImageStageStream),
                              engine.schedule, engine.image_denoiser, config.sampling_mode, &result.timings);

  start = Clock::now();
  result.edited = compiled.video_condition.trajectory
                      ? apply_trajectory(result.intermediate, *compiled.video_condition.trajectory, config.background)
                      : result.intermediate;
  result.timings.trajectory_ms += elapsed_ms(start);

  start = Clock::now();
  result.raw = p_video(result.intermediate, result.edited, compiled.video_condition.motion, result.lambda,
                       config.num_frames, stage_seed(seed, kVideoStageStream), engine.schedule,
                       engine.video_denoiser, config.sampling_mode);
  result.raw.frame_rate = config.frame_rate;

  const Tensor reference = alignment_reference(result.intermediate, result.edited, result.lambda);
  const AlignParams params = config.align_params();
  result.aligned.frame_rate = config.frame_rate;
  result.aligned.frames.reserve(result.raw.size());
  for (const Tensor& frame : result.raw.frames) {
    result.aligned.frames.push_back(clamp01(align_frame(frame, reference, params)));
  }
  result.timings.motion_ms += elapsed_ms(start);
  result.timings.total_ms = elapsed_ms(total_start);
  return result;
}

}  // namespace ivgen
