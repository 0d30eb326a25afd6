#include "ivgen/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "ivgen/error.hpp"
#include "ivgen/random.hpp"

namespace ivgen {

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::kLinear ? "linear" : "cosine"; }

std::string to_string(SamplingMode mode) {
  return mode == SamplingMode::kDeterministic ? "deterministic" : "stochastic";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ValidationError("unknown schedule kind '" + name + "'", "schedule.kind");
}

SamplingMode parse_sampling_mode(const std::string& name) {
  if (name == "deterministic") return SamplingMode::kDeterministic;
  if (name == "stochastic") return SamplingMode::kStochastic;
  throw ValidationError("unknown sampling mode '" + name + "'", "sampling_mode");
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ValidationError("schedule needs at least one step", "schedule.steps");
  NoiseSchedule s;
  s.alpha_bars_.reserve(betas.size() + 1);
  s.alpha_bars_.push_back(1.0);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const double b = betas[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw ValidationError("beta_" + std::to_string(i + 1) + " must lie in (0,1)", "schedule.betas");
    }
    const double next = s.alpha_bars_.back() * (1.0 - b);
    if (!(next > 0.0) || !(next < s.alpha_bars_.back()) || !std::isfinite(next)) {
      throw ValidationError("alpha_bar is not strictly decreasing and positive at step " + std::to_string(i + 1),
                            "schedule.betas");
    }
    s.alpha_bars_.push_back(next);
  }
  s.betas_ = std::move(betas);
  return s;
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > num_steps()) throw ValidationError("step " + std::to_string(t) + " out of range", "t");
  return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > num_steps()) throw ValidationError("step " + std::to_string(t) + " out of range", "t");
  return alpha_bars_[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end, ScheduleKind kind) {
  if (num_steps < 1) throw ValidationError("number of steps must be positive", "schedule.steps");
  if (!(beta_start > 0.0 && beta_start < 1.0)) throw ValidationError("must lie in (0,1)", "schedule.beta_start");
  if (!(beta_end > 0.0 && beta_end < 1.0)) throw ValidationError("must lie in (0,1)", "schedule.beta_end");
  if (beta_start > beta_end) throw ValidationError("beta_start exceeds beta_end", "schedule.beta_start");

  std::vector<double> betas(static_cast<std::size_t>(num_steps));
  if (kind == ScheduleKind::kLinear) {
    for (int t = 1; t <= num_steps; ++t) {
      const double frac = num_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (num_steps - 1);
      betas[static_cast<std::size_t>(t - 1)] = beta_start + (beta_end - beta_start) * frac;
    }
  } else {
    constexpr double kOffset = 0.008;
    auto f = [&](int t) {
      const double c = std::cos((static_cast<double>(t) / num_steps + kOffset) / (1.0 + kOffset) * std::numbers::pi / 2);
      return c * c;
    };
    for (int t = 1; t <= num_steps; ++t) {
      betas[static_cast<std::size_t>(t - 1)] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    }
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

Tensor diffuse_at(const Tensor& z0, const Tensor& eps, double alpha_bar) {
  require_same_shape(z0, eps, "eps");
  const double a = std::sqrt(alpha_bar);
  const double b = std::sqrt(1.0 - alpha_bar);
  Tensor out(z0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.num_steps()) throw ValidationError("step " + std::to_string(t) + " out of range", "t");
  return diffuse_at(z0, eps, sched.alpha_bar(t));
}

Tensor blend_noise(const Tensor& eps, const Tensor& eps_prime, double lambda) {
  require_same_shape(eps, eps_prime, "eps_prime");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("must lie in [0,1]", "lambda");
  if (lambda == 1.0) return eps;
  if (lambda == 0.0) return eps_prime;
  Tensor out(eps.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * eps[i] + (1.0 - lambda) * eps_prime[i];
  return out;
}

Tensor predict_z0_at(const Tensor& z_t, const Tensor& eps_hat, double alpha_bar) {
  require_same_shape(z_t, eps_hat, "eps_hat");
  if (!(alpha_bar > 0.0) || !std::isfinite(alpha_bar)) {
    throw NumericalDomainError("cannot invert forward mixing: alpha_bar = " + std::to_string(alpha_bar));
  }
  const double a = std::max(alpha_bar, kAlphaBarFloor);
  const double inv = 1.0 / std::sqrt(a);
  const double b = std::sqrt(1.0 - alpha_bar);
  Tensor out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - b * eps_hat[i]) * inv;
  return out;
}

Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.num_steps()) throw ValidationError("step " + std::to_string(t) + " out of range", "t");
  return predict_z0_at(z_t, eps_hat, sched.alpha_bar(t));
}

Tensor reverse_step(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched, SamplingMode mode,
                    const std::optional<Tensor>& noise) {
  const Tensor z0 = predict_z0(z_t, eps_hat, t, sched);
  const double ab_prev = sched.alpha_bar(t - 1);
  if (mode == SamplingMode::kDeterministic) return diffuse_at(z0, eps_hat, ab_prev);

  const double ab = sched.alpha_bar(t);
  const double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev);
  if (t > 1 && !noise) throw ValidationError("stochastic mode requires fresh noise for t > 1", "noise");
  if (noise) require_same_shape(z_t, *noise, "noise");
  const double a = std::sqrt(ab_prev);
  const double b = std::sqrt(std::max(0.0, 1.0 - ab_prev - var));
  const double s = std::sqrt(var);
  Tensor out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a * z0[i] + b * eps_hat[i] + (noise ? s * (*noise)[i] : 0.0);
  }
  return out;
}

Tensor run_chain(const StepPredictor& predict, const NoiseSchedule& sched, Tensor z_start, int start_step,
                 SamplingMode mode, std::uint64_t seed) {
  if (start_step < 0 || start_step > sched.num_steps()) {
    throw ValidationError("start step " + std::to_string(start_step) + " out of range", "t");
  }
  Rng rng = make_rng(seed, 0x5157);
  Tensor z = std::move(z_start);
  for (int t = start_step; t >= 1; --t) {
    Tensor eps = predict(z, t);
    require_same_shape(z, eps, "denoiser output");
    std::optional<Tensor> noise;
    if (mode == SamplingMode::kStochastic && t > 1) noise = standard_normal(z.shape(), rng);
    z = reverse_step(z, eps, t, sched, mode, noise);
  }
  return z;
}

}  // namespace ivgen
