#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ivgen/tensor.hpp"

namespace ivgen {

enum class ScheduleKind { kLinear, kCosine };
enum class SamplingMode { kDeterministic, kStochastic };

std::string to_string(ScheduleKind kind);
std::string to_string(SamplingMode mode);
ScheduleKind parse_schedule_kind(const std::string& name);
SamplingMode parse_sampling_mode(const std::string& name);

// Variance schedule over steps 1..T. Index 0 holds the clean-signal
// convention alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  // Validates 0 < beta < 1 and that alpha_bar is strictly decreasing and positive.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int num_steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int t) const;
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  const std::vector<double>& betas() const noexcept { return betas_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }

 private:
  std::vector<double> betas_;       // betas_[t-1] = beta_t
  std::vector<double> alpha_bars_;  // alpha_bars_[t], alpha_bars_[0] = 1
};

// Linear interpolates beta evenly from beta_start to beta_end. Cosine follows
// the squared-cosine alpha_bar curve (offset 0.008, betas capped at 0.999);
// beta_start/beta_end are validated but do not shape the cosine curve.
NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end, ScheduleKind kind);

// Floor applied to alpha_bar before dividing by its square root.
inline constexpr double kAlphaBarFloor = 1e-8;

// sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps, for 1 <= t <= T.
Tensor forward_diffuse(const Tensor& z0, const Tensor& eps, int t, const NoiseSchedule& sched);

// Same mixing for an explicit alpha_bar value in [0,1].
Tensor diffuse_at(const Tensor& z0, const Tensor& eps, double alpha_bar);

// lambda * eps + (1 - lambda) * eps_prime. The endpoints return exact copies.
Tensor blend_noise(const Tensor& eps, const Tensor& eps_prime, double lambda);

// Inverts the forward mixing: (z_t - sqrt(1 - a) eps) / sqrt(a).
// Throws NumericalDomainError when alpha_bar is zero or not finite.
Tensor predict_z0_at(const Tensor& z_t, const Tensor& eps_hat, double alpha_bar);
Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched);

// One update z_t -> z_{t-1}. Deterministic mode re-projects the predicted z0
// to step t-1 with the same eps_hat. Stochastic mode uses the ancestral
// posterior variance and requires `noise` for t > 1.
Tensor reverse_step(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& sched,
                    SamplingMode mode, const std::optional<Tensor>& noise = std::nullopt);

// Noise prediction for the current chain state at step t.
using StepPredictor = std::function<Tensor(const Tensor& z_t, int t)>;

// Runs reverse_step from `start_step` down to 1. Stochastic noise for every
// step is drawn from a stream seeded by `seed`.
Tensor run_chain(const StepPredictor& predict, const NoiseSchedule& sched, Tensor z_start, int start_step,
                 SamplingMode mode, std::uint64_t seed);

// Denoiser role: (z_t, t, condition) -> predicted noise of the same shape.
template <class Condition>
using Denoiser = std::function<Tensor(const Tensor& z_t, int t, const Condition& condition)>;

template <class Condition>
Tensor sample(const Denoiser<Condition>& denoiser, const NoiseSchedule& sched, Tensor z_T,
              const Condition& condition, SamplingMode mode, std::uint64_t seed) {
  StepPredictor predict = [&](const Tensor& z, int t) { return denoiser(z, t, condition); };
  return run_chain(predict, sched, std::move(z_T), sched.num_steps(), mode, seed);
}

}  // namespace ivgen
