#include "ivgen/gaussian_world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ivgen/error.hpp"

namespace ivgen {
namespace {

Tensor single_epsilon(const Tensor& mean, double sigma, const Tensor& z_t, double alpha_bar) {
  const double a = std::sqrt(alpha_bar);
  const double scale = std::sqrt(1.0 - alpha_bar) / (alpha_bar * sigma * sigma + 1.0 - alpha_bar);
  Tensor out(z_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * (z_t[i] - a * mean[i]);
  return out;
}

}  // namespace

GaussianWorld GaussianWorld::single(Tensor mean, double sigma) {
  return mixture({GaussianComponent{1.0, std::move(mean), sigma}});
}

GaussianWorld GaussianWorld::mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw ValidationError("needs at least one component", "world.components");
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    const std::string path = "world.components[" + std::to_string(k) + "]";
    if (!(c.weight > 0.0)) throw ValidationError("weight must be positive", path + ".weight");
    if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw ValidationError("sigma must be >= 0", path + ".sigma");
    require_valid(c.mean, path + ".mean");
    require_same_shape(components.front().mean, c.mean, path + ".mean");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("weights must sum to 1", "world.components");
  GaussianWorld world;
  world.components_ = std::move(components);
  return world;
}

Tensor analytic_epsilon_at(const GaussianWorld& world, const Tensor& z_t, double alpha_bar) {
  require_same_shape(world.components().front().mean, z_t, "z_t");
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw NumericalDomainError("alpha_bar must lie in (0,1)");
  if (world.is_single()) {
    const auto& c = world.components().front();
    return single_epsilon(c.mean, c.sigma, z_t, alpha_bar);
  }

  // Posterior responsibilities of each component given z_t, in log space.
  const double a = std::sqrt(alpha_bar);
  const double dims = static_cast<double>(z_t.size());
  std::vector<double> log_resp;
  log_resp.reserve(world.components().size());
  for (const auto& c : world.components()) {
    const double var = alpha_bar * c.sigma * c.sigma + 1.0 - alpha_bar;
    double sq = 0.0;
    for (std::size_t i = 0; i < z_t.size(); ++i) {
      const double d = z_t[i] - a * c.mean[i];
      sq += d * d;
    }
    log_resp.push_back(std::log(c.weight) - 0.5 * dims * std::log(2.0 * std::numbers::pi * var) - 0.5 * sq / var);
  }
  const double peak = *std::max_element(log_resp.begin(), log_resp.end());
  double norm = 0.0;
  for (double& l : log_resp) norm += (l = std::exp(l - peak));

  Tensor out(z_t.shape());
  for (std::size_t k = 0; k < world.components().size(); ++k) {
    const auto& c = world.components()[k];
    const Tensor eps_k = single_epsilon(c.mean, c.sigma, z_t, alpha_bar);
    const double r = log_resp[k] / norm;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += r * eps_k[i];
  }
  return out;
}

Tensor analytic_epsilon(const GaussianWorld& world, const Tensor& z_t, int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.num_steps()) throw ValidationError("step " + std::to_string(t) + " out of range", "t");
  return analytic_epsilon_at(world, z_t, sched.alpha_bar(t));
}

}  // namespace ivgen
