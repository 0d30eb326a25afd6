#pragma once

#include <vector>

#include "ivgen/diffusion.hpp"
#include "ivgen/tensor.hpp"

namespace ivgen {

struct GaussianComponent {
  double weight = 1.0;
  Tensor mean;
  double sigma = 0.0;  // isotropic standard deviation
};

// Data distribution with a closed-form optimal noise predictor: a single
// isotropic Gaussian or a finite mixture of them.
class GaussianWorld {
 public:
  static GaussianWorld single(Tensor mean, double sigma);
  static GaussianWorld mixture(std::vector<GaussianComponent> components);

  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  const Shape& shape() const { return components_.front().mean.shape(); }
  bool is_single() const noexcept { return components_.size() == 1; }

 private:
  std::vector<GaussianComponent> components_;
};

// E[eps | z_t] for data drawn from `world`, at noise level alpha_bar.
Tensor analytic_epsilon_at(const GaussianWorld& world, const Tensor& z_t, double alpha_bar);
Tensor analytic_epsilon(const GaussianWorld& world, const Tensor& z_t, int t, const NoiseSchedule& sched);

}  // namespace ivgen
