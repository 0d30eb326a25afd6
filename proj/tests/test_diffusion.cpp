#include <cmath>

#include "doctest.h"
#include "ivgen/diffusion.hpp"
#include "ivgen/error.hpp"
#include "ivgen/random.hpp"
#include "oracles.hpp"

using namespace ivgen;

namespace {

Tensor scalar(double v) { return Tensor({1}, {v}); }

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  Rng rng = make_rng(seed, 99);
  return standard_normal(shape, rng);
}

}  // namespace

TEST_CASE("build_schedule: single step") {
  const auto s = build_schedule(1, 0.5, 0.5, ScheduleKind::kLinear);
  CHECK(s.num_steps() == 1);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.alpha_bar(0) == 1.0);
}

TEST_CASE("build_schedule: two steps") {
  const auto s = build_schedule(2, 0.1, 0.2, ScheduleKind::kLinear);
  CHECK(s.beta(1) == doctest::Approx(0.1));
  CHECK(s.beta(2) == doctest::Approx(0.2));
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-14));
}

TEST_CASE("build_schedule: T=1000 matches log-domain product oracle") {
  const auto s = build_schedule(1000, 1e-4, 0.02, ScheduleKind::kLinear);
  std::vector<double> betas;
  for (int t = 1; t <= 1000; ++t) betas.push_back(1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
  const double a = oracle::alpha_bar_log_domain(betas);
  const double b = oracle::alpha_bar_reverse_product(betas);
  CHECK(std::abs(a - b) / a < 1e-10);
  CHECK(std::abs(s.alpha_bar(1000) - a) / a < 1e-10);
  for (int t = 1; t <= 1000; ++t) CHECK(s.beta(t) == doctest::Approx(betas[t - 1]).epsilon(1e-12));
}

TEST_CASE("build_schedule: alpha_bar strictly decreasing in (0,1]") {
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kCosine}) {
    for (int T : {1, 2, 10, 50, 1000}) {
      const auto s = build_schedule(T, 1e-4, 0.02, kind);
      for (int t = 0; t < T; ++t) CHECK(s.alpha_bar(t + 1) < s.alpha_bar(t));
      for (int t = 0; t <= T; ++t) {
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) <= 1.0);
      }
    }
  }
}

TEST_CASE("build_schedule: cosine betas capped") {
  const auto s = build_schedule(20, 1e-4, 0.02, ScheduleKind::kCosine);
  for (int t = 1; t <= 20; ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) <= 0.999);
  }
}

TEST_CASE("build_schedule: validation errors") {
  CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2, ScheduleKind::kLinear), ValidationError);
  CHECK_THROWS_AS(build_schedule(-3, 0.1, 0.2, ScheduleKind::kLinear), ValidationError);
  CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2, ScheduleKind::kLinear), ValidationError);
  CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0, ScheduleKind::kLinear), ValidationError);
  CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2, ScheduleKind::kLinear), ValidationError);
  CHECK_THROWS_AS(build_schedule(10, -0.1, 0.2, ScheduleKind::kCosine), ValidationError);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({}), ValidationError);
  CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.5}), ValidationError);
  const auto s = build_schedule(3, 0.1, 0.2, ScheduleKind::kLinear);
  CHECK_THROWS_AS(s.beta(0), ValidationError);
  CHECK_THROWS_AS(s.alpha_bar(4), ValidationError);
}

TEST_CASE("schedule and sampling names round trip") {
  CHECK(parse_schedule_kind(to_string(ScheduleKind::kCosine)) == ScheduleKind::kCosine);
  CHECK(parse_schedule_kind(to_string(ScheduleKind::kLinear)) == ScheduleKind::kLinear);
  CHECK(parse_sampling_mode(to_string(SamplingMode::kStochastic)) == SamplingMode::kStochastic);
  CHECK_THROWS_AS(parse_schedule_kind("quadratic"), ValidationError);
  CHECK_THROWS_AS(parse_sampling_mode("ancestral?"), ValidationError);
}

TEST_CASE("forward_diffuse examples") {
  const Tensor z0 = scalar(2.0), eps = scalar(-1.0);
  CHECK(diffuse_at(z0, eps, 1.0)[0] == 2.0);
  CHECK(diffuse_at(z0, eps, 0.0)[0] == -1.0);
  CHECK(diffuse_at(z0, eps, 0.25)[0] == doctest::Approx(0.5 * 2.0 - std::sqrt(0.75)).epsilon(1e-15));
  CHECK(diffuse_at(z0, eps, 0.25)[0] == doctest::Approx(0.1340).epsilon(1e-3));

  const auto s = build_schedule(1, 0.75, 0.75, ScheduleKind::kLinear);
  CHECK(forward_diffuse(z0, eps, 1, s)[0] == doctest::Approx(0.1340).epsilon(1e-3));
}

TEST_CASE("forward_diffuse errors") {
  const auto s = build_schedule(4, 0.1, 0.2, ScheduleKind::kLinear);
  CHECK_THROWS_AS(forward_diffuse(Tensor({2}), Tensor({3}), 1, s), ValidationError);
  CHECK_THROWS_AS(forward_diffuse(Tensor({2}), Tensor({2}), 0, s), ValidationError);
  CHECK_THROWS_AS(forward_diffuse(Tensor({2}), Tensor({2}), 5, s), ValidationError);
}

TEST_CASE("blend_noise examples and endpoints") {
  CHECK(blend_noise(scalar(0.2), scalar(0.4), 0.5)[0] == doctest::Approx(0.3).epsilon(1e-15));
  const Tensor a = random_tensor({2, 3, 4}, 1), b = random_tensor({2, 3, 4}, 2);
  CHECK(bit_equal(blend_noise(a, b, 1.0), a));
  CHECK(bit_equal(blend_noise(a, b, 0.0), b));
  CHECK_THROWS_AS(blend_noise(a, b, 1.5), ValidationError);
  CHECK_THROWS_AS(blend_noise(a, b, -0.01), ValidationError);
  CHECK_THROWS_AS(blend_noise(a, Tensor({2, 3}), 0.5), ValidationError);
}

TEST_CASE("blend_noise linearity property") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = random_tensor({3, 5}, seed), b = random_tensor({3, 5}, seed + 100);
    const double lambda = static_cast<double>(seed) / 19.0;
    const Tensor ab = blend_noise(a, b, lambda), ba = blend_noise(b, a, lambda);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(ab[i] + ba[i] - (a[i] + b[i])) <= 1e-12);
  }
}

TEST_CASE("reverse_step examples") {
  // Predicted z0 inverts the forward example.
  CHECK(predict_z0_at(scalar(0.5 * 2.0 - std::sqrt(0.75)), scalar(-1.0), 0.25)[0] ==
        doctest::Approx(2.0).epsilon(1e-14));

  // With alpha_bar_{t-1} = 1 (t = 1) and exact eps, the step lands on z0.
  const auto s = build_schedule(3, 0.1, 0.3, ScheduleKind::kLinear);
  const Tensor z0 = random_tensor({4}, 5), eps = random_tensor({4}, 6);
  const Tensor z1 = forward_diffuse(z0, eps, 1, s);
  const Tensor out = reverse_step(z1, eps, 1, s, SamplingMode::kDeterministic);
  CHECK(max_abs_diff(out, z0) < 1e-14);
}

TEST_CASE("reverse_step round trip for alpha_bar >= 1e-4") {
  const auto s = build_schedule(50, 0.002, 0.4, ScheduleKind::kLinear);
  for (int t = 1; t <= 50; ++t) {
    if (s.alpha_bar(t) < 1e-4) continue;
    const Tensor z0 = random_tensor({3, 4, 4}, t), eps = random_tensor({3, 4, 4}, 1000 + t);
    const Tensor z0_hat = predict_z0(forward_diffuse(z0, eps, t, s), eps, t, s);
    for (std::size_t i = 0; i < z0.size(); ++i) {
      CHECK(std::abs(z0_hat[i] - z0[i]) <= 1e-6 * std::max(1.0, std::abs(z0[i])));
    }
  }
}

TEST_CASE("reverse_step deterministic re-projection") {
  const auto s = build_schedule(10, 0.01, 0.2, ScheduleKind::kLinear);
  const Tensor z = random_tensor({6}, 7), e = random_tensor({6}, 8);
  const int t = 6;
  const Tensor out = reverse_step(z, e, t, s, SamplingMode::kDeterministic);
  const double a = s.alpha_bar(t), ap = s.alpha_bar(t - 1);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x0 = (z[i] - std::sqrt(1 - a) * e[i]) / std::sqrt(a);
    CHECK(out[i] == doctest::Approx(std::sqrt(ap) * x0 + std::sqrt(1 - ap) * e[i]).epsilon(1e-12));
  }
}

TEST_CASE("reverse_step stochastic uses posterior variance") {
  const auto s = build_schedule(10, 0.01, 0.2, ScheduleKind::kLinear);
  const Tensor z = random_tensor({6}, 7), e = random_tensor({6}, 8), n = random_tensor({6}, 9);
  const int t = 5;
  const double a = s.alpha_bar(t), ap = s.alpha_bar(t - 1);
  const double var = (1 - ap) / (1 - a) * (1 - a / ap);
  const Tensor out = reverse_step(z, e, t, s, SamplingMode::kStochastic, n);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x0 = (z[i] - std::sqrt(1 - a) * e[i]) / std::sqrt(a);
    const double dir = std::sqrt(1 - ap - var) * e[i];
    CHECK(out[i] == doctest::Approx(std::sqrt(ap) * x0 + dir + std::sqrt(var) * n[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(reverse_step(z, e, t, s, SamplingMode::kStochastic), ValidationError);
  // t = 1 needs no noise.
  CHECK_NOTHROW(reverse_step(z, e, 1, s, SamplingMode::kStochastic));
}

TEST_CASE("reverse_step errors") {
  CHECK_THROWS_AS(predict_z0_at(scalar(1.0), scalar(1.0), 0.0), NumericalDomainError);
  CHECK_THROWS_AS(predict_z0_at(scalar(1.0), scalar(1.0), std::nan("")), NumericalDomainError);
  const auto s = build_schedule(3, 0.1, 0.3, ScheduleKind::kLinear);
  CHECK_THROWS_AS(reverse_step(scalar(1.0), scalar(1.0), 0, s, SamplingMode::kDeterministic), ValidationError);
  CHECK_THROWS_AS(reverse_step(scalar(1.0), Tensor({2}), 1, s, SamplingMode::kDeterministic), ValidationError);
}

TEST_CASE("alpha_bar floor keeps tiny values finite") {
  const Tensor out = predict_z0_at(scalar(1.0), scalar(0.0), 1e-300);
  CHECK(std::isfinite(out[0]));
  CHECK(out[0] == doctest::Approx(1.0 / std::sqrt(kAlphaBarFloor)));
}

TEST_CASE("sample: T=1 exact eps recovers z0") {
  const auto s = build_schedule(1, 0.3, 0.3, ScheduleKind::kLinear);
  const Tensor z0 = random_tensor({2, 2}, 11), eps = random_tensor({2, 2}, 12);
  const Tensor zT = forward_diffuse(z0, eps, 1, s);
  Denoiser<int> exact = [&](const Tensor&, int, const int&) { return eps; };
  CHECK(max_abs_diff(sample(exact, s, zT, 0, SamplingMode::kDeterministic, 0), z0) < 1e-14);
}

TEST_CASE("sample: determinism and seed dependence") {
  const auto s = build_schedule(8, 0.01, 0.3, ScheduleKind::kLinear);
  Denoiser<double> d = [](const Tensor& z, int t, const double& c) {
    Tensor out = z;
    for (double& v : out.values()) v = 0.5 * v + c / t;
    return out;
  };
  const Tensor zT = random_tensor({3, 3}, 3);
  CHECK(bit_equal(sample(d, s, zT, 0.3, SamplingMode::kDeterministic, 1),
                  sample(d, s, zT, 0.3, SamplingMode::kDeterministic, 2)));
  CHECK(bit_equal(sample(d, s, zT, 0.3, SamplingMode::kStochastic, 5),
                  sample(d, s, zT, 0.3, SamplingMode::kStochastic, 5)));
  CHECK_FALSE(bit_equal(sample(d, s, zT, 0.3, SamplingMode::kStochastic, 5),
                        sample(d, s, zT, 0.3, SamplingMode::kStochastic, 6)));
}

TEST_CASE("sample: shape preservation and denoiser shape check") {
  const auto s = build_schedule(4, 0.01, 0.3, ScheduleKind::kLinear);
  for (const Shape& shape : {Shape{1}, Shape{2, 3}, Shape{3, 4, 5}, Shape{2, 3, 2, 2}}) {
    Denoiser<int> d = [](const Tensor& z, int, const int&) { return z; };
    const Tensor out = sample(d, s, random_tensor(shape, 1), 0, SamplingMode::kStochastic, 1);
    CHECK(out.shape() == shape);
  }
  Denoiser<int> bad = [](const Tensor&, int, const int&) { return Tensor({7}); };
  CHECK_THROWS_AS(sample(bad, s, random_tensor({2}, 1), 0, SamplingMode::kDeterministic, 0), ValidationError);
}
