#include <cmath>

#include "doctest.h"
#include "ivgen/demo.hpp"
#include "ivgen/error.hpp"
#include "ivgen/eval.hpp"
#include "ivgen/random.hpp"

using namespace ivgen;

namespace {

Tensor render(const std::string& content, std::uint64_t seed, std::size_t size = 32) {
  return render_frames(sample_scene(content, "static", seed, size, size), 1, size, size)[0];
}

double norm(const EmbeddingVector& e) {
  double s = 0.0;
  for (double v : e.values) s += v * v;
  return std::sqrt(s);
}

Tensor upsample2(const Tensor& t) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) out.at(k, y, x) = t.at(k, y / 2, x / 2);
    }
  }
  return out;
}

FrameStack single(const Tensor& t) { return FrameStack{{t}, 8.0}; }

}  // namespace

TEST_CASE("embed: unit norm and determinism") {
  for (const auto& c : content_vocabulary()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const EmbeddingVector e = embed(render(c, seed));
      CHECK(std::abs(norm(e) - 1.0) <= 1e-6);
      CHECK_FALSE(e.degenerate);
      CHECK(e.values == embed(render(c, seed)).values);
    }
  }
}

TEST_CASE("embed: constant image falls back to a flagged unit vector") {
  const EmbeddingVector e = embed(Tensor({3, 8, 8}, 0.4));
  CHECK(e.degenerate);
  CHECK(std::abs(norm(e) - 1.0) <= 1e-12);
}

TEST_CASE("embed: invariant under exact 2x upsampling") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor small = render("three_blobs", seed, 16);
    const EmbeddingVector a = embed(small), b = embed(upsample2(small));
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6);
  }
  // Grid cells that split pixels (H not divisible by the grid).
  Rng rng = make_rng(4, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor odd({3, 7, 9});
  for (double& v : odd.values()) v = u(rng);
  const EmbeddingVector a = embed(odd), b = embed(upsample2(odd));
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-6);
}

TEST_CASE("embed: errors") {
  CHECK_THROWS_AS(embed(Tensor({4, 4})), ValidationError);
  Tensor bad({3, 4, 4}, 0.2);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(embed(bad), ValidationError);
}

TEST_CASE("cosine of constructed orthogonal features is zero") {
  EmbeddingVector a{{1.0, 0.0, 0.0}, false}, b{{0.0, 0.6, 0.8}, false};
  CHECK(std::abs(cosine(a, b)) <= 1e-6);
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine(a, EmbeddingVector{{1.0}, false}), ValidationError);
}

TEST_CASE("image_alignment: identity, symmetry and frame order") {
  const Tensor a = render("two_blobs", 1), b = render("big_blob", 2), c = render("one_blob", 3);
  CHECK(image_alignment(FrameStack{{a, a, a}, 8.0}, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(image_alignment(single(a), b) - image_alignment(single(b), a)) <= 1e-9);
  CHECK(std::abs(image_alignment(FrameStack{{a, b, c}, 8.0}, c) - image_alignment(FrameStack{{c, a, b}, 8.0}, c)) <=
        1e-12);
  const double s = image_alignment(FrameStack{{a, b}, 8.0}, c);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
  CHECK_THROWS_AS(image_alignment(FrameStack{}, a), ValidationError);
}

TEST_CASE("text_alignment: prototypes") {
  const TextPrototypes p = TextPrototypes::build(content_vocabulary(), 32, 32);
  for (const auto& label : content_vocabulary()) {
    const EmbeddingVector& proto = p.prototype(label);
    CHECK(cosine(proto, proto) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(text_alignment(single(render("one_blob", 0)), "cat", p), ValidationError);
  CHECK_THROWS_AS(TextPrototypes::build({}, 32, 32), ConfigError);
}

TEST_CASE("text_alignment: canonical renders pick their own label") {
  const TextPrototypes p = TextPrototypes::build(content_vocabulary(), 32, 32);
  for (const auto& label : content_vocabulary()) {
    CHECK(best_label(render_frames(sample_scene(label, "static", 0), 3, 32, 32), p) == label);
  }
}

TEST_CASE("text_alignment: argmax invariant under embedding rescaling") {
  // Scaling the image contrast around the background scales the centered
  // features; the unit-normalized embedding and the argmax do not change.
  const TextPrototypes p = TextPrototypes::build(content_vocabulary(), 32, 32);
  const SceneSpec s = sample_scene("two_blobs", "static", 9);
  const Tensor img = render_frames(s, 1, 32, 32)[0];
  Tensor scaled = img;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        scaled.at(c, y, x) = s.background[c] + 0.5 * (img.at(c, y, x) - s.background[c]);
      }
    }
  }
  const EmbeddingVector a = embed(img), b = embed(scaled);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-9);
  CHECK(best_label(single(img), p) == best_label(single(scaled), p));
}

TEST_CASE("measure_latency") {
  Session s = demo_session("one_blob", "drift_right");
  s.instructions.trajectory = demo_drag(sample_scene("one_blob", "drift_right", 0), 2, 0);
  const LatencyReport one = measure_latency(s.instructions, s.config, 1);
  REQUIRE(one.runs.size() == 1);
  CHECK(one.median.image_ms == one.runs[0].image_ms);
  CHECK(one.median.content_ms == one.runs[0].content_ms);
  CHECK(one.median.motion_ms == one.runs[0].motion_ms);
  CHECK(one.median.trajectory_ms == one.runs[0].trajectory_ms);
  CHECK(one.median.total_ms == one.runs[0].total_ms);

  const LatencyReport r = measure_latency(s.instructions, s.config, 3);
  for (const auto& t : r.runs) {
    CHECK(t.image_ms >= 0.0);
    CHECK(t.content_ms >= 0.0);
    CHECK(t.motion_ms >= 0.0);
    CHECK(t.trajectory_ms >= 0.0);
  }
  // Video generation is the slow phase at the default config.
  CHECK(r.median.motion_ms > r.median.image_ms);
  CHECK(r.median.motion_ms > r.median.content_ms);
  CHECK(r.median.motion_ms > r.median.trajectory_ms);

  const std::string table = r.to_table();
  for (const char* col : {"Image Instruction", "Content Instruction", "Motion Instruction", "Trajectory Instruction"}) {
    CHECK(table.find(col) != std::string::npos);
  }
  const json j = json::parse(r.to_json().dump());
  CHECK(j["repetitions"] == 3);
  CHECK(j["median"]["motion_instruction_ms"].get<double>() == r.median.motion_ms);
  CHECK_THROWS_AS(measure_latency(s.instructions, s.config, 0), ValidationError);
}
