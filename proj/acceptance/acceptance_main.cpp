// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gate.hpp"
#include "ivgen/codec.hpp"
#include "ivgen/demo.hpp"
#include "ivgen/error.hpp"
#include "ivgen/eval.hpp"
#include "ivgen/gaussian_world.hpp"
#include "ivgen/random.hpp"
#include "ivgen/session.hpp"
#include "oracles.hpp"
#include "server_fixture.hpp"

using namespace ivgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

// A demo session for a random label pair and scene with a random drag of its
// first blob.
Session random_dragged_session(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> label(0, 3);
  std::uniform_int_distribution<int> delta(-3, 3);
  const std::string content = content_vocabulary()[label(rng)];
  const std::string motion = motion_vocabulary()[label(rng)];
  const std::uint64_t scene_seed = rng() % 1000;
  Session s = demo_session(content, motion, PipelineConfig{}, scene_seed);
  const SceneSpec scene = sample_scene(content, motion, scene_seed);
  int dx = 0, dy = 0;
  while (dx == 0 && dy == 0) {
    dx = delta(rng);
    dy = delta(rng);
  }
  s.instructions.trajectory = demo_drag(scene, dx, dy);
  s.seed = rng();
  return s;
}

// Pipeline conditioned on a single image for both predictions, aligned
// against that image.
std::pair<FrameStack, FrameStack> single_condition_run(const Tensor& image, const Session& s, const Engine& engine) {
  const FrameStack raw = p_video(image, image, s.instructions.motion, 0.5, s.config.num_frames,
                                 stage_seed(s.seed, kVideoStageStream), engine.schedule, engine.video_denoiser);
  FrameStack aligned;
  for (const Tensor& f : raw.frames) {
    Tensor a = align_frame(f, image, s.config.align_params());
    for (double& v : a.values()) v = std::clamp(v, 0.0, 1.0);
    aligned.frames.push_back(std::move(a));
  }
  return {raw, aligned};
}

bool stacks_bit_equal(const FrameStack& a, const FrameStack& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_equal(a[i], b[i])) return false;
  }
  return true;
}

Outcome lambda_endpoints() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240101);
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Session s = random_dragged_session(rng);
    const Engine engine = Engine::analytic(s.config);

    s.instructions.lambda = 1.0;
    const GenerationResult one = generate(s.instructions, s.config, s.seed, engine);
    s.instructions.lambda = 0.0;
    const GenerationResult zero = generate(s.instructions, s.config, s.seed, engine);

    // Edit ignored: x~ conditions both predictions. Edit only: x~' does.
    const auto [ignored_raw, ignored_aligned] = single_condition_run(one.intermediate, s, engine);
    const auto [edit_raw, edit_aligned] = single_condition_run(zero.edited, s, engine);
    InstructionSet no_traj = s.instructions;
    no_traj.trajectory.reset();
    const GenerationResult baseline = generate(no_traj, s.config, s.seed, engine);

    const bool pass = stacks_bit_equal(one.raw, ignored_raw) && stacks_bit_equal(one.aligned, ignored_aligned) &&
                      stacks_bit_equal(one.raw, baseline.raw) && stacks_bit_equal(one.aligned, baseline.aligned) &&
                      stacks_bit_equal(zero.raw, edit_raw) && stacks_bit_equal(zero.aligned, edit_aligned);
    ok += pass;
  }
  const double secs = seconds_since(start);
  return {ok == 20 && secs < 60.0, std::to_string(ok) + "/20 sessions bit-identical at both endpoints, " +
                                       fmt(secs, 3) + " s (budget 60 s)"};
}

Outcome analytic_sampler() {
  // Deterministic sampling from a 16x16x3 Gaussian world.
  const std::size_t size = 16;
  const Tensor mu = encode(render_frames(sample_scene("two_blobs", "static", 3, size, size), 1, size, size)[0]);
  const double sigma = 0.05;
  const auto world = GaussianWorld::single(mu, sigma);
  const NoiseSchedule sched = PipelineConfig{}.schedule();
  Denoiser<int> d = [&](const Tensor& z, int t, const int&) { return analytic_epsilon(world, z, t, sched); };
  Tensor mean(mu.shape(), 0.0);
  const int runs = 256;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng = make_rng(static_cast<std::uint64_t>(seed), 0xACC);
    const Tensor out = sample(d, sched, standard_normal(mu.shape(), rng), 0, SamplingMode::kDeterministic, 0);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += out[i] / runs;
  }
  const double err = max_abs_diff(mean, mu);

  // Two-component mixture against a Monte-Carlo posterior mean.
  const Tensor m1({1, 1, 2}, {0.8, -0.4}), m2({1, 1, 2}, {-0.6, 0.9});
  const auto mix = GaussianWorld::mixture({{0.35, m1, 0.25}, {0.65, m2, 0.4}});
  const std::vector<oracle::Component> omix{{0.35, {0.8, -0.4}, 0.25}, {0.65, {-0.6, 0.9}, 0.4}};
  double mc_err = 0.0;
  const std::vector<std::pair<double, std::vector<double>>> points{{0.5, {0.1, 0.2}}, {0.8, {-0.3, 0.6}},
                                                                   {0.3, {0.5, -0.5}}};
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& [a, z] = points[k];
    const Tensor e = analytic_epsilon_at(mix, Tensor({1, 1, 2}, z), a);
    const auto mc = oracle::mc_posterior_epsilon(omix, z, a, 1'000'000, 777 + k);
    for (std::size_t i = 0; i < 2; ++i) mc_err = std::max(mc_err, std::abs(e[i] - mc[i]));
  }
  return {err <= 0.02 && mc_err <= 1e-2, "256-seed mean max per-pixel error " + fmt(err) +
                                             " (<= 0.02); mixture vs 1e6-sample MC max error " + fmt(mc_err) +
                                             " (<= 1e-2)"};
}

Outcome score_consistency() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const NoiseSchedule sched = PipelineConfig{}.schedule();
  const std::vector<oracle::Component> ow{{0.45, {-0.7}, 0.3}, {0.55, {1.1}, 0.5}};
  const auto world = GaussianWorld::mixture({{0.45, Tensor({1}, {-0.7}), 0.3}, {0.55, Tensor({1}, {1.1}), 0.5}});
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const int t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(sched.num_steps()));
    const double a = sched.alpha_bar(t);
    const double z = -2.0 + 4.0 * u(rng);
    const double fd = oracle::fd_epsilon_1d(ow, z, a);
    const double e = analytic_epsilon(world, Tensor({1}, {z}), t, sched)[0];
    worst = std::max(worst, std::abs(e - fd) / std::max(std::abs(fd), 1e-12));
  }
  return {worst <= 1e-4, "max relative error vs finite differences " + fmt(worst, 3) + " at 10 points (<= 1e-4)"};
}

Outcome trajectory_fidelity() {
  std::mt19937_64 rng(4242);
  const std::vector<int> steps{-3, -2, -1, 1, 2, 3};
  std::uniform_int_distribution<std::size_t> pick(0, steps.size() - 1);
  const SceneSpec scene = sample_scene("one_blob", "static", 0);
  Session base = demo_session("one_blob", "static");
  const Engine engine = Engine::analytic(base.config);
  int hits = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dx = steps[pick(rng)], dy = steps[pick(rng)];
    Session s = base;
    s.instructions.trajectory = demo_drag(scene, dx, dy);
    s.instructions.lambda = 0.0;
    const GenerationResult r = generate(s.instructions, s.config, rng(), engine);
    const auto& bg = s.config.background;
    const auto before = oracle::centroid(r.intermediate.data(), 3, 32, 32, bg);
    const auto after = oracle::centroid(r.aligned[0].data(), 3, 32, 32, bg);
    hits += std::abs(after.x - before.x - dx) <= 0.5 && std::abs(after.y - before.y - dy) <= 0.5;
  }
  return {hits >= 48, std::to_string(hits) + "/50 trials within 0.5 px (need >= 48)"};
}

Outcome alignment_exactness() {
  const Session s = demo_session("three_blobs", "static");
  const Tensor xt = generate(s.instructions, s.config, 1).intermediate;
  AlignParams p = AlignParams::identity(3);
  p.residual_add = false;
  bool zero = true;
  for (double v : align_frame(xt, xt, p).values()) zero = zero && v == 0.0;
  p.residual_add = true;
  const bool residual = bit_equal(align_frame(xt, xt, p), xt);

  std::vector<double> frame, ref, diff;
  for (int i = 0; i < 16; ++i) {
    frame.push_back(0.3 + 0.04 * ((i * 5) % 7));
    ref.push_back(0.1 + 0.03 * ((i * 3) % 4));
    diff.push_back(frame.back() - ref.back());
  }
  AlignParams one = AlignParams::identity(1);
  one.residual_add = false;
  const Tensor got = align_frame(Tensor({1, 4, 4}, frame), Tensor({1, 4, 4}, ref), one);
  const auto expect = oracle::groupnorm_silu(diff, one.epsilon);
  double err = 0.0;
  for (std::size_t i = 0; i < 16; ++i) err = std::max(err, std::abs(got[i] - expect[i]));
  return {zero && residual && err <= 1e-6, std::string("zero case ") + (zero ? "exact" : "NOT exact") +
                                               ", residual case " + (residual ? "exact" : "NOT exact") +
                                               ", 4x4 group norm max error " + fmt(err, 3) + " (<= 1e-6)"};
}

json random_patch(std::mt19937_64& rng, const PipelineConfig& config) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, 3);
  const std::string content = content_vocabulary()[label(rng)];
  const std::string motion = motion_vocabulary()[label(rng)];
  const std::uint64_t scene_seed = rng() % 1000;
  const Session demo = demo_session(content, motion, config, scene_seed);
  const SceneSpec scene = sample_scene(content, motion, scene_seed, config.height, config.width);
  json patch = {{"image", tensor_to_json(demo.instructions.image.pixels)},
                {"content", {{"label", content}}},
                {"motion", {{"label", motion}, {"magnitude", 0.5 + u(rng)}}},
                {"lambda", u(rng)}};
  if (rng() % 2) patch["trajectory"] = to_json(demo_drag(scene, static_cast<double>(rng() % 5) - 2.0, 1.0));
  return patch;
}

Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "ivgen_acceptance_persist";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ServiceConfig cfg;
  cfg.data_dir = dir;
  std::mt19937_64 rng(555);
  int ok = 0;
  for (int trial = 0; trial < 10; ++trial) {
    SessionManager writer(cfg), reader(cfg);
    const std::string id = writer.create_session(json{{"seed", rng() % 100000}});
    writer.put_instructions(id, random_patch(rng, writer.get(id).config), 0);
    const GenerationSummary first = writer.run_generate(id);
    writer.save_session(id, writer.data_path("s" + std::to_string(trial) + ".json"));
    const std::string loaded = reader.load_session(writer.data_path("s" + std::to_string(trial) + ".json"));
    const GenerationSummary again = reader.run_generate(loaded);
    ok += again.digests == first.digests && reader.get(loaded).last_record->digests == first.digests;
  }
  fs::remove_all(dir);
  return {ok == 10, std::to_string(ok) + "/10 sessions reproduce frame digests after save/load"};
}

Outcome latency() {
  const Session s = demo_session("one_blob", "drift_right");
  InstructionSet set = s.instructions;
  set.trajectory = demo_drag(sample_scene("one_blob", "drift_right", 0), 2, 0);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto start = Clock::now();
    generate(set, s.config, static_cast<std::uint64_t>(i));
    worst = std::max(worst, seconds_since(start));
  }
  const LatencyReport report = measure_latency(set, s.config, 3);
  const std::string table = report.to_table();
  bool columns = true;
  for (const char* c : {"Image Instruction", "Content Instruction", "Motion Instruction", "Trajectory Instruction"}) {
    columns = columns && table.find(c) != std::string::npos;
  }
  return {worst < 2.0 && columns, "default generate (8x3x32x32, T=50) slowest of 3 runs " + fmt(worst * 1000, 4) +
                                      " ms (< 2 s); bench table columns " + (columns ? "present" : "MISSING")};
}

Outcome alignment_metrics() {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> label(0, 3);
  // The metric itself: a scene's rendered video scored against its own first
  // frame and against another random scene's. Pipeline output is reported
  // alongside for information only.
  int image_hits = 0, pipeline_hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::string ca = content_vocabulary()[label(rng)], ma = motion_vocabulary()[label(rng)];
    const std::uint64_t seed_a = rng() % 100000;
    std::string cb = content_vocabulary()[label(rng)];
    std::uint64_t seed_b = rng() % 100000;
    while (cb == ca && seed_b == seed_a) seed_b = rng() % 100000;
    const SceneSpec a = sample_scene(ca, ma, seed_a), b = sample_scene(cb, motion_vocabulary()[label(rng)], seed_b);
    const FrameStack frames = render_frames(a, 8, 32, 32);
    const Tensor ref_a = render_frames(a, 1, 32, 32)[0], ref_b = render_frames(b, 1, 32, 32)[0];
    image_hits += image_alignment(frames, ref_a) > image_alignment(frames, ref_b);

    const Session sa = demo_session(ca, ma, {}, seed_a);
    const FrameStack generated = generate(sa.instructions, sa.config, rng()).aligned;
    pipeline_hits += image_alignment(generated, ref_a) > image_alignment(generated, ref_b);
  }

  const TextPrototypes protos = TextPrototypes::build(content_vocabulary(), 32, 32);
  int text_hits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::string& truth = content_vocabulary()[static_cast<std::size_t>(trial) % 4];
    // Seeds disjoint from the 16 used to build the prototypes.
    const SceneSpec scene = sample_scene(truth, "static", 1000 + static_cast<std::uint64_t>(trial));
    text_hits += best_label(render_frames(scene, 1, 32, 32), protos) == truth;
  }
  return {image_hits >= 95 && text_hits >= 90, "matched > mismatched image alignment on " +
                                                    std::to_string(image_hits) + "/100 pairs (>= 95); text argmax " +
                                                    std::to_string(text_hits) + "/100 (>= 90); generated videos " +
                                                    std::to_string(pipeline_hits) + "/100 (informational)"};
}

Outcome service_contract() {
  // Exclusion: the first generation is held in flight while a second request arrives.
  Gate gate;
  std::atomic<int> entered{0};
  TestServer server("ivgen_acceptance_service", [&](const InstructionSet& set, const PipelineConfig& c,
                                                    std::uint64_t seed) {
    if (entered.fetch_add(1) == 0) gate.enter_and_wait();
    return generate(set, c, seed);
  });
  auto client = server.client();
  auto created = client.Post("/sessions", json{{"config", {{"height", 16}, {"width", 16}}}}.dump(), "application/json");
  if (!created || created->status != 201) return {false, "could not create a session"};
  const std::string id = json::parse(created->body)["id"];
  auto first = std::async(std::launch::async, [&] {
    auto c = server.client();
    auto r = c.Post("/sessions/" + id + "/generate", "", "application/json");
    return r ? r->status : -1;
  });
  gate.wait_entered();
  auto second = client.Post("/sessions/" + id + "/generate", "", "application/json");
  const int second_status = second ? second->status : -1;
  gate.open();
  const int first_status = first.get();
  const bool exclusion = first_status == 200 && second_status == 409;

  // 100 randomized mutations from four clients racing on one session.
  std::mutex mutex;
  std::vector<std::uint64_t> accepted;
  int rejected_ok = 0, unexpected = 0;
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(w));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      auto c = server.client();
      for (int k = 0; k < 25; ++k) {
        auto current = c.Get("/sessions/" + id);
        const std::uint64_t rev = json::parse(current->body)["revision"].get<std::uint64_t>();
        json body;
        const auto kind = rng() % 4;
        if (kind == 0) {
          body = {{"expected_revision", rev + 5}, {"lambda", u(rng)}};  // stale
        } else if (kind == 1) {
          body = {{"expected_revision", rev}, {"lambda", 2.0 + u(rng)}};  // invalid
        } else {
          body = {{"expected_revision", rev}, {"lambda", u(rng)}};
        }
        auto r = c.Put("/sessions/" + id + "/instructions", body.dump(), "application/json");
        std::lock_guard lock(mutex);
        if (!r) {
          ++unexpected;
        } else if (r->status == 200) {
          accepted.push_back(json::parse(r->body)["revision"].get<std::uint64_t>());
        } else if (r->status == 409 || r->status == 400) {
          ++rejected_ok;
        } else {
          ++unexpected;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  std::sort(accepted.begin(), accepted.end());
  bool gapless = true;
  for (std::size_t i = 0; i < accepted.size(); ++i) gapless = gapless && accepted[i] == i + 1;
  auto final_doc = client.Get("/sessions/" + id);
  const std::uint64_t final_rev = json::parse(final_doc->body)["revision"].get<std::uint64_t>();
  gapless = gapless && final_rev == accepted.size() && unexpected == 0;

  return {exclusion && gapless, "concurrent generate -> " + std::to_string(first_status) + " + " +
                                    std::to_string(second_status) + "; 100 mutations: " +
                                    std::to_string(accepted.size()) + " accepted as revisions 1.." +
                                    std::to_string(final_rev) + (gapless ? " gapless" : " WITH GAPS") + ", " +
                                    std::to_string(rejected_ok) + " rejected"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"lambda-endpoint identity", lambda_endpoints},
      {"analytic-sampler correctness", analytic_sampler},
      {"score-gradient consistency", score_consistency},
      {"trajectory fidelity", trajectory_fidelity},
      {"frame-alignment exactness", alignment_exactness},
      {"determinism and persistence", persistence},
      {"latency budget", latency},
      {"alignment-metric sanity", alignment_metrics},
      {"service contract", service_contract},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
