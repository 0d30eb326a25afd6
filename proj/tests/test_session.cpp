#include <filesystem>
#include <future>
#include <thread>

#include "doctest.h"
#include "gate.hpp"
#include "ivgen/demo.hpp"
#include "ivgen/error.hpp"
#include "ivgen/session.hpp"

using namespace ivgen;
namespace fs = std::filesystem;

namespace {

ServiceConfig test_config(const std::string& name) {
  ServiceConfig c;
  c.data_dir = fs::temp_directory_path() / name;
  fs::remove_all(c.data_dir);
  fs::create_directories(c.data_dir);
  return c;
}

json small() { return {{"config", {{"height", 16}, {"width", 16}, {"num_frames", 3}}}}; }

}  // namespace

TEST_CASE("create_session defaults") {
  SessionManager m(test_config("ivgen_session_a"));
  const std::string id = m.create_session();
  const Session s = m.get(id);
  CHECK(s.revision == 0);
  CHECK(s.instructions.lambda == kDefaultLambda);
  CHECK(s.instructions.content.strokes.empty());
  CHECK_FALSE(s.instructions.trajectory.has_value());
  CHECK(s.instructions.image.pixels.shape() == Shape{3, 32, 32});
  for (double v : s.instructions.image.pixels.values()) CHECK(v == s.config.background[0]);
  CHECK(m.create_session() != id);
  CHECK(m.list().size() == 2);
}

TEST_CASE("create_session caps") {
  SessionManager m(test_config("ivgen_session_b"));
  try {
    m.create_session(json{{"config", {{"height", 4096}}}});
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(e.limit() == "max_resolution");
    CHECK(e.cap() == 512);
    CHECK(std::string(e.what()).find("512") != std::string::npos);
  }
  CHECK_THROWS_AS(m.create_session(json{{"config", {{"num_frames", 65}}}}), CapacityError);
  CHECK_THROWS_AS(m.create_session(json{{"config", {{"schedule", {{"steps", 5000}}}}}}), CapacityError);
  CHECK_THROWS_AS(m.create_session(json{{"config", {{"height", "tall"}}}}), ValidationError);
  CHECK_THROWS_AS(m.create_session(json{{"seed", -1}}), ValidationError);

  ServiceConfig tiny = test_config("ivgen_session_c");
  tiny.max_sessions = 2;
  SessionManager t(tiny);
  t.create_session();
  t.create_session();
  try {
    t.create_session();
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(e.limit() == "max_sessions");
  }
}

TEST_CASE("put_instructions merges and bumps the revision") {
  SessionManager m(test_config("ivgen_session_d"));
  const std::string id = m.create_session();
  CHECK(m.put_instructions(id, json{{"lambda", 0.3}}, 0) == 1);
  CHECK(m.get(id).instructions.lambda == 0.3);
  CHECK(m.get(id).revision == 1);

  const Session before = m.get(id);
  CHECK_THROWS_AS(m.put_instructions(id, json{{"lambda", 0.9}}, 0), ConflictError);
  CHECK(m.get(id).instructions == before.instructions);
  CHECK(m.get(id).revision == 1);

  CHECK_THROWS_AS(m.put_instructions("nope", json{{"lambda", 0.9}}, 0), NotFoundError);
  CHECK_THROWS_AS(m.put_instructions(id, json{{"lambda", 7.0}}, 1), ValidationError);
  CHECK(m.get(id).revision == 1);
}

TEST_CASE("put_instructions: handle outside mask names TrajectoryInstruction") {
  SessionManager m(test_config("ivgen_session_e"));
  const std::string id = m.create_session();
  TrajectoryInstruction r;
  r.handles = {{3, 3}};
  r.targets = {{5, 3}};
  r.mask = Mask::disk(32, 32, {20, 20}, 2.0);
  try {
    m.put_instructions(id, json{{"trajectory", to_json(r)}}, 0);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("TrajectoryInstruction") != std::string::npos);
    CHECK(e.field() == "trajectory.handles[0]");
  }
  CHECK(m.get(id).revision == 0);
}

TEST_CASE("put_instructions: image must keep the session resolution") {
  SessionManager m(test_config("ivgen_session_f"));
  const std::string id = m.create_session();
  CHECK_THROWS_AS(m.put_instructions(id, json{{"image", tensor_to_json(Tensor({3, 8, 8}, 0.5))}}, 0),
                  ValidationError);
}

TEST_CASE("run_generate: summary, determinism and untouched inputs") {
  SessionManager m(test_config("ivgen_session_g"));
  const std::string id = m.create_session(small());
  const Session before = m.get(id);
  const GenerationSummary a = m.run_generate(id);
  const GenerationSummary b = m.run_generate(id);
  CHECK(a.num_frames == 3);
  CHECK(a.digests == b.digests);
  CHECK(a.digests["raw"].size() == 3);
  CHECK(m.get(id).instructions == before.instructions);
  CHECK(m.get(id).revision == before.revision);
  const GenerationSummary c = m.run_generate(id, 77);
  CHECK(c.seed == 77);
  CHECK_THROWS_AS(m.run_generate("missing"), NotFoundError);
}

TEST_CASE("run_generate: engine errors surface verbatim") {
  SessionManager m(test_config("ivgen_session_h"),
                   [](const InstructionSet&, const PipelineConfig&, std::uint64_t) -> GenerationResult {
                     throw NumericalDomainError("boom");
                   });
  const std::string id = m.create_session(small());
  CHECK_THROWS_WITH_AS(m.run_generate(id), "boom", NumericalDomainError);
  // The busy flag is released after a failure.
  CHECK_THROWS_AS(m.run_generate(id), NumericalDomainError);
}

TEST_CASE("run_generate: one of two concurrent calls is busy") {
  Gate gate;
  SessionManager m(test_config("ivgen_session_i"),
                   [&](const InstructionSet& set, const PipelineConfig& c, std::uint64_t seed) {
                     gate.enter_and_wait();
                     return generate(set, c, seed);
                   });
  const std::string id = m.create_session(small());
  auto first = std::async(std::launch::async, [&] { return m.run_generate(id); });
  gate.wait_entered();
  CHECK_THROWS_AS(m.run_generate(id), BusyError);
  // The busy flag is visible while the generation runs.
  CHECK(m.describe(id)["generating"] == true);
  gate.open();
  CHECK(first.get().num_frames == 3);
  CHECK(m.describe(id)["generating"] == false);
}

TEST_CASE("run_generate: different sessions in parallel both succeed") {
  SessionManager m(test_config("ivgen_session_j"));
  const std::string a = m.create_session(small()), b = m.create_session(small());
  auto fa = std::async(std::launch::async, [&] { return m.run_generate(a); });
  auto fb = std::async(std::launch::async, [&] { return m.run_generate(b); });
  CHECK(fa.get().num_frames == 3);
  CHECK(fb.get().num_frames == 3);
}

TEST_CASE("get_frames") {
  SessionManager m(test_config("ivgen_session_k"));
  const std::string id = m.create_session(small());
  CHECK_THROWS_AS(m.get_frames(id, FrameVariant::kRaw, 0, 1), NotFoundError);
  m.run_generate(id);
  CHECK(m.get_frames(id, FrameVariant::kRaw, 1, 1).empty());
  const auto all = m.get_frames(id, FrameVariant::kAligned, 0, 3);
  CHECK(all.size() == 3);
  const auto again = m.get_frames(id, FrameVariant::kAligned, 0, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(all[i].png == again[i].png);
    CHECK(all[i].index == i);
  }
  CHECK_THROWS_AS(m.get_frames(id, FrameVariant::kRaw, 0, 4), ValidationError);
  CHECK_THROWS_AS(m.get_frames(id, FrameVariant::kRaw, 2, 1), ValidationError);
  CHECK(parse_frame_variant("raw") == FrameVariant::kRaw);
  CHECK_THROWS_AS(parse_frame_variant("both"), ValidationError);
}

TEST_CASE("save and load round trip reproduces digests") {
  ServiceConfig cfg = test_config("ivgen_session_l");
  SessionManager m(cfg);
  const std::string id = m.create_session(small());
  const SceneSpec scene = sample_scene("one_blob", "static", 0, 16, 16);
  Session demo = demo_session("one_blob", "static", m.get(id).config);
  m.put_instructions(id, json{{"image", tensor_to_json(demo.instructions.image.pixels)},
                              {"trajectory", to_json(demo_drag(scene, 1, 2))},
                              {"lambda", 0.2}},
                     0);
  const GenerationSummary first = m.run_generate(id, 5);
  m.save_session(id, m.data_path("saved.json"));

  SessionManager other(cfg);
  const std::string loaded = other.load_session(m.data_path("saved.json"));
  CHECK(loaded == id);
  const Session a = m.get(id), b = other.get(loaded);
  CHECK(a.instructions == b.instructions);
  CHECK(a.config == b.config);
  CHECK(a.seed == b.seed);
  CHECK(a.revision == b.revision);
  REQUIRE(b.last_record.has_value());
  CHECK(b.last_record->digests == first.digests);
  const GenerationSummary again = other.run_generate(loaded, b.last_record->seed);
  CHECK(again.digests == first.digests);

  CHECK_THROWS_AS(other.load_session(m.data_path("saved.json")), ConflictError);
  CHECK_THROWS_AS(other.load_session(m.data_path("absent.json")), NotFoundError);
}

TEST_CASE("data_path rejects traversal") {
  SessionManager m(test_config("ivgen_session_m"));
  CHECK_THROWS_AS(m.data_path("../x.json"), ValidationError);
  CHECK_THROWS_AS(m.data_path("a/b.json"), ValidationError);
  CHECK_THROWS_AS(m.data_path(".."), ValidationError);
  CHECK_THROWS_AS(m.data_path(""), ValidationError);
  CHECK(m.data_path("ok.json").filename() == "ok.json");
}

TEST_CASE("ServiceConfig validation") {
  ServiceConfig c;
  c.max_sessions = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.port = 70000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
