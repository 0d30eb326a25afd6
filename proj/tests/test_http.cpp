#include <fstream>
#include <future>

#include "doctest.h"
#include "gate.hpp"
#include "ivgen/codec.hpp"
#include "ivgen/demo.hpp"
#include "server_fixture.hpp"

using namespace ivgen;

namespace {

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

std::string create(httplib::Client& c, const json& body = {{"config", {{"height", 16}, {"width", 16}, {"num_frames", 3}}}}) {
  auto r = c.Post("/sessions", body.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return body_of(r)["id"].get<std::string>();
}

}  // namespace

TEST_CASE("health") {
  TestServer server("ivgen_http_health");
  auto c = server.client();
  auto r = c.Get("/health");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(body_of(r)["status"] == "ok");
}

TEST_CASE("create, describe and edit") {
  TestServer server("ivgen_http_edit");
  auto c = server.client();
  const std::string id = create(c);
  auto r = c.Get("/sessions/" + id);
  REQUIRE(r);
  CHECK(r->status == 200);
  json doc = body_of(r);
  CHECK(doc["revision"] == 0);
  CHECK(doc["instructions"]["lambda"] == 0.5);

  r = c.Put("/sessions/" + id + "/instructions", json{{"expected_revision", 0}, {"lambda", 0.3}}.dump(),
            "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(body_of(r)["revision"] == 1);
  CHECK(body_of(c.Get("/sessions/" + id))["instructions"]["lambda"] == 0.3);

  // Expected revision via header, patch wrapped in "instructions".
  httplib::Headers h{{"If-Match", "\"1\""}};
  r = c.Put("/sessions/" + id + "/instructions", h, json{{"instructions", {{"lambda", 0.4}}}}.dump(),
            "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(body_of(r)["revision"] == 2);

  // Stale revision.
  r = c.Put("/sessions/" + id + "/instructions", json{{"expected_revision", 0}, {"lambda", 0.9}}.dump(),
            "application/json");
  REQUIRE(r);
  CHECK(r->status == 409);
  CHECK(body_of(r)["error"] == "conflict");

  // Missing revision, bad field, unknown key, malformed body.
  r = c.Put("/sessions/" + id + "/instructions", json{{"lambda", 0.9}}.dump(), "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["field"] == "expected_revision");
  r = c.Put("/sessions/" + id + "/instructions", json{{"expected_revision", 2}, {"lambda", 9}}.dump(),
            "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["field"] == "lambda");
  r = c.Put("/sessions/" + id + "/instructions", json{{"expected_revision", 2}, {"colour", 1}}.dump(),
            "application/json");
  CHECK(r->status == 400);
  r = c.Put("/sessions/" + id + "/instructions", "{not json", "application/json");
  CHECK(r->status == 400);
  CHECK(body_of(r)["field"] == "body");
  CHECK(body_of(c.Get("/sessions/" + id))["revision"] == 2);
}

TEST_CASE("errors map onto statuses") {
  TestServer server("ivgen_http_errors");
  auto c = server.client();
  auto r = c.Get("/sessions/unknown");
  REQUIRE(r);
  CHECK(r->status == 404);
  r = c.Post("/sessions", json{{"config", {{"height", 4096}}}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 422);
  CHECK(body_of(r)["limit"] == "max_resolution");
  CHECK(body_of(r)["cap"] == 512);
  const std::string id = create(c);
  r = c.Get("/sessions/" + id + "/frames");
  CHECK(r->status == 404);
  r = c.Post("/sessions/" + id + "/generate", json{{"seed", "x"}}.dump(), "application/json");
  CHECK(r->status == 400);
}

TEST_CASE("generate and fetch frames") {
  TestServer server("ivgen_http_frames");
  auto c = server.client();
  const std::string id = create(c);
  auto r = c.Post("/sessions/" + id + "/generate", json{{"seed", 4}}.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  const json summary = body_of(r);
  CHECK(summary["num_frames"] == 3);
  CHECK(summary["seed"] == 4);
  CHECK(summary["timings"].contains("motion_instruction_ms"));

  r = c.Get("/sessions/" + id + "/frames?variant=raw");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  json frames = body_of(r)["frames"];
  REQUIRE(frames.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto png = base64_decode(frames[i]["data"].get<std::string>());
    const Tensor t = decode_png(png);
    CHECK(t.shape() == Shape{3, 16, 16});
    CHECK(frames[i]["digest"] == summary["digests"]["raw"][i]);
  }

  r = c.Get("/sessions/" + id + "/frames?variant=aligned&from=1&to=1");
  CHECK(body_of(r)["frames"].empty());
  r = c.Get("/sessions/" + id + "/frames?variant=aligned&from=0&to=9");
  CHECK(r->status == 400);
  r = c.Get("/sessions/" + id + "/frames?variant=sideways");
  CHECK(r->status == 400);
  r = c.Get("/sessions/" + id + "/frames?from=-1");
  CHECK(r->status == 400);

  auto png1 = c.Get("/sessions/" + id + "/frames?variant=aligned&from=2&to=3&format=png");
  auto png2 = c.Get("/sessions/" + id + "/frames?variant=aligned&from=2&to=3&format=png");
  REQUIRE(png1);
  CHECK(png1->status == 200);
  CHECK(png1->get_header_value("Content-Type") == "image/png");
  CHECK(png1->body == png2->body);
  CHECK(png1->get_header_value("X-Frame-Digest") == summary["digests"]["aligned"][2]);
}

TEST_CASE("save and load over HTTP") {
  TestServer server("ivgen_http_persist");
  auto c = server.client();
  const std::string id = create(c);
  auto r = c.Post("/sessions/" + id + "/generate", "", "application/json");
  REQUIRE(r->status == 200);
  const json digests = body_of(r)["digests"];
  r = c.Post("/sessions/" + id + "/save", json{{"path", "kept.json"}}.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);

  // The id is taken; loading again conflicts.
  r = c.Post("/sessions/load", json{{"path", "kept.json"}}.dump(), "application/json");
  CHECK(r->status == 409);

  TestServer fresh("ivgen_http_persist_2");
  std::filesystem::copy_file(std::filesystem::temp_directory_path() / "ivgen_http_persist" / "kept.json",
                             std::filesystem::temp_directory_path() / "ivgen_http_persist_2" / "kept.json");
  auto c2 = fresh.client();
  r = c2.Post("/sessions/load", json{{"path", "kept.json"}}.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  CHECK(body_of(r)["id"] == id);
  r = c2.Post("/sessions/" + id + "/generate", "", "application/json");
  CHECK(body_of(r)["digests"] == digests);

  r = c2.Post("/sessions/load", json{{"path", "../etc/passwd"}}.dump(), "application/json");
  CHECK(r->status == 400);
  r = c2.Post("/sessions/load", json{{"path", "absent.json"}}.dump(), "application/json");
  CHECK(r->status == 404);
  {
    std::ofstream(std::filesystem::temp_directory_path() / "ivgen_http_persist_2" / "v9.json")
        << json{{"format", "ivgen-session"}, {"version", 9}}.dump();
  }
  r = c2.Post("/sessions/load", json{{"path", "v9.json"}}.dump(), "application/json");
  CHECK(r->status == 422);
  CHECK(body_of(r)["location"] == "version");
}

TEST_CASE("concurrent generate on one session: one success, one conflict") {
  Gate gate;
  TestServer server("ivgen_http_busy", [&](const InstructionSet& set, const PipelineConfig& cfg, std::uint64_t seed) {
    gate.enter_and_wait();
    return generate(set, cfg, seed);
  });
  auto c = server.client();
  const std::string id = create(c);
  auto first = std::async(std::launch::async, [&] {
    auto cl = server.client();
    auto r = cl.Post("/sessions/" + id + "/generate", "", "application/json");
    return r ? r->status : -1;
  });
  gate.wait_entered();
  auto r = c.Post("/sessions/" + id + "/generate", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 409);
  CHECK(body_of(r)["error"] == "busy");
  gate.open();
  CHECK(first.get() == 200);
}
