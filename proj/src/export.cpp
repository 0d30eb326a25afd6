#include "ivgen/export.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ivgen/codec.hpp"
#include "ivgen/error.hpp"

namespace ivgen {
namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string frame_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.png", prefix, i);
  return buf;
}

}  // namespace

json export_result(const Session& session, const GenerationResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json files = json::object();
  write_bytes(dir / "intermediate.png", encode_png(result.intermediate));
  write_bytes(dir / "edited.png", encode_png(result.edited));
  files["intermediate"] = "intermediate.png";
  files["edited"] = "edited.png";
  json raw = json::array(), aligned = json::array();
  for (std::size_t i = 0; i < result.raw.size(); ++i) {
    write_bytes(dir / frame_name("raw", i), encode_png(result.raw[i]));
    write_bytes(dir / frame_name("aligned", i), encode_png(result.aligned[i]));
    raw.push_back(frame_name("raw", i));
    aligned.push_back(frame_name("aligned", i));
  }
  files["raw"] = raw;
  files["aligned"] = aligned;

  Session recorded = session;
  recorded.last_record = ResultRecord{result.seed, result.lambda, session.revision, result_digests(result)};

  json manifest = {{"format", kManifestFormat},
                   {"version", 1},
                   {"seed", result.seed},
                   {"lambda", result.lambda},
                   {"num_frames", result.raw.size()},
                   {"frame_rate", result.raw.frame_rate},
                   {"config", to_json(session.config)},
                   {"timings", to_json(result.timings)},
                   {"digests", result_digests(result)},
                   {"files", files},
                   {"session", session_to_json(recorded)}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << std::setw(2) << manifest << '\n';
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  return manifest;
}

Session read_session_or_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), path.string());
  }
  if (doc.is_object() && doc.value("format", "") == kManifestFormat) {
    if (!doc.contains("session")) throw SchemaError("manifest has no embedded session", "session");
    return session_from_json(doc["session"]);
  }
  return session_from_json(doc);
}

}  // namespace ivgen
