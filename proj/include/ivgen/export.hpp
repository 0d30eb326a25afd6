#pragma once

#include <filesystem>

#include "ivgen/session.hpp"

namespace ivgen {

inline constexpr const char* kManifestFormat = "ivgen-result";

// Writes raw_NNN.png, aligned_NNN.png, intermediate.png, edited.png and
// manifest.json into `dir` (created if missing). The manifest embeds the
// session document with this result recorded, so it can be fed back to
// `ivgen generate` to reproduce the same frames.
json export_result(const Session& session, const GenerationResult& result, const std::filesystem::path& dir);

// Accepts either a session file or a result manifest.
Session read_session_or_manifest(const std::filesystem::path& path);

}  // namespace ivgen
