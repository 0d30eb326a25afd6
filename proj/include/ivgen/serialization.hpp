#pragma once

#include "json.hpp"

#include <string>

#include "ivgen/instructions.hpp"
#include "ivgen/pipeline.hpp"
#include "ivgen/scene.hpp"

namespace ivgen {

using json = nlohmann::json;

// Canonical JSON forms shared by the session file, the HTTP API and the CLI.
// Readers throw ValidationError whose field() is the dotted path of the first
// offending value.

json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const json& j, const std::string& path);

json mask_to_json(const Mask& m);
Mask mask_from_json(const json& j, const std::string& path);

json point_to_json(Point p);
Point point_from_json(const json& j, const std::string& path);

json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const json& j, const std::string& path = "scene");

json to_json(const Stroke& s);
json to_json(const TrajectoryInstruction& r);
json to_json(const InstructionSet& set);
InstructionSet instructions_from_json(const json& j, const std::string& path = "");

// Merges the keys present in `patch` over `set` (image, content, motion,
// trajectory, lambda; "trajectory": null clears it) and validates the result.
InstructionSet merge_instructions(const InstructionSet& set, const json& patch);

json to_json(const AlignParams& p);
json to_json(const PipelineConfig& config);
// Keys absent from `j` keep their value from `base`.
PipelineConfig config_from_json(const json& j, const PipelineConfig& base = {}, const std::string& path = "config");

json to_json(const PhaseTimings& t);
json to_json(const FrameStack& stack);

// Digests of every artifact of a result (hex SHA-256 of tensor bytes).
json result_digests(const GenerationResult& result);

}  // namespace ivgen
