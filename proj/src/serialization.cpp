#include "ivgen/serialization.hpp"

#include <algorithm>
#include <cmath>

#include "ivgen/codec.hpp"
#include "ivgen/error.hpp"

namespace ivgen {
namespace {

constexpr const char* kTensorEncoding = "f64le-base64";
constexpr const char* kMaskEncoding = "u8-base64";

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ValidationError("expected an object", path);
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError("missing field", join(path, key));
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("expected a number", path);
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError("expected a finite number", path);
  return v;
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ValidationError("expected a non-negative integer", path);
  return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError("expected a string", path);
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ValidationError("expected a boolean", path);
  return j.get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("expected an array of numbers", path);
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], indexed(path, i)));
  return out;
}

std::vector<Point> points(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("expected an array of points", path);
  std::vector<Point> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(point_from_json(j[i], indexed(path, i)));
  return out;
}

Shape shape_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty shape array", path);
  Shape s;
  for (std::size_t i = 0; i < j.size(); ++i) s.push_back(count(j[i], indexed(path, i)));
  return s;
}

Stroke stroke_from_json(const json& j, const std::string& path) {
  Stroke s;
  s.polyline = points(field(j, "points", path), join(path, "points"));
  s.radius = number(field(j, "radius", path), join(path, "radius"));
  s.color = numbers(field(j, "color", path), join(path, "color"));
  return s;
}

ContentInstruction content_from_json(const json& j, const std::string& path) {
  ContentInstruction c;
  c.label = text(field(j, "label", path), join(path, "label"));
  if (auto it = j.find("strokes"); it != j.end()) {
    if (!it->is_array()) throw ValidationError("expected an array", join(path, "strokes"));
    for (std::size_t i = 0; i < it->size(); ++i) {
      c.strokes.push_back(stroke_from_json((*it)[i], indexed(join(path, "strokes"), i)));
    }
  }
  return c;
}

MotionInstruction motion_from_json(const json& j, const std::string& path) {
  MotionInstruction m;
  m.label = text(field(j, "label", path), join(path, "label"));
  if (auto it = j.find("magnitude"); it != j.end() && !it->is_null()) {
    m.magnitude = number(*it, join(path, "magnitude"));
  }
  return m;
}

TrajectoryInstruction trajectory_from_json(const json& j, const std::string& path) {
  TrajectoryInstruction r;
  r.handles = points(field(j, "handles", path), join(path, "handles"));
  r.targets = points(field(j, "targets", path), join(path, "targets"));
  r.mask = mask_from_json(field(j, "mask", path), join(path, "mask"));
  return r;
}

AlignParams align_from_json(const json& j, std::size_t channels, const std::string& path) {
  AlignParams p = AlignParams::identity(channels);
  if (auto it = j.find("groups"); it != j.end()) p.groups = count(*it, join(path, "groups"));
  if (auto it = j.find("epsilon"); it != j.end()) p.epsilon = number(*it, join(path, "epsilon"));
  if (auto it = j.find("kernel_size"); it != j.end()) p.kernel_size = count(*it, join(path, "kernel_size"));
  if (auto it = j.find("kernel"); it != j.end()) p.kernel = numbers(*it, join(path, "kernel"));
  if (auto it = j.find("bias"); it != j.end()) p.bias = numbers(*it, join(path, "bias"));
  if (auto it = j.find("residual_add"); it != j.end()) p.residual_add = boolean(*it, join(path, "residual_add"));
  return p;
}

}  // namespace

json tensor_to_json(const Tensor& t) {
  const auto bytes = tensor_bytes(t);
  return {{"shape", t.shape()}, {"range", {0.0, 1.0}}, {"encoding", kTensorEncoding}, {"data", base64_encode(bytes)}};
}

Tensor tensor_from_json(const json& j, const std::string& path) {
  const Shape shape = shape_of(field(j, "shape", path), join(path, "shape"));
  if (auto it = j.find("encoding"); it != j.end() && text(*it, join(path, "encoding")) != kTensorEncoding) {
    throw ValidationError("unsupported encoding", join(path, "encoding"));
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(text(field(j, "data", path), join(path, "data")));
    return tensor_from_bytes(shape, bytes);
  } catch (const ValidationError& e) {
    if (!e.field().empty()) throw;
    throw ValidationError(e.what(), join(path, "data"));
  }
}

json mask_to_json(const Mask& m) {
  return {{"shape", {m.height(), m.width()}}, {"encoding", kMaskEncoding}, {"data", base64_encode(m.bits())}};
}

Mask mask_from_json(const json& j, const std::string& path) {
  const Shape shape = shape_of(field(j, "shape", path), join(path, "shape"));
  if (shape.size() != 2) throw ValidationError("mask shape must be [H,W]", join(path, "shape"));
  if (auto it = j.find("encoding"); it != j.end() && text(*it, join(path, "encoding")) != kMaskEncoding) {
    throw ValidationError("unsupported encoding", join(path, "encoding"));
  }
  try {
    auto bits = base64_decode(text(field(j, "data", path), join(path, "data")));
    return Mask(shape[0], shape[1], std::move(bits));
  } catch (const ValidationError& e) {
    if (!e.field().empty() && e.field() != "mask") throw;
    throw ValidationError(e.what(), join(path, "data"));
  }
}

json point_to_json(Point p) { return json::array({p.x, p.y}); }

Point point_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected [x, y]", path);
  return {number(j[0], indexed(path, 0)), number(j[1], indexed(path, 1))};
}

json to_json(const SceneSpec& scene) {
  json blobs = json::array();
  for (const Blob& b : scene.blobs) {
    blobs.push_back({{"center", point_to_json(b.center)},
                     {"velocity", point_to_json(b.velocity)},
                     {"radius", b.radius},
                     {"intensity", b.intensity}});
  }
  return {{"blobs", blobs},
          {"background", scene.background},
          {"content_label", scene.content_label},
          {"motion_label", scene.motion_label},
          {"canvas", {scene.height, scene.width}}};
}

SceneSpec scene_from_json(const json& j, const std::string& path) {
  SceneSpec s;
  const json& blobs = field(j, "blobs", path);
  if (!blobs.is_array()) throw ValidationError("expected an array", join(path, "blobs"));
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const std::string bp = indexed(join(path, "blobs"), i);
    Blob b;
    b.center = point_from_json(field(blobs[i], "center", bp), join(bp, "center"));
    b.velocity = point_from_json(field(blobs[i], "velocity", bp), join(bp, "velocity"));
    b.radius = number(field(blobs[i], "radius", bp), join(bp, "radius"));
    b.intensity = numbers(field(blobs[i], "intensity", bp), join(bp, "intensity"));
    s.blobs.push_back(std::move(b));
  }
  s.background = numbers(field(j, "background", path), join(path, "background"));
  s.content_label = text(field(j, "content_label", path), join(path, "content_label"));
  s.motion_label = text(field(j, "motion_label", path), join(path, "motion_label"));
  const Shape canvas = shape_of(field(j, "canvas", path), join(path, "canvas"));
  if (canvas.size() != 2) throw ValidationError("canvas must be [H,W]", join(path, "canvas"));
  s.height = canvas[0];
  s.width = canvas[1];
  validate_scene(s);
  return s;
}

json to_json(const Stroke& s) {
  json pts = json::array();
  for (Point p : s.polyline) pts.push_back(point_to_json(p));
  return {{"points", pts}, {"radius", s.radius}, {"color", s.color}};
}

json to_json(const TrajectoryInstruction& r) {
  json handles = json::array(), targets = json::array();
  for (Point p : r.handles) handles.push_back(point_to_json(p));
  for (Point p : r.targets) targets.push_back(point_to_json(p));
  return {{"handles", handles}, {"targets", targets}, {"mask", mask_to_json(r.mask)}};
}

json to_json(const InstructionSet& set) {
  json strokes = json::array();
  for (const Stroke& s : set.content.strokes) strokes.push_back(to_json(s));
  return {{"image", tensor_to_json(set.image.pixels)},
          {"content", {{"label", set.content.label}, {"strokes", strokes}}},
          {"motion",
           {{"label", set.motion.label},
            {"magnitude", set.motion.magnitude ? json(*set.motion.magnitude) : json(nullptr)}}},
          {"trajectory", set.trajectory ? to_json(*set.trajectory) : json(nullptr)},
          {"lambda", set.lambda}};
}

InstructionSet instructions_from_json(const json& j, const std::string& path) {
  InstructionSet set;
  set.image.pixels = tensor_from_json(field(j, "image", path), join(path, "image"));
  set.content = content_from_json(field(j, "content", path), join(path, "content"));
  set.motion = motion_from_json(field(j, "motion", path), join(path, "motion"));
  if (auto it = j.find("trajectory"); it != j.end() && !it->is_null()) {
    set.trajectory = trajectory_from_json(*it, join(path, "trajectory"));
  }
  if (auto it = j.find("lambda"); it != j.end()) set.lambda = number(*it, join(path, "lambda"));
  validate_instructions(set);
  return set;
}

InstructionSet merge_instructions(const InstructionSet& set, const json& patch) {
  if (!patch.is_object()) throw ValidationError("expected an object", "instructions");
  static const std::vector<std::string> kKnown{"image", "content", "motion", "trajectory", "lambda"};
  for (const auto& item : patch.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), item.key()) == kKnown.end()) {
      throw ValidationError("unknown field", item.key());
    }
  }
  InstructionSet out = set;
  if (auto it = patch.find("image"); it != patch.end()) out.image.pixels = tensor_from_json(*it, "image");
  if (auto it = patch.find("content"); it != patch.end()) out.content = content_from_json(*it, "content");
  if (auto it = patch.find("motion"); it != patch.end()) out.motion = motion_from_json(*it, "motion");
  if (auto it = patch.find("trajectory"); it != patch.end()) {
    if (it->is_null()) {
      out.trajectory.reset();
    } else {
      out.trajectory = trajectory_from_json(*it, "trajectory");
    }
  }
  if (auto it = patch.find("lambda"); it != patch.end()) out.lambda = number(*it, "lambda");
  validate_instructions(out);
  return out;
}

json to_json(const AlignParams& p) {
  return {{"groups", p.groups}, {"epsilon", p.epsilon},         {"kernel_size", p.kernel_size},
          {"kernel", p.kernel}, {"bias", p.bias},               {"residual_add", p.residual_add}};
}

json to_json(const PipelineConfig& c) {
  return {{"height", c.height},
          {"width", c.width},
          {"num_frames", c.num_frames},
          {"schedule",
           {{"kind", to_string(c.schedule_kind)},
            {"steps", c.steps},
            {"beta_start", c.beta_start},
            {"beta_end", c.beta_end}}},
          {"sampling_mode", to_string(c.sampling_mode)},
          {"img_strength", c.img_strength},
          {"image_sigma", c.image_sigma},
          {"video_sigma", c.video_sigma},
          {"background", c.background},
          {"align", c.align ? to_json(*c.align) : json(nullptr)},
          {"frame_rate", c.frame_rate}};
}

PipelineConfig config_from_json(const json& j, const PipelineConfig& base, const std::string& path) {
  if (!j.is_object()) throw ValidationError("expected an object", path);
  PipelineConfig c = base;
  if (auto it = j.find("height"); it != j.end()) c.height = count(*it, join(path, "height"));
  if (auto it = j.find("width"); it != j.end()) c.width = count(*it, join(path, "width"));
  if (auto it = j.find("num_frames"); it != j.end()) c.num_frames = count(*it, join(path, "num_frames"));
  if (auto it = j.find("schedule"); it != j.end()) {
    const std::string sp = join(path, "schedule");
    if (!it->is_object()) throw ValidationError("expected an object", sp);
    if (auto s = it->find("kind"); s != it->end()) c.schedule_kind = parse_schedule_kind(text(*s, join(sp, "kind")));
    if (auto s = it->find("steps"); s != it->end()) c.steps = static_cast<int>(count(*s, join(sp, "steps")));
    if (auto s = it->find("beta_start"); s != it->end()) c.beta_start = number(*s, join(sp, "beta_start"));
    if (auto s = it->find("beta_end"); s != it->end()) c.beta_end = number(*s, join(sp, "beta_end"));
  }
  if (auto it = j.find("sampling_mode"); it != j.end()) {
    c.sampling_mode = parse_sampling_mode(text(*it, join(path, "sampling_mode")));
  }
  if (auto it = j.find("img_strength"); it != j.end()) c.img_strength = number(*it, join(path, "img_strength"));
  if (auto it = j.find("image_sigma"); it != j.end()) c.image_sigma = number(*it, join(path, "image_sigma"));
  if (auto it = j.find("video_sigma"); it != j.end()) c.video_sigma = number(*it, join(path, "video_sigma"));
  if (auto it = j.find("background"); it != j.end()) c.background = numbers(*it, join(path, "background"));
  if (auto it = j.find("align"); it != j.end()) {
    if (it->is_null()) {
      c.align.reset();
    } else {
      if (!it->is_object()) throw ValidationError("expected an object", join(path, "align"));
      c.align = align_from_json(*it, c.channels(), join(path, "align"));
    }
  }
  if (auto it = j.find("frame_rate"); it != j.end()) c.frame_rate = number(*it, join(path, "frame_rate"));
  c.validate();
  return c;
}

json to_json(const PhaseTimings& t) {
  return {{"image_instruction_ms", t.image_ms},
          {"content_instruction_ms", t.content_ms},
          {"motion_instruction_ms", t.motion_ms},
          {"trajectory_instruction_ms", t.trajectory_ms},
          {"total_ms", t.total_ms}};
}

json to_json(const FrameStack& stack) {
  json frames = json::array();
  for (const Tensor& f : stack.frames) frames.push_back(tensor_to_json(f));
  return {{"frame_rate", stack.frame_rate}, {"frames", frames}};
}

json result_digests(const GenerationResult& result) {
  json raw = json::array(), aligned = json::array();
  for (const Tensor& f : result.raw.frames) raw.push_back(tensor_digest(f));
  for (const Tensor& f : result.aligned.frames) aligned.push_back(tensor_digest(f));
  return {{"intermediate", tensor_digest(result.intermediate)},
          {"edited", tensor_digest(result.edited)},
          {"raw", raw},
          {"aligned", aligned}};
}

}  // namespace ivgen
