#include "ivgen/session.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "ivgen/codec.hpp"
#include "ivgen/error.hpp"

namespace ivgen {
namespace {

std::string new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) {
    out.width(16);
    out.fill('0');
    out << rng();
  }
  return out.str();
}

json record_to_json(const ResultRecord& r) {
  return {{"seed", r.seed}, {"lambda", r.lambda}, {"revision", r.revision}, {"digests", r.digests}};
}

}  // namespace

void ServiceConfig::validate() const {
  if (max_sessions == 0 || max_resolution == 0 || max_frames == 0 || max_steps <= 0) {
    throw ConfigError("service caps must be positive");
  }
  if (port < 0 || port > 65535) throw ConfigError("port must lie in [0,65535]");
}

InstructionSet default_instructions(const PipelineConfig& config) {
  InstructionSet set;
  set.image.pixels = Tensor({config.channels(), config.height, config.width});
  for (std::size_t c = 0; c < config.channels(); ++c) {
    for (std::size_t y = 0; y < config.height; ++y) {
      for (std::size_t x = 0; x < config.width; ++x) set.image.pixels.at(c, y, x) = config.background[c];
    }
  }
  return set;
}

json session_to_json(const Session& s) {
  return {{"format", kSessionFormat},
          {"version", kSessionSchemaVersion},
          {"id", s.id},
          {"revision", s.revision},
          {"seed", s.seed},
          {"config", to_json(s.config)},
          {"instructions", to_json(s.instructions)},
          {"last_result", s.last_record ? record_to_json(*s.last_record) : json(nullptr)}};
}

Session session_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("session document must be a JSON object", "$");
  if (doc.value("format", "") != kSessionFormat) throw SchemaError("not an ivgen session file", "format");
  const auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer()) throw SchemaError("missing schema version", "version");
  if (version->get<long long>() != kSessionSchemaVersion) {
    throw SchemaError("unsupported session schema version " + std::to_string(version->get<long long>()) +
                          " (supported: " + std::to_string(kSessionSchemaVersion) + ")",
                      "version");
  }
  try {
    Session s;
    const auto require = [&](const char* key) -> const json& {
      auto it = doc.find(key);
      if (it == doc.end()) throw ValidationError("missing field", key);
      return *it;
    };
    const json& id = require("id");
    if (!id.is_string() || id.get<std::string>().empty()) throw ValidationError("expected a non-empty string", "id");
    s.id = id.get<std::string>();
    const json& revision = require("revision");
    if (!revision.is_number_unsigned()) throw ValidationError("expected a non-negative integer", "revision");
    s.revision = revision.get<std::uint64_t>();
    const json& seed = require("seed");
    if (!seed.is_number_unsigned()) throw ValidationError("expected a non-negative integer", "seed");
    s.seed = seed.get<std::uint64_t>();
    s.config = config_from_json(require("config"), PipelineConfig{}, "config");
    s.instructions = instructions_from_json(require("instructions"), "instructions");
    if (auto it = doc.find("last_result"); it != doc.end() && !it->is_null()) {
      ResultRecord r;
      if (!it->is_object()) throw ValidationError("expected an object", "last_result");
      if (!it->contains("seed") || !(*it)["seed"].is_number_unsigned()) {
        throw ValidationError("expected a non-negative integer", "last_result.seed");
      }
      r.seed = (*it)["seed"].get<std::uint64_t>();
      if (!it->contains("lambda") || !(*it)["lambda"].is_number()) {
        throw ValidationError("expected a number", "last_result.lambda");
      }
      r.lambda = (*it)["lambda"].get<double>();
      if (!it->contains("revision") || !(*it)["revision"].is_number_unsigned()) {
        throw ValidationError("expected a non-negative integer", "last_result.revision");
      }
      r.revision = (*it)["revision"].get<std::uint64_t>();
      if (!it->contains("digests") || !(*it)["digests"].is_object()) {
        throw ValidationError("expected an object", "last_result.digests");
      }
      r.digests = (*it)["digests"];
      s.last_record = std::move(r);
    }
    return s;
  } catch (const ValidationError& e) {
    throw SchemaError(e.what(), e.field().empty() ? "$" : e.field());
  }
}

void write_session_file(const Session& session, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write session file " + path.string());
  out << session_to_json(session).dump(2) << '\n';
  if (!out) throw Error("failed writing session file " + path.string());
}

Session read_session_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open session file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  return session_from_json(doc);
}

FrameVariant parse_frame_variant(const std::string& name) {
  if (name == "raw") return FrameVariant::kRaw;
  if (name == "aligned") return FrameVariant::kAligned;
  throw ValidationError("must be 'raw' or 'aligned'", "variant");
}

json GenerationSummary::to_json() const {
  return {{"session_id", session_id}, {"num_frames", num_frames},        {"seed", seed},
          {"lambda", lambda},         {"revision", revision},            {"timings", ivgen::to_json(timings)},
          {"digests", digests}};
}

SessionManager::SessionManager(ServiceConfig config, Generator generator)
    : config_(std::move(config)), generator_(std::move(generator)) {
  config_.validate();
  if (!generator_) {
    generator_ = [](const InstructionSet& set, const PipelineConfig& c, std::uint64_t seed) {
      return generate(set, c, seed);
    };
  }
}

void SessionManager::check_caps(const PipelineConfig& config) const {
  if (config.height > config_.max_resolution || config.width > config_.max_resolution) {
    throw CapacityError("resolution " + std::to_string(config.height) + "x" + std::to_string(config.width) +
                            " exceeds max_resolution " + std::to_string(config_.max_resolution),
                        "max_resolution", config_.max_resolution);
  }
  if (config.num_frames > config_.max_frames) {
    throw CapacityError("num_frames " + std::to_string(config.num_frames) + " exceeds max_frames " +
                            std::to_string(config_.max_frames),
                        "max_frames", config_.max_frames);
  }
  if (config.steps > config_.max_steps) {
    throw CapacityError("steps " + std::to_string(config.steps) + " exceeds max_steps " +
                            std::to_string(config_.max_steps),
                        "max_steps", static_cast<std::size_t>(config_.max_steps));
  }
}

std::string SessionManager::insert(Session session) {
  std::lock_guard lock(table_mutex_);
  if (sessions_.size() >= config_.max_sessions) {
    throw CapacityError("session table is full (max_sessions " + std::to_string(config_.max_sessions) + ")",
                        "max_sessions", config_.max_sessions);
  }
  if (sessions_.count(session.id)) throw ConflictError("session " + session.id + " already exists");
  auto entry = std::make_shared<Entry>();
  const std::string id = session.id;
  entry->session = std::move(session);
  sessions_.emplace(id, std::move(entry));
  return id;
}

std::string SessionManager::create_session(const json& overrides) {
  if (!overrides.is_object()) throw ValidationError("expected an object", "overrides");
  Session s;
  if (auto it = overrides.find("config"); it != overrides.end()) {
    // Caps are checked before full validation so oversized requests report the cap.
    PipelineConfig probe;
    try {
      if (it->is_object()) {
        probe.height = it->value("height", probe.height);
        probe.width = it->value("width", probe.width);
        probe.num_frames = it->value("num_frames", probe.num_frames);
        if (auto sched = it->find("schedule"); sched != it->end() && sched->is_object()) {
          probe.steps = sched->value("steps", probe.steps);
        }
      }
    } catch (const json::exception&) {
      probe = PipelineConfig{};  // malformed values are reported by config_from_json
    }
    check_caps(probe);
    s.config = config_from_json(*it);
  }
  check_caps(s.config);
  if (auto it = overrides.find("seed"); it != overrides.end()) {
    if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer", "seed");
    s.seed = it->get<std::uint64_t>();
  }
  s.instructions = default_instructions(s.config);
  std::string id;
  {
    std::lock_guard lock(table_mutex_);
    do {
      id = new_session_id();
    } while (sessions_.count(id));
  }
  s.id = id;
  return insert(std::move(s));
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(table_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

Session SessionManager::get(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session;
}

json SessionManager::describe(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  const Session& s = entry->session;
  json out = session_to_json(s);
  out.erase("format");
  out.erase("version");
  out["generating"] = entry->generating.load();
  if (s.last_result) out["last_result"]["num_frames"] = s.last_result->raw.size();
  return out;
}

std::vector<std::string> SessionManager::list() const {
  std::lock_guard lock(table_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

std::uint64_t SessionManager::put_instructions(const std::string& id, const json& patch,
                                               std::uint64_t expected_revision) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;
  if (expected_revision != s.revision) {
    throw ConflictError("revision mismatch: expected " + std::to_string(expected_revision) + ", current " +
                        std::to_string(s.revision));
  }
  InstructionSet merged = merge_instructions(s.instructions, patch);
  const Shape expected{s.config.channels(), s.config.height, s.config.width};
  if (merged.image.pixels.shape() != expected) {
    throw ValidationError("image shape " + shape_to_string(merged.image.pixels.shape()) +
                              " differs from session resolution " + shape_to_string(expected),
                          "image");
  }
  s.instructions = std::move(merged);
  return ++s.revision;
}

GenerationSummary SessionManager::run_generate(const std::string& id, std::optional<std::uint64_t> seed) {
  auto entry = find(id);
  bool idle = false;
  if (!entry->generating.compare_exchange_strong(idle, true)) {
    throw BusyError("a generation is already running for session " + id);
  }
  struct Release {
    std::atomic<bool>& flag;
    ~Release() { flag.store(false); }
  } release{entry->generating};

  InstructionSet instructions;
  PipelineConfig config;
  std::uint64_t run_seed = 0, revision = 0;
  {
    std::lock_guard lock(entry->mutex);
    instructions = entry->session.instructions;
    config = entry->session.config;
    run_seed = seed.value_or(entry->session.seed);
    revision = entry->session.revision;
  }

  GenerationResult result = generator_(instructions, config, run_seed);

  GenerationSummary summary;
  summary.session_id = id;
  summary.num_frames = result.raw.size();
  summary.seed = run_seed;
  summary.lambda = result.lambda;
  summary.revision = revision;
  summary.timings = result.timings;
  summary.digests = result_digests(result);
  {
    std::lock_guard lock(entry->mutex);
    entry->session.last_record = ResultRecord{run_seed, result.lambda, revision, summary.digests};
    entry->session.last_result = std::move(result);
  }
  return summary;
}

std::vector<EncodedFrame> SessionManager::get_frames(const std::string& id, FrameVariant variant, std::size_t from,
                                                     std::size_t to) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  if (!entry->session.last_result) throw NotFoundError("session " + id + " has no result yet");
  const FrameStack& stack =
      variant == FrameVariant::kRaw ? entry->session.last_result->raw : entry->session.last_result->aligned;
  if (from > to || to > stack.size()) {
    throw ValidationError("range [" + std::to_string(from) + "," + std::to_string(to) + ") outside 0.." +
                              std::to_string(stack.size()),
                          "range");
  }
  std::vector<EncodedFrame> out;
  for (std::size_t i = from; i < to; ++i) out.push_back({i, encode_png(stack[i]), tensor_digest(stack[i])});
  return out;
}

void SessionManager::save_session(const std::string& id, const std::filesystem::path& path) const {
  write_session_file(get(id), path);
}

std::string SessionManager::load_session(const std::filesystem::path& path) {
  Session s = read_session_file(path);
  check_caps(s.config);
  return insert(std::move(s));
}

std::filesystem::path SessionManager::data_path(const std::string& name) const {
  if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
      name == "." || name == "..") {
    throw ValidationError("must be a plain file name", "path");
  }
  return config_.data_dir / name;
}

}  // namespace ivgen
