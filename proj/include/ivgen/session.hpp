#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ivgen/pipeline.hpp"
#include "ivgen/serialization.hpp"

namespace ivgen {

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::size_t max_sessions = 64;
  std::size_t max_resolution = 512;  // applies to both height and width
  std::size_t max_frames = 64;
  int max_steps = 1000;
  std::filesystem::path data_dir = "sessions";

  void validate() const;
};

struct ResultRecord {
  std::uint64_t seed = 0;
  double lambda = kDefaultLambda;
  std::uint64_t revision = 0;  // instruction revision the result was generated from
  json digests;
};

struct Session {
  std::string id;
  InstructionSet instructions;
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::uint64_t revision = 0;
  std::optional<GenerationResult> last_result;  // not persisted
  std::optional<ResultRecord> last_record;      // persisted
};

// Instruction set of a fresh session: background-colored image, no strokes,
// default labels, lambda 0.5, no trajectory.
InstructionSet default_instructions(const PipelineConfig& config);

inline constexpr int kSessionSchemaVersion = 1;
inline constexpr const char* kSessionFormat = "ivgen-session";

// Versioned JSON document; images are base64 little-endian doubles with a
// declared shape and range.
json session_to_json(const Session& session);
// Throws SchemaError naming the version or the first invalid field.
Session session_from_json(const json& doc);
void write_session_file(const Session& session, const std::filesystem::path& path);
Session read_session_file(const std::filesystem::path& path);

struct EncodedFrame {
  std::size_t index = 0;
  std::vector<std::uint8_t> png;
  std::string digest;  // of the stored double-precision frame
};

enum class FrameVariant { kRaw, kAligned };
FrameVariant parse_frame_variant(const std::string& name);

struct GenerationSummary {
  std::string session_id;
  std::size_t num_frames = 0;
  std::uint64_t seed = 0;
  double lambda = kDefaultLambda;
  std::uint64_t revision = 0;
  PhaseTimings timings;
  json digests;

  json to_json() const;
};

// Live session table. Per-session state is guarded by its own lock; at most
// one generation runs per session, others fail with BusyError.
class SessionManager {
 public:
  using Generator =
      std::function<GenerationResult(const InstructionSet& set, const PipelineConfig& config, std::uint64_t seed)>;

  // `generator` defaults to the analytic pipeline's generate().
  explicit SessionManager(ServiceConfig config, Generator generator = {});

  const ServiceConfig& config() const noexcept { return config_; }

  // `overrides` may hold {"config": {...}, "seed": N}.
  std::string create_session(const json& overrides = json::object());
  Session get(const std::string& id) const;
  json describe(const std::string& id) const;
  std::vector<std::string> list() const;

  // Merges `patch` and bumps the revision when `expected_revision` matches.
  std::uint64_t put_instructions(const std::string& id, const json& patch, std::uint64_t expected_revision);

  GenerationSummary run_generate(const std::string& id, std::optional<std::uint64_t> seed = std::nullopt);

  // Frames [from, to) of the stored result.
  std::vector<EncodedFrame> get_frames(const std::string& id, FrameVariant variant, std::size_t from,
                                       std::size_t to) const;

  void save_session(const std::string& id, const std::filesystem::path& path) const;
  // Registers the stored session under its recorded id.
  std::string load_session(const std::filesystem::path& path);

  // Resolves a client-supplied file name inside the data directory.
  std::filesystem::path data_path(const std::string& name) const;

 private:
  struct Entry {
    mutable std::mutex mutex;
    Session session;
    std::atomic<bool> generating{false};
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void check_caps(const PipelineConfig& config) const;
  std::string insert(Session session);

  ServiceConfig config_;
  Generator generator_;
  mutable std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace ivgen
