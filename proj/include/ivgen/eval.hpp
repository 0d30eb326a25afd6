#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ivgen/pipeline.hpp"
#include "ivgen/serialization.hpp"

namespace ivgen {

// Unit-norm image descriptor.
struct EmbeddingVector {
  std::vector<double> values;
  bool degenerate = false;  // feature norm was zero; values is the canonical unit vector
};

inline constexpr std::size_t kEmbedGrid = 4;

// Per channel: area-averaged GxG grid means minus the channel mean, then the
// channel's pixel standard deviation weighted by G. L2-normalized.
EmbeddingVector embed(const Tensor& image);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Mean cosine between each frame and the reference image.
double image_alignment(const FrameStack& frames, const Tensor& reference);

// Per-label prototypes: the mean embedding of canonical renders
// (sample_scene(label, "static", seed) for seed 0..renders-1).
class TextPrototypes {
 public:
  static TextPrototypes build(const std::vector<std::string>& vocabulary, std::size_t height, std::size_t width,
                              std::size_t renders_per_label = 16);

  const EmbeddingVector& prototype(const std::string& label) const;
  std::vector<std::string> labels() const;

 private:
  std::map<std::string, EmbeddingVector> prototypes_;
};

double text_alignment(const FrameStack& frames, const std::string& label, const TextPrototypes& prototypes);

// Label with the highest text_alignment.
std::string best_label(const FrameStack& frames, const TextPrototypes& prototypes);

struct LatencyReport {
  std::size_t repetitions = 0;
  PhaseTimings median;  // per-phase median over repetitions
  std::vector<PhaseTimings> runs;

  json to_json() const;
  // Markdown table with the four instruction columns and a total.
  std::string to_table() const;
};

LatencyReport measure_latency(const InstructionSet& set, const PipelineConfig& config, std::size_t repetitions,
                              std::uint64_t seed = 0);

}  // namespace ivgen
