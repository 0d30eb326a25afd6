#include "ivgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ivgen/error.hpp"

namespace ivgen {
namespace {

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_ms(double ms) {
  std::ostringstream out;
  out << std::fixed;
  if (ms >= 1000.0) {
    out << std::setprecision(2) << ms / 1000.0 << "s";
  } else {
    out << std::setprecision(3) << ms << "ms";
  }
  return out.str();
}

}  // namespace

EmbeddingVector embed(const Tensor& image) {
  require_valid(image, "image");
  if (image.rank() != 3) throw ValidationError("expected a [C,H,W] image", "image");
  const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
  const double cell_h = static_cast<double>(height) / kEmbedGrid, cell_w = static_cast<double>(width) / kEmbedGrid;

  std::vector<double> features;
  features.reserve(channels * (kEmbedGrid * kEmbedGrid + 1));
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) mean += image.at(c, y, x);
    }
    mean /= static_cast<double>(height * width);
    double var = 0.0;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) var += (image.at(c, y, x) - mean) * (image.at(c, y, x) - mean);
    }
    var /= static_cast<double>(height * width);

    for (std::size_t gy = 0; gy < kEmbedGrid; ++gy) {
      const double y0 = gy * cell_h, y1 = (gy + 1) * cell_h;
      for (std::size_t gx = 0; gx < kEmbedGrid; ++gx) {
        const double x0 = gx * cell_w, x1 = (gx + 1) * cell_w;
        double acc = 0.0;
        for (std::size_t y = static_cast<std::size_t>(std::floor(y0)); y < height && static_cast<double>(y) < y1; ++y) {
          const double wy = overlap(y0, y1, static_cast<double>(y), static_cast<double>(y) + 1.0);
          for (std::size_t x = static_cast<std::size_t>(std::floor(x0)); x < width && static_cast<double>(x) < x1;
               ++x) {
            acc += wy * overlap(x0, x1, static_cast<double>(x), static_cast<double>(x) + 1.0) * image.at(c, y, x);
          }
        }
        features.push_back(acc / (cell_h * cell_w) - mean);
      }
    }
    features.push_back(static_cast<double>(kEmbedGrid) * std::sqrt(var));
  }

  double norm = 0.0;
  for (double f : features) norm += f * f;
  norm = std::sqrt(norm);
  EmbeddingVector out;
  if (!(norm > 1e-12)) {
    out.values.assign(features.size(), 0.0);
    out.values[0] = 1.0;
    out.degenerate = true;
    return out;
  }
  for (double& f : features) f /= norm;
  out.values = std::move(features);
  return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) throw ValidationError("embedding lengths differ", "embedding");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double image_alignment(const FrameStack& frames, const Tensor& reference) {
  if (frames.frames.empty()) throw ValidationError("frame stack is empty", "frames");
  const EmbeddingVector ref = embed(reference);
  double total = 0.0;
  for (const Tensor& f : frames.frames) total += cosine(embed(f), ref);
  return total / static_cast<double>(frames.size());
}

TextPrototypes TextPrototypes::build(const std::vector<std::string>& vocabulary, std::size_t height,
                                     std::size_t width, std::size_t renders_per_label) {
  if (vocabulary.empty()) throw ConfigError("text alignment needs a non-empty label vocabulary");
  if (renders_per_label == 0) throw ConfigError("prototypes need at least one render per label");
  TextPrototypes out;
  for (const std::string& label : vocabulary) {
    EmbeddingVector proto;
    for (std::size_t seed = 0; seed < renders_per_label; ++seed) {
      const SceneSpec scene = sample_scene(label, "static", seed, height, width);
      const EmbeddingVector e = embed(render_frames(scene, 1, height, width).frames[0]);
      if (proto.values.empty()) proto.values.assign(e.values.size(), 0.0);
      for (std::size_t i = 0; i < e.values.size(); ++i) proto.values[i] += e.values[i] / renders_per_label;
    }
    out.prototypes_.emplace(label, std::move(proto));
  }
  return out;
}

const EmbeddingVector& TextPrototypes::prototype(const std::string& label) const {
  auto it = prototypes_.find(label);
  if (it == prototypes_.end()) throw ValidationError("unknown label '" + label + "'", "label");
  return it->second;
}

std::vector<std::string> TextPrototypes::labels() const {
  std::vector<std::string> out;
  for (const auto& [label, _] : prototypes_) out.push_back(label);
  return out;
}

double text_alignment(const FrameStack& frames, const std::string& label, const TextPrototypes& prototypes) {
  if (frames.frames.empty()) throw ValidationError("frame stack is empty", "frames");
  const EmbeddingVector& proto = prototypes.prototype(label);
  double total = 0.0;
  for (const Tensor& f : frames.frames) total += cosine(embed(f), proto);
  return total / static_cast<double>(frames.size());
}

std::string best_label(const FrameStack& frames, const TextPrototypes& prototypes) {
  std::string best;
  double best_score = -2.0;
  for (const std::string& label : prototypes.labels()) {
    const double s = text_alignment(frames, label, prototypes);
    if (s > best_score) {
      best_score = s;
      best = label;
    }
  }
  return best;
}

json LatencyReport::to_json() const {
  json runs_json = json::array();
  for (const auto& r : runs) runs_json.push_back(ivgen::to_json(r));
  return {{"repetitions", repetitions},
          {"columns", {"Image Instruction", "Content Instruction", "Motion Instruction", "Trajectory Instruction"}},
          {"median", ivgen::to_json(median)},
          {"runs", runs_json}};
}

std::string LatencyReport::to_table() const {
  std::ostringstream out;
  out << "| Process | Image Instruction | Content Instruction | Motion Instruction | Trajectory Instruction | Total |\n";
  out << "|---|---|---|---|---|---|\n";
  out << "| Time | " << format_ms(median.image_ms) << " | " << format_ms(median.content_ms) << " | "
      << format_ms(median.motion_ms) << " | " << format_ms(median.trajectory_ms) << " | "
      << format_ms(median.total_ms) << " |\n";
  return out.str();
}

LatencyReport measure_latency(const InstructionSet& set, const PipelineConfig& config, std::size_t repetitions,
                              std::uint64_t seed) {
  if (repetitions == 0) throw ValidationError("must be at least 1", "repetitions");
  config.validate();
  const Engine engine = Engine::analytic(config);
  LatencyReport report;
  report.repetitions = repetitions;
  for (std::size_t i = 0; i < repetitions; ++i) report.runs.push_back(generate(set, config, seed, engine).timings);
  const auto column = [&](double PhaseTimings::*field) {
    std::vector<double> v;
    for (const auto& r : report.runs) v.push_back(r.*field);
    return median_of(std::move(v));
  };
  report.median.image_ms = column(&PhaseTimings::image_ms);
  report.median.content_ms = column(&PhaseTimings::content_ms);
  report.median.motion_ms = column(&PhaseTimings::motion_ms);
  report.median.trajectory_ms = column(&PhaseTimings::trajectory_ms);
  report.median.total_ms = column(&PhaseTimings::total_ms);
  return report;
}

}  // namespace ivgen
