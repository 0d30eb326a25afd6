#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ivgen/demo.hpp"
#include "ivgen/error.hpp"
#include "ivgen/eval.hpp"
#include "ivgen/export.hpp"
#include "ivgen/http_api.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

ivgen::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

void print_error(const std::exception& e) {
  std::cerr << "error: " << e.what();
  if (auto* v = dynamic_cast<const ivgen::ValidationError*>(&e); v && !v->field().empty()) {
    std::cerr << " (field: " << v->field() << ")";
  }
  if (auto* s = dynamic_cast<const ivgen::SchemaError*>(&e); s && !s->location().empty()) {
    std::cerr << " (at: " << s->location() << ")";
  }
  std::cerr << '\n';
}

int cmd_generate(const std::string& session_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                 std::optional<double> lambda) {
  ivgen::Session session;
  try {
    session = ivgen::read_session_or_manifest(session_path);
    if (seed) session.seed = *seed;
    if (lambda) {
      ivgen::validate_lambda(*lambda, "--lambda");
      session.instructions.lambda = *lambda;
    }
  } catch (const std::exception& e) {
    print_error(e);
    return kExitUsage;
  }
  try {
    const ivgen::GenerationResult result = ivgen::generate(session.instructions, session.config, session.seed);
    const ivgen::json manifest = ivgen::export_result(session, result, out_dir);
    std::cout << "wrote " << result.raw.size() << " frames to " << out_dir << " (seed " << result.seed
              << ", lambda " << result.lambda << ")\n";
    return kExitOk;
  } catch (const std::exception& e) {
    print_error(e);
    return kExitRuntime;
  }
}

int cmd_serve(std::optional<int> port_flag, std::optional<std::string> data_dir_flag) {
  ivgen::ServiceConfig config;
  try {
    if (port_flag) {
      config.port = *port_flag;
    } else if (auto p = env("IVGEN_PORT")) {
      config.port = std::stoi(*p);
    }
    if (data_dir_flag) {
      config.data_dir = *data_dir_flag;
    } else if (auto d = env("IVGEN_DATA_DIR")) {
      config.data_dir = *d;
    }
    config.validate();
  } catch (const std::exception& e) {
    print_error(e);
    return kExitUsage;
  }
  try {
    ivgen::ApiServer server(config);
    const int port = server.bind();
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "listening on " << config.bind_address << ":" << port << std::endl;
    server.listen();
    g_server = nullptr;
    return kExitOk;
  } catch (const std::exception& e) {
    g_server = nullptr;
    print_error(e);
    return kExitRuntime;
  }
}

int cmd_bench(std::size_t reps, const std::string& out_path) {
  try {
    ivgen::Session session = ivgen::demo_session("one_blob", "drift_right");
    const ivgen::SceneSpec scene = ivgen::sample_scene("one_blob", "drift_right", 0);
    session.instructions.trajectory = ivgen::demo_drag(scene, 2.0, 0.0);

    const ivgen::LatencyReport report = ivgen::measure_latency(session.instructions, session.config, reps);
    const ivgen::GenerationResult result = ivgen::generate(session.instructions, session.config, 0);
    const auto protos = ivgen::TextPrototypes::build(ivgen::content_vocabulary(), session.config.height,
                                                     session.config.width);
    ivgen::json alignment = {
        {"image_alignment", ivgen::image_alignment(result.aligned, session.instructions.image.pixels)},
        {"text_alignment", ivgen::text_alignment(result.aligned, session.instructions.content.label, protos)},
        {"best_label", ivgen::best_label(result.aligned, protos)},
        {"label", session.instructions.content.label}};

    std::cout << report.to_table() << '\n';
    std::cout << std::setprecision(6) << "image_alignment " << alignment["image_alignment"].get<double>()
              << "\ntext_alignment  " << alignment["text_alignment"].get<double>() << " (best label "
              << alignment["best_label"].get<std::string>() << ")\n";

    ivgen::json doc = {{"latency", report.to_json()}, {"alignment", alignment}, {"config", ivgen::to_json(session.config)}};
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::trunc);
      if (!out) throw ivgen::Error("cannot write " + out_path);
      out << std::setw(2) << doc << '\n';
    } else {
      std::cout << doc.dump(2) << '\n';
    }
    return kExitOk;
  } catch (const std::exception& e) {
    print_error(e);
    return kExitRuntime;
  }
}

int cmd_demo_scene(const std::string& out_dir, std::optional<std::string> content, std::optional<std::string> motion) {
  try {
    std::filesystem::create_directories(out_dir);
    std::size_t written = 0;
    for (const std::string& c : ivgen::content_vocabulary()) {
      if (content && *content != c) continue;
      for (const std::string& m : ivgen::motion_vocabulary()) {
        if (motion && *motion != m) continue;
        const ivgen::Session s = ivgen::demo_session(c, m);
        const auto path = std::filesystem::path(out_dir) / (s.id + ".json");
        ivgen::write_session_file(s, path);
        std::cout << path.string() << '\n';
        ++written;
      }
    }
    if (written == 0) {
      std::cerr << "error: no label pair matched\n";
      return kExitUsage;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    print_error(e);
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive video generation engine"};
  app.require_subcommand(1);

  std::string session_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  auto* generate = app.add_subcommand("generate", "Generate frames from a session file or result manifest");
  generate->add_option("--session", session_path, "Session or manifest JSON")->required();
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--seed", seed, "Override the session seed");
  generate->add_option("--lambda", lambda, "Override the instruction lambda");

  std::optional<int> port;
  std::optional<std::string> data_dir;
  auto* serve = app.add_subcommand("serve", "Run the session HTTP service (env IVGEN_PORT, IVGEN_DATA_DIR)");
  serve->add_option("--port", port, "Port to bind, 0 picks a free one");
  serve->add_option("--data-dir", data_dir, "Directory for saved sessions");

  std::size_t reps = 5;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "Latency table and alignment summary on the demo session");
  bench->add_option("--reps", reps, "Repetitions per measurement")->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Write the JSON report here instead of stdout");

  std::string demo_out = ".";
  std::optional<std::string> demo_content, demo_motion;
  auto* demo = app.add_subcommand("demo-scene", "Write a session file per (content, motion) label pair");
  demo->add_option("--out", demo_out, "Output directory");
  demo->add_option("--content", demo_content, "Only this content label");
  demo->add_option("--motion", demo_motion, "Only this motion label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*generate) return cmd_generate(session_path, out_dir, seed, lambda);
  if (*serve) return cmd_serve(port, data_dir);
  if (*bench) return cmd_bench(reps, bench_out);
  if (*demo) return cmd_demo_scene(demo_out, demo_content, demo_motion);
  return kExitUsage;
}
