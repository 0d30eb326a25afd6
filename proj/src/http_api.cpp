#include "ivgen/http_api.hpp"

#include "httplib.h"

#include "ivgen/codec.hpp"
#include "ivgen/error.hpp"

namespace ivgen {
namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON body: ") + e.what(), "body");
  }
}

std::size_t query_index(const httplib::Request& req, const std::string& key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ValidationError("expected a non-negative integer", key);
  }
}

std::uint64_t parse_revision(const std::string& text) {
  std::string v = text;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size() || v.empty() || v[0] == '-') throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ValidationError("expected a non-negative integer", "expected_revision");
  }
}

// Maps engine and service errors onto HTTP statuses.
template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ValidationError& e) {
      send(res, 400, {{"error", "validation"}, {"field", e.field()}, {"message", e.what()}});
    } catch (const SchemaError& e) {
      send(res, 422, {{"error", "schema"}, {"location", e.location()}, {"message", e.what()}});
    } catch (const NotFoundError& e) {
      send(res, 404, {{"error", "not_found"}, {"message", e.what()}});
    } catch (const BusyError& e) {
      send(res, 409, {{"error", "busy"}, {"message", e.what()}});
    } catch (const ConflictError& e) {
      send(res, 409, {{"error", "conflict"}, {"message", e.what()}});
    } catch (const CapacityError& e) {
      const int status = e.limit() == "max_sessions" ? 503 : 422;
      send(res, status, {{"error", "capacity"}, {"limit", e.limit()}, {"cap", e.cap()}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"error", "engine"}, {"message", e.what()}});
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, SessionManager& sessions) {
  server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
               send(res, 200, {{"status", "ok"}});
             }));

  server.Post("/sessions/load", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.contains("path") || !body["path"].is_string()) {
                  throw ValidationError("expected a file name", "path");
                }
                const std::string id = sessions.load_session(sessions.data_path(body["path"].get<std::string>()));
                send(res, 201, {{"id", id}, {"revision", sessions.get(id).revision}});
              }));

  server.Post("/sessions", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const std::string id = sessions.create_session(parse_body(req));
                send(res, 201, {{"id", id}, {"revision", 0}});
              }));

  server.Get(R"(/sessions/([^/]+))", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               send(res, 200, sessions.describe(req.matches[1]));
             }));

  server.Put(R"(/sessions/([^/]+)/instructions)",
             guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               json body = parse_body(req);
               if (!body.is_object()) throw ValidationError("expected an object", "body");
               std::optional<std::uint64_t> expected;
               if (req.has_header("X-Expected-Revision")) {
                 expected = parse_revision(req.get_header_value("X-Expected-Revision"));
               } else if (req.has_header("If-Match")) {
                 expected = parse_revision(req.get_header_value("If-Match"));
               }
               if (auto it = body.find("expected_revision"); it != body.end()) {
                 if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer", "expected_revision");
                 expected = it->get<std::uint64_t>();
                 body.erase("expected_revision");
               }
               if (!expected) throw ValidationError("required", "expected_revision");
               json patch = body.contains("instructions") ? body["instructions"] : body;
               const std::uint64_t revision = sessions.put_instructions(req.matches[1], patch, *expected);
               send(res, 200, {{"id", req.matches[1]}, {"revision", revision}});
             }));

  server.Post(R"(/sessions/([^/]+)/generate)",
              guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                std::optional<std::uint64_t> seed;
                if (auto it = body.find("seed"); it != body.end() && !it->is_null()) {
                  if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer", "seed");
                  seed = it->get<std::uint64_t>();
                }
                send(res, 200, sessions.run_generate(req.matches[1], seed).to_json());
              }));

  server.Get(R"(/sessions/([^/]+)/frames)", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const FrameVariant variant =
                   parse_frame_variant(req.has_param("variant") ? req.get_param_value("variant") : "aligned");
               const Session s = sessions.get(id);
               const std::size_t total = s.last_result ? s.last_result->raw.size() : 0;
               const std::size_t from = query_index(req, "from", 0);
               const std::size_t to = query_index(req, "to", total);
               const auto frames = sessions.get_frames(id, variant, from, to);
               if (req.has_param("format") && req.get_param_value("format") == "png") {
                 if (frames.size() != 1) throw ValidationError("format=png needs a single-frame range", "format");
                 res.set_header("X-Frame-Digest", frames[0].digest);
                 res.set_content(std::string(frames[0].png.begin(), frames[0].png.end()), "image/png");
                 return;
               }
               json list = json::array();
               for (const auto& f : frames) {
                 list.push_back({{"index", f.index},
                                 {"encoding", "png16-base64"},
                                 {"data", base64_encode(f.png)},
                                 {"digest", f.digest}});
               }
               send(res, 200,
                    {{"id", id},
                     {"variant", variant == FrameVariant::kRaw ? "raw" : "aligned"},
                     {"from", from},
                     {"to", to},
                     {"frames", list}});
             }));

  server.Post(R"(/sessions/([^/]+)/save)", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const json body = parse_body(req);
                std::string name = id + ".json";
                if (auto it = body.find("path"); it != body.end()) {
                  if (!it->is_string()) throw ValidationError("expected a file name", "path");
                  name = it->get<std::string>();
                }
                const auto path = sessions.data_path(name);
                sessions.save_session(id, path);
                send(res, 200, {{"id", id}, {"path", name}});
              }));
}

ApiServer::ApiServer(ServiceConfig config, SessionManager::Generator generator)
    : config_(std::move(config)),
      sessions_(std::make_unique<SessionManager>(config_, std::move(generator))),
      server_(std::make_unique<httplib::Server>()) {
  register_routes(*server_, *sessions_);
  // SO_REUSEADDR only: SO_REUSEPORT would let a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  int port = config_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(config_.bind_address);
    if (port < 0) throw Error("cannot bind " + config_.bind_address);
  } else if (!server_->bind_to_port(config_.bind_address, port)) {
    throw Error("cannot bind " + config_.bind_address + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

}  // namespace ivgen
