#pragma once

#include <memory>
#include <string>

#include "ivgen/session.hpp"

namespace httplib {
class Server;
}

namespace ivgen {

// Routes:
//   GET  /health
//   POST /sessions                       body {"config": {...}, "seed": N}
//   GET  /sessions/{id}
//   PUT  /sessions/{id}/instructions     body: partial instruction JSON; expected
//                                        revision in "expected_revision" or the
//                                        If-Match / X-Expected-Revision header
//   POST /sessions/{id}/generate         body {"seed": N} (optional)
//   GET  /sessions/{id}/frames?variant=raw|aligned&from=&to=
//   POST /sessions/{id}/save             body {"path": "name.json"} (optional)
//   POST /sessions/load                  body {"path": "name.json"}
// Errors are JSON {"error": kind, "message": ..., ...}.
void register_routes(httplib::Server& server, SessionManager& sessions);

class ApiServer {
 public:
  explicit ApiServer(ServiceConfig config, SessionManager::Generator generator = {});
  ~ApiServer();

  SessionManager& sessions() noexcept { return *sessions_; }

  // Binds (port 0 picks a free port) and returns the bound port. Throws
  // Error when the address cannot be bound.
  int bind();
  // Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  ServiceConfig config_;
  std::unique_ptr<SessionManager> sessions_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ivgen
