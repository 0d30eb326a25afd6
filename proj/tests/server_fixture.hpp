#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "httplib.h"
#include "ivgen/http_api.hpp"

// ApiServer on a free local port, served from a background thread.
class TestServer {
 public:
  explicit TestServer(const std::string& name, ivgen::SessionManager::Generator generator = {}) {
    ivgen::ServiceConfig config;
    config.port = 0;
    config.data_dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(config.data_dir);
    std::filesystem::create_directories(config.data_dir);
    data_dir_ = config.data_dir;
    server_ = std::make_unique<ivgen::ApiServer>(config, std::move(generator));
    port_ = server_->bind();
    thread_ = std::thread([this] { server_->listen(); });
  }
  ~TestServer() {
    server_->stop();
    thread_.join();
    std::filesystem::remove_all(data_dir_);
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }
  int port() const { return port_; }
  ivgen::SessionManager& sessions() { return server_->sessions(); }

 private:
  std::filesystem::path data_dir_;
  std::unique_ptr<ivgen::ApiServer> server_;
  int port_ = 0;
  std::thread thread_;
};
