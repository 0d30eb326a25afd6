#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ivgen {

// Base of every error raised by the engine and service.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input failed a precondition. `field()` is a dotted path such as
// "trajectory.handles[0]" when the failure can be located.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NumericalDomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UndefinedCentroidError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Optimistic-concurrency failure: caller's revision is stale.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// A generation is already running on the session.
class BusyError : public Error {
 public:
  using Error::Error;
};

// A configured cap was exceeded. `limit()` names the cap ("max_resolution",
// "max_sessions", ...) and `cap()` its value.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& message, std::string limit, std::size_t cap)
      : Error(message), limit_(std::move(limit)), cap_(cap) {}
  const std::string& limit() const noexcept { return limit_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::string limit_;
  std::size_t cap_ = 0;
};

// Session file could not be loaded (version mismatch or corrupt content).
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message, std::string location = {})
      : Error(location.empty() ? message : location + ": " + message), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

}  // namespace ivgen
