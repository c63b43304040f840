#pragma once

#include <stdexcept>
#include <string>

namespace htm {

/// Invalid configuration or spec value. `key()` names the offending entry
/// (dotted path) when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// The goal cannot be reached in the plan graph (only possible when edges
/// are thresholded away).
class NoPathError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace htm
