#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hwhelp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingPath : public Error {
 public:
  explicit MissingPath(const std::string& path) : Error("path does not exist: " + path) {}
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& message)
      : Error(file + ":" + std::to_string(line) + ": " + message), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::string id) : Error("duplicate problem id: " + id), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

/// A manifest parsed but failed validation while loading a catalog.
class InvalidManifest : public Error {
 public:
  InvalidManifest(const std::string& file, std::vector<std::string> violations)
      : Error(file + ": " + join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
    return out;
  }
  std::vector<std::string> violations_;
};

class UnknownProblem : public Error {
 public:
  explicit UnknownProblem(std::string id) : Error("unknown problem: " + id), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class RunnerUnavailable : public Error {
 public:
  using Error::Error;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

class EmptyCode : public Error {
 public:
  EmptyCode() : Error("code is empty") {}
};

class HistoryTooLong : public Error {
 public:
  explicit HistoryTooLong(std::size_t n) : Error("history has " + std::to_string(n) + " exchanges, at most 3 allowed") {}
};

class StrategyNotAllowedLive : public Error {
 public:
  StrategyNotAllowedLive() : Error("solution_first strategy is only available in replay") {}
};

class InvalidTemplate : public Error {
 public:
  using Error::Error;
};

class UnknownLabel : public Error {
 public:
  UnknownLabel(std::size_t line, const std::string& label)
      : Error("line " + std::to_string(line) + ": unknown label '" + label + "'"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("results/checkpoints length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SinkUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace hwhelp
