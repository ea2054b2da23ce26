#pragma once

#include <stdexcept>
#include <string>

namespace rsdkit {

// Process exit codes reported by the command line front end.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kPipelineOrder = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kFailure)
      : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration or spec; the message names the violated invariant.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config error: " + what, ExitCode::kConfig) {}
};

/// A stage was invoked before the stage it depends on produced its output.
class PipelineOrderError : public Error {
 public:
  explicit PipelineOrderError(const std::string& what)
      : Error("pipeline order error: " + what, ExitCode::kPipelineOrder) {}
};

/// Non-finite loss or gradient during training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric failure: " + what, ExitCode::kNumeric) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension error: " + what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index error: " + what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format error: " + what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split error: " + what, ExitCode::kConfig) {}
};

class StatsError : public Error {
 public:
  explicit StatsError(const std::string& what) : Error("stats error: " + what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input error: " + what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("protocol error: " + what) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what) : Error("checkpoint error: " + what) {}
};

}  // namespace rsdkit
