#pragma once

#include <stdexcept>
#include <string>

namespace mesb {

enum class ErrorKind {
  InvalidArgument,   // bad caller input (shapes, ranges, parameters)
  OperatorContract,  // an operator violated its SPD/adjoint contract
  Capability,        // a feature the denoiser does not provide was requested
  External,          // external denoiser subprocess failed
  Protocol,          // malformed frame on the denoiser wire protocol
  Io,                // file system failure
  Config,            // config file rejected
  Internal,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

[[noreturn]] inline void fail_invalid(const std::string& message) {
  throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace mesb
