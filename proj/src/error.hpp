#pragma once

#include <stdexcept>
#include <string>

namespace dode {

enum class ErrorCode {
    domain,       // argument outside the mathematical domain
    config,       // invalid or incompatible configuration
    numeric,      // non-finite values or a failed numerical procedure
    unsupported,  // operation not defined for this backend or kind
    invalid,      // malformed argument (shape mismatch, empty input, ...)
    io,           // file read/write failure
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace dode
