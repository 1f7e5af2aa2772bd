#ifndef VIDLINK_ERRORS_H_
#define VIDLINK_ERRORS_H_

#include <stdexcept>
#include <string>

namespace vidlink {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inconsistent packet headers across fragments of one frame.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Truncated or malformed wire buffer.
class FramingError : public Error {
 public:
  using Error::Error;
};

// Estimator bookkeeping misuse: out-of-order observation, double finalize.
class AccountingError : public Error {
 public:
  using Error::Error;
};

// Event clock moved backwards.
class ClockError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Scenario parse or validation failure. Carries the offending key and the
// 1-based line number (0 when the problem is not tied to one line).
class ValidationError : public Error {
 public:
  ValidationError(std::string key, int line, const std::string& what)
      : Error(Format(key, line, what)), key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string Format(const std::string& key, int line,
                            const std::string& what) {
    std::string out;
    if (line > 0)
      out += "line " + std::to_string(line) + ": ";
    if (!key.empty())
      out += key + ": ";
    return out + what;
  }

  std::string key_;
  int line_;
};

}  // namespace vidlink

#endif  // VIDLINK_ERRORS_H_
