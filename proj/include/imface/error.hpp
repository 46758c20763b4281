#pragma once

#include <stdexcept>
#include <string>

namespace imface {

enum class ErrorKind { io, config, numeric, data, dimension, internal };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::data: return "data";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

// Every library failure is reported through this type so the CLI can map it
// to a categorized message and exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace imface
