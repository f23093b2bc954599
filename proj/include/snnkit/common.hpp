// Error type and small shared helpers used across the library.
#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace snnkit {

enum class ErrorKind {
  Shape,          // tensor/layer shape inconsistency
  Rewrite,        // graph transform could not be applied
  Normalization,  // weight normalization failure (dead layer etc.)
  Conversion,     // ANN -> SNN conversion refused
  Training,       // divergence or unsupported layer during training
  Format,         // corrupt or unknown file content
  Config,         // bad configuration key/value
  Simulation,     // runtime failure inside the simulator
  Verification,   // a consistency check did not hold
  Io,             // filesystem trouble
};

inline std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Rewrite: return "rewrite";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::Conversion: return "conversion";
    case ErrorKind::Training: return "training";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Simulation: return "simulation";
    case ErrorKind::Verification: return "verification";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + " error: " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

inline void expect(bool cond, ErrorKind k, const std::string& msg) {
  if (!cond) fail(k, msg);
}

// Locale-free shortest-round-trip number formatting, used everywhere a float
// lands in a text artifact so outputs are byte-reproducible.
inline std::string num_str(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string num_str(float v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace snnkit
