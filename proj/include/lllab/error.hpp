#pragma once

#include <stdexcept>
#include <string>

namespace lllab {

enum class Errc {
  invalid_argument,
  vacuum_breakdown,
  blowup,
  no_convergence,
  ordering_lost,
  speed_out_of_range,
  spectral_count,
  config,
};

inline const char* to_string(Errc e) {
  switch (e) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::vacuum_breakdown: return "vacuum breakdown";
    case Errc::blowup: return "blowup";
    case Errc::no_convergence: return "no convergence";
    case Errc::ordering_lost: return "ordering lost";
    case Errc::speed_out_of_range: return "speed out of range";
    case Errc::spectral_count: return "negative eigenvalue count";
    case Errc::config: return "config";
  }
  return "unknown";
}

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error with extra context appended to the message.
  Error with_context(const std::string& ctx) const { return Error(code_, detail_ + " " + ctx); }

 private:
  Errc code_;
  std::string detail_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace lllab
