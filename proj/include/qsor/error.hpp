#pragma once

#include <stdexcept>
#include <string>

namespace qsor {

// Numeric values are shared with the C API status codes in qsor.h.
enum class Errc : int {
  ok = 0,
  invalid_argument = 1,
  unknown_scheme = 2,
  length_mismatch = 3,
  integrity_failure = 4,
  authentication_failure = 5,
  truncated_frame = 6,
  malformed = 7,
  payload_too_large = 8,
  empty_path = 9,
  insufficient_relays = 10,
  stale_descriptor = 11,
  key_unavailable = 12,
  io_error = 13,
  timeout = 14,
  delivery_failure = 15,
  internal = 16,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qsor
