#include "qsor/error.hpp"

namespace qsor {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ok: return "ok";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::unknown_scheme: return "unknown scheme";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::integrity_failure: return "integrity failure";
    case Errc::authentication_failure: return "authentication failure";
    case Errc::truncated_frame: return "truncated frame";
    case Errc::malformed: return "malformed input";
    case Errc::payload_too_large: return "payload too large";
    case Errc::empty_path: return "empty hop list";
    case Errc::insufficient_relays: return "insufficient relays";
    case Errc::stale_descriptor: return "stale descriptor";
    case Errc::key_unavailable: return "no key for scheme";
    case Errc::io_error: return "i/o error";
    case Errc::timeout: return "timeout";
    case Errc::delivery_failure: return "delivery failure";
    case Errc::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace qsor
