#pragma once

#include <stdexcept>
#include <string>

namespace aed {

enum class Errc {
  io,                   // file missing or unreadable
  unsupported_encoding, // WAV that is not integer PCM / IEEE float
  parse,                // malformed text input (TSV, JSON)
  empty_input,          // signal or sequence too short for the operation
  config,               // invalid or infeasible configuration
  invalid_argument,     // precondition violated by a caller
  dimension_mismatch,
  missing_component,    // model bundle lacks a part it needs
  out_of_range,         // interval outside a signal
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

// Takes the message by reference so string literals cost nothing on the
// success path.
template <class Message>
inline void require(bool cond, Errc code, const Message& what) {
  if (!cond) throw Error(code, std::string(what));
}

}  // namespace aed
