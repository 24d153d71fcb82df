#pragma once

#include <charconv>
#include <string>

#include "tiepref/errors.hpp"

namespace tiepref {

// Shortest decimal representation that round-trips the exact double.
// Used by every text artifact so outputs are byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw ContractError("double formatting failed");
  return std::string(buf, res.ptr);
}

}  // namespace tiepref
