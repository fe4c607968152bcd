#pragma once

#include <charconv>
#include <string>

namespace softq {

// Shortest decimal that round-trips to the same double; "-inf" for the
// semiring zero.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace softq
