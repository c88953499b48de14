#pragma once

#include <cstdio>
#include <string>

namespace nodenorm {

/// Fixed 17-significant-digit decimal: round-trips every double and is
/// byte-stable for identical inputs.
inline std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace nodenorm
