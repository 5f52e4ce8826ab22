#pragma once

#include <cstdio>
#include <string>

namespace nlgrad::detail {

inline std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace nlgrad::detail
