#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace lacsim {

/// Fixed textual form for output files: 12 significant digits, "nan" for gaps.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace lacsim
