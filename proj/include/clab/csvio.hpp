#pragma once

#include <cstdio>
#include <string>

namespace clab {

// Fixed numeric formatting for every CSV and scalar the tools emit, so
// repeated runs are byte-identical: 12 significant digits, shortest form.
inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace clab
