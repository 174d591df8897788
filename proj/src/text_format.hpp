#pragma once

#include <cstdio>
#include <string>

namespace dbs::detail {

/// Fixed six-decimal rendering used by every CSV writer so repeated runs
/// are byte-identical.
inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace dbs::detail
