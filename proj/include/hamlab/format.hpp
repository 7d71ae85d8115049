#pragma once

#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace hamlab {

// Shortest lossless text for a double: 17 significant digits.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join(std::span<const double> v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt17(v[i]);
  }
  return s;
}

template <class Int>
std::string join_int(const std::vector<Int>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace hamlab
