// Internal text helpers: 17-significant-digit decimal round-tripping.
#ifndef WRA_SRC_TEXT_HPP
#define WRA_SRC_TEXT_HPP

#include <cstdio>
#include <string>

namespace wra::detail {

inline void append_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline std::string g17(double v) {
  std::string s;
  append_g17(s, v);
  return s;
}

}  // namespace wra::detail

#endif
