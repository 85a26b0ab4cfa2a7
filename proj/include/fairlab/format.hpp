#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <string>

namespace fairlab {

/// Shortest decimal text that round-trips to the same double; "nan" for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace fairlab
