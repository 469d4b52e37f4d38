#pragma once

#include <array>
#include <charconv>
#include <string>
#include <system_error>

namespace stefan {

/// Shortest-safe decimal text for a double: 17 significant digits, round-trip exact.
inline std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

}  // namespace stefan
